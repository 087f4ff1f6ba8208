"""Family files: YAML descriptions of a vector-field family, its loop and optional Hamiltonian data."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .family import CrossSection, VectorFieldFamily
from .hamiltonian import HamiltonianError, HamiltonianSetup

__all__ = ["ConfigError", "ChartSpec", "LoopSpec", "FamilyConfig", "load_family", "parse_family", "config_hash",
           "parse_lambda_args"]


class ConfigError(ValueError):
    """Malformed family file or command-line values."""


@dataclass
class LoopSpec:
    kind: str
    saddles: list
    interior: tuple
    c: float = 0.2
    order: int = 12
    chart_radius: float | None = None
    section_radius: float | None = None
    sigma: CrossSection | None = None
    tau: CrossSection | None = None


@dataclass
class ChartSpec:
    saddles: list
    interior: tuple | None = None
    c: float = 0.2
    order: int = 12
    radius: float | None = None
    section_radius: float | None = None


@dataclass
class FamilyConfig:
    name: str
    family: VectorFieldFamily
    loop: LoopSpec | None
    radius: float | None = None
    lambdas: list = field(default_factory=list)
    bruteforce: dict = field(default_factory=dict)
    hamiltonian: HamiltonianSetup | None = None
    chart: ChartSpec | None = None
    raw: dict = field(default_factory=dict)

    def build_chart(self, lam, corner: int = 0, sign: float = 1.0):
        """(chart, sigma, tau) at the ``corner``-th saddle, from the chart block or the loop."""
        from .family import build_saddle_chart, find_saddle
        from .transport import chart_sections

        spec = self.chart
        if spec is None:
            if self.loop is None:
                raise ConfigError(f"family '{self.name}' declares neither a chart nor a loop")
            lp = self.loop
            spec = ChartSpec(lp.saddles, lp.interior, lp.c, lp.order, lp.chart_radius, lp.section_radius)
        if not 0 <= corner < len(spec.saddles):
            raise ConfigError(f"corner {corner} out of range (family has {len(spec.saddles)} saddles)")
        p = find_saddle(self.family, lam, spec.saddles[corner])
        ch = build_saddle_chart(self.family, lam, p, spec.order, sign=sign, interior=spec.interior,
                                radius=spec.radius)
        sigma, tau = chart_sections(ch, self.family, spec.c, spec.c, radius=spec.section_radius)
        return ch, sigma, tau

    def build_displacement(self, lam):
        """The displacement map of the configured loop at ``lam``."""
        from .loops import one_saddle_loop, two_saddle_loop

        lp = self.loop
        if lp is None:
            raise ConfigError(f"family '{self.name}' declares no loop")
        if lp.kind == "one-saddle":
            return one_saddle_loop(self.family, lam, lp.saddles[0], lp.interior, c=lp.c, order=lp.order,
                                   chart_radius=lp.chart_radius, section_radius=lp.section_radius)
        return two_saddle_loop(self.family, lam, lp.saddles, lp.interior, lp.sigma, lp.tau, c=lp.c,
                               order=lp.order, chart_radius=lp.chart_radius,
                               section_radius=lp.section_radius)


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing key '{key}'")
    return d[key]


def _point(v, where: str) -> tuple:
    try:
        p = tuple(float(a) for a in v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: expected a point [x, y]") from exc
    if len(p) != 2:
        raise ConfigError(f"{where}: expected a point [x, y]")
    return p


def _line_section(d: dict, name: str) -> CrossSection:
    where = f"loop.{name}"
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    anchor = np.array(_point(_need(d, "point", where), where))
    direction = np.array(_point(_need(d, "direction", where), where))
    nrm = np.hypot(*direction)
    if nrm == 0:
        raise ConfigError(f"{where}: zero direction")
    radius = float(_need(d, "radius", where))
    if radius <= 0:
        raise ConfigError(f"{where}: radius must be positive")
    return CrossSection(anchor, radius, None, "line", direction / nrm, name=name)


def _parse_field(raw: dict, params: list) -> VectorFieldFamily:
    fld = _need(raw, "field", "family")
    if not isinstance(fld, dict):
        raise ConfigError("field: expected a mapping")
    name = str(raw.get("name", "family"))
    try:
        if "P" in fld and "Q" in fld:
            return VectorFieldFamily.from_strings(str(fld["P"]), str(fld["Q"]), params, name=name)
        if "P_terms" in fld and "Q_terms" in fld:
            return VectorFieldFamily.from_terms(fld["P_terms"], fld["Q_terms"], params, name=name)
    except (SyntaxError, TypeError, ValueError) as exc:
        raise ConfigError(f"field: cannot parse expressions ({exc})") from exc
    raise ConfigError("field: give either P and Q or P_terms and Q_terms")


def _parse_loop(d: dict) -> LoopSpec:
    if not isinstance(d, dict):
        raise ConfigError("loop: expected a mapping")
    kind = str(_need(d, "kind", "loop"))
    if kind not in ("one-saddle", "two-saddle"):
        raise ConfigError(f"loop.kind: unknown kind '{kind}'")
    saddles = [_point(s, "loop.saddles") for s in _need(d, "saddles", "loop")]
    if len(saddles) != (1 if kind == "one-saddle" else 2):
        raise ConfigError(f"loop.saddles: {kind} loop needs {1 if kind == 'one-saddle' else 2} seeds")
    spec = LoopSpec(kind, saddles, _point(_need(d, "interior", "loop"), "loop.interior"),
                    c=float(d.get("c", 0.2)), order=int(d.get("order", 12)),
                    chart_radius=None if d.get("chart_radius") is None else float(d["chart_radius"]),
                    section_radius=None if d.get("section_radius") is None else float(d["section_radius"]))
    if spec.c <= 0 or spec.order < 1:
        raise ConfigError("loop: c must be positive and order >= 1")
    if kind == "two-saddle":
        spec.sigma = _line_section(_need(d, "sigma", "loop"), "sigma")
        spec.tau = _line_section(_need(d, "tau", "loop"), "tau")
    return spec


def _parse_hamiltonian(d: dict, params: list) -> HamiltonianSetup:
    if not isinstance(d, dict):
        raise ConfigError("hamiltonian: expected a mapping")
    center = d.get("center", [0.0, 0.0])
    saddle = d.get("saddle")
    try:
        return HamiltonianSetup(str(_need(d, "H", "hamiltonian")), str(d.get("A", "0")), str(d.get("B", "0")),
                                tuple(d.get("parameters", params)),
                                center=None if center is None else _point(center, "hamiltonian.center"),
                                saddle=None if saddle is None else _point(saddle, "hamiltonian.saddle"),
                                name=str(d.get("name", "hamiltonian")))
    except (SyntaxError, TypeError, ValueError, HamiltonianError) as exc:
        raise ConfigError(f"hamiltonian: {exc}") from exc


def _parse_chart(d: dict) -> ChartSpec:
    if not isinstance(d, dict):
        raise ConfigError("chart: expected a mapping")
    saddles = [_point(s, "chart.saddles") for s in _need(d, "saddles", "chart")]
    if not saddles:
        raise ConfigError("chart.saddles: need at least one seed")
    interior = d.get("interior")
    return ChartSpec(saddles, None if interior is None else _point(interior, "chart.interior"),
                     float(d.get("c", 0.2)), int(d.get("order", 12)),
                     None if d.get("radius") is None else float(d["radius"]),
                     None if d.get("section_radius") is None else float(d["section_radius"]))


def parse_family(raw) -> FamilyConfig:
    """Validate a decoded family document."""
    if not isinstance(raw, dict):
        raise ConfigError("family file must be a mapping")
    params = [str(p) for p in raw.get("parameters", [])]
    fam = _parse_field(raw, params)
    loop = _parse_loop(raw["loop"]) if raw.get("loop") is not None else None
    radius = raw.get("radius")
    if radius is not None and float(radius) <= 0:
        raise ConfigError("radius must be positive")
    lambdas = []
    for lam in raw.get("lambda", []) or []:
        lam = [float(v) for v in (lam if isinstance(lam, (list, tuple)) else [lam])]
        if len(lam) != len(params):
            raise ConfigError(f"lambda {lam}: expected {len(params)} components")
        lambdas.append(lam)
    ham = _parse_hamiltonian(raw["hamiltonian"], params) if raw.get("hamiltonian") is not None else None
    bf = dict(raw.get("bruteforce", {}) or {})
    chart = _parse_chart(raw["chart"]) if raw.get("chart") is not None else None
    return FamilyConfig(str(raw.get("name", "family")), fam, loop,
                        None if radius is None else float(radius), lambdas, bf, ham, chart, raw)


def load_family(path) -> FamilyConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"family file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: not valid YAML ({exc})") from exc
    return parse_family(raw)


def config_hash(*parts) -> str:
    """sha256 of the canonical JSON of ``parts`` (family document and run options)."""
    blob = json.dumps(parts, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def parse_lambda_args(values, n_params: int) -> list[list[float]]:
    """Parse ``--lambda`` values: comma-separated components, any of which may be a sweep a:b:n."""
    out: list[list[float]] = []
    for text in values:
        comps = [c.strip() for c in str(text).split(",")]
        if len(comps) != n_params:
            raise ConfigError(f"--lambda {text}: expected {n_params} components")
        axes = []
        for c in comps:
            if ":" in c:
                try:
                    a, b, n = c.split(":")
                    n = int(n)
                    axes.append(np.linspace(float(a), float(b), n).tolist())
                except ValueError as exc:
                    raise ConfigError(f"--lambda {text}: bad sweep '{c}' (use a:b:n)") from exc
                if n < 1:
                    raise ConfigError(f"--lambda {text}: sweep needs n >= 1")
            else:
                try:
                    axes.append([float(c)])
                except ValueError as exc:
                    raise ConfigError(f"--lambda {text}: '{c}' is not a number") from exc
        grid = np.meshgrid(*axes, indexing="ij")
        out.extend(np.column_stack([g.ravel() for g in grid]).tolist())
    return out
