"""Displacement maps of one- and two-saddle polycycles assembled from transports.

A displacement is a difference of two maps sigma -> tau.  A corner map is a
local Dulac map of a saddle chart, optionally preceded and followed by regular
transports; it branches at its puncture s (the point of sigma on the incoming
separatrix) and is evaluated on the cover through the lifted argument of z - s.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .family import CrossSection, SaddleChart, VectorFieldFamily, build_saddle_chart, find_saddle
from .locus import CurveTrace, trace_curve
from .transport import (HolonomyMap, LeafTransport, TransportError, chart_sections, dulac,
                        real_hit_time, regular_transport)

__all__ = [
    "RegularMap",
    "CornerMap",
    "Displacement",
    "ModelDisplacement",
    "one_saddle_loop",
    "two_saddle_loop",
    "select_case",
    "displacement",
]

logger = logging.getLogger(__name__)


def _hit_time(family, lam, src: CrossSection, dst: CrossSection, sign: float, z0: float = 0.0) -> float:
    x0, y0 = src.point(np.array([z0], dtype=complex))
    p0 = (np.real(x0).item(), np.real(y0).item())
    t, _ = real_hit_time(family, lam, p0, dst, sign=sign, min_time=1e-3)
    if t is None:
        raise TransportError("left-domain", f"real orbit from {src.name} never reaches {dst.name}")
    return t


class RegularMap:
    """Regular transport src -> dst along the real orbit through src(z0)."""

    def __init__(self, family: VectorFieldFamily, lam, src: CrossSection, dst: CrossSection,
                 sign: float = 1.0, z0: float = 0.0):
        self.family, self.lam, self.src, self.dst, self.sign = family, lam, src, dst, sign
        self.t = _hit_time(family, lam, src, dst, sign, z0)
        self.engine = LeafTransport(family, lam, sign, chart=dst.chart)

    def __call__(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        r = regular_transport(self.family, self.lam, self.src, z, self.dst, self.t,
                              sign=self.sign, engine=self.engine)
        if not r.ok:
            raise TransportError(r.status, f"{self.src.name} -> {self.dst.name}")
        return r.endpoint

    def inverse(self) -> "RegularMap":
        inv = RegularMap.__new__(RegularMap)
        inv.family, inv.lam, inv.src, inv.dst = self.family, self.lam, self.dst, self.src
        inv.sign, inv.t = -self.sign, self.t
        inv.engine = LeafTransport(self.family, self.lam, -self.sign, chart=self.src.chart)
        return inv


def _newton_real(f, x0: float, tol: float = 1e-14, h: float = 1e-7, max_iter: int = 40) -> float:
    x = float(x0)
    for _ in range(max_iter):
        v = np.real(f(np.array([x, x + h, x - h], dtype=complex)))
        d = (v[1] - v[2]) / (2 * h)
        dx = v[0] / d
        x -= dx
        if abs(dx) < tol:
            break
    return x


@dataclass
class CornerMap:
    """T_out o D_local o T_in, branched at the puncture s on sigma."""

    family: VectorFieldFamily
    lam: tuple
    chart: SaddleChart
    sigma_loc: CrossSection
    tau_loc: CrossSection
    t_in: RegularMap | None = None
    t_out: RegularMap | None = None
    name: str = "corner"
    puncture: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.t_in is not None:
            self.puncture = _newton_real(self.t_in, 0.0)
            d = self.t_in(np.array([self.puncture + 1e-6, self.puncture - 1e-6]))
            self.scale = float(np.real(d[0] - d[1]) / 2e-6)
            if self.scale <= 0:
                raise ValueError(f"{self.name}: incoming transport reverses orientation; check the interior hint")
            self.t_in_inv = self.t_in.inverse()

    @property
    def alpha(self) -> float:
        return self.chart.alpha

    def local(self, z, phi):
        """Local coordinate zeta = T_in(z) and its lifted argument."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        phi = np.broadcast_to(np.asarray(phi, dtype=float), z.shape)
        if self.t_in is None:
            return z, phi
        zeta = self.t_in(z)
        d = z - self.puncture
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = np.where(d != 0, np.angle(zeta / d), 0.0)
        return zeta, phi + corr

    def __call__(self, z, phi):
        zeta, phz = self.local(z, phi)
        r = dulac(self.family, self.lam, self.chart, self.sigma_loc, self.tau_loc, np.abs(zeta), phz)
        if not r.ok:
            raise TransportError(r.status, f"{self.name} Dulac map")
        w = r.endpoint
        return w if self.t_out is None else self.t_out(w)

    def limit(self) -> complex:
        """Value of the map at its puncture (D_local -> 0)."""
        if self.t_out is None:
            return 0.0
        return complex(self.t_out(np.array([0.0]))[0])

    def holonomy(self, k: int) -> HolonomyMap:
        return HolonomyMap(self.family, self.lam, self.chart, self.sigma_loc, k)

    def trace(self, k: int, R: float, **kw) -> CurveTrace:
        """Locus {Im D = 0} tangent to angle k pi / alpha at the puncture, mapped to sigma."""
        h = self.holonomy(k)
        rz = min(self.sigma_loc.radius, 1.6 * self.scale * R)
        kw.setdefault("step0", 1e-4 * self.sigma_loc.radius)
        tr = trace_curve(h, k, self.alpha, rz, **kw)
        tr.meta["local_points"] = tr.points.copy()
        if self.t_in is not None:
            z = self.t_in_inv(tr.points[1:])
            tr.points = np.concatenate([[self.puncture], z])
            tr.origin = complex(self.puncture)
        return tr


class Displacement:
    """psi = first - second, each a CornerMap or a RegularMap (unbranched)."""

    def __init__(self, first, second, kind: str, *, meta: dict | None = None):
        self.first, self.second = first, second
        self.kind = kind
        self.meta = meta or {}
        self.shift = 0.0

    @property
    def corners(self) -> list:
        return [m for m in (self.first, self.second) if isinstance(m, CornerMap)]

    @property
    def punctures(self) -> list[float]:
        return [c.puncture for c in self.corners]

    def _apply(self, m, z, lifts, i):
        if isinstance(m, CornerMap):
            return m(z, lifts[i])
        return m(z)

    def __call__(self, z, lifts):
        """psi at points z with lifted arguments ``lifts[i]`` of z - s_i."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        lifts = np.atleast_2d(np.asarray(lifts, dtype=float))
        ic = 0
        out = []
        for m in (self.first, self.second):
            out.append(self._apply(m, z, lifts, ic))
            if isinstance(m, CornerMap):
                ic += 1
        return out[0] - out[1] + self.shift

    def limits(self) -> list[complex]:
        """Limits of psi at the punctures."""
        vals = []
        for i, c in enumerate(self.corners):
            s = np.array([c.puncture], dtype=complex)
            parts = []
            for m in (self.first, self.second):
                if m is c or (isinstance(m, CornerMap) and abs(m.puncture - c.puncture) < 1e-12):
                    parts.append(m.limit())
                elif isinstance(m, CornerMap):
                    lift = [np.angle(c.puncture - m.puncture + 0j)]
                    parts.append(complex(m(s, lift)[0]))
                else:
                    parts.append(complex(m(s)[0]))
            vals.append(parts[0] - parts[1] + self.shift)
        return vals

    def real_values(self, x):
        """psi on real points to the right of all punctures (principal branch)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self(x + 0j, np.zeros((len(self.corners), x.size)))


class ModelDisplacement:
    """Closed-form displacement for tests: psi(z) = f(z, lifts) with given punctures."""

    def __init__(self, f, punctures=(), kind: str = "model", alphas=()):
        self.f = f
        self._p = list(punctures)
        self.kind = kind
        self.alphas = list(alphas)
        self.shift = 0.0
        self.meta = {}

    @property
    def punctures(self):
        return self._p

    def __call__(self, z, lifts):
        return self.f(np.atleast_1d(np.asarray(z, dtype=complex)), np.atleast_2d(lifts)) + self.shift

    def limits(self):
        return [complex(self(np.array([s]), np.zeros((max(1, len(self._p)), 1)))[0]) for s in self._p]


def select_case(alpha1_0: float, alpha2_0: float, tol: float = 1e-9) -> tuple[str, bool, float, float]:
    """Two-saddle case from the ratios at lambda = 0, swapping sigma and tau when a1 a2 < 1."""
    a1, a2 = alpha1_0, alpha2_0
    swapped = False
    if a1 * a2 < 1 - tol:
        a1, a2 = 1 / a1, 1 / a2
        swapped = True
    if a2 > 1 + tol:
        return "two-saddle-case-A", swapped, a1, a2
    return "two-saddle-case-B", swapped, a1, a2


def _chart(family, lam, seed, order, sign, interior, radius):
    s = find_saddle(family, lam, seed)
    return build_saddle_chart(family, lam, s, order, sign=sign, interior=interior, radius=radius)


def one_saddle_loop(family: VectorFieldFamily, lam, seed, interior, *, c: float = 0.2,
                    order: int = 12, chart_radius: float | None = None,
                    section_radius: float | None = None) -> Displacement:
    """psi = D - T^{-1} on sigma for a homoclinic loop.

    Time is reversed (sigma and tau exchanged) when alpha(lambda) > 1, so the
    Dulac map always has ratio at most one.
    """
    a = _chart(family, lam, seed, order, 1.0, interior, chart_radius).alpha
    sign = 1.0 if a <= 1.0 else -1.0
    ch = _chart(family, lam, seed, order, sign, interior, chart_radius)
    sigma, tau = chart_sections(ch, family, c, c, radius=section_radius)
    corner = CornerMap(family, tuple(lam), ch, sigma, tau, name="saddle")
    back = RegularMap(family, lam, sigma, tau, sign=-sign)
    return Displacement(corner, back, "one-saddle",
                        meta={"sign": sign, "alpha": ch.alpha, "swapped": sign < 0,
                              "sigma": sigma, "tau": tau, "c": c})


def two_saddle_loop(family: VectorFieldFamily, lam, seeds, interior, sigma: CrossSection,
                    tau: CrossSection, *, c: float = 0.3, order: int = 12,
                    chart_radius: float | None = None, section_radius: float | None = None,
                    lam0=None, order_punctures: bool = True) -> Displacement:
    """psi = D^1 - D^2 : sigma -> tau, D^1 through seeds[0] forward, D^2 through seeds[1] backward."""
    lam0 = np.zeros(family.n_params) if lam0 is None else lam0
    a10 = _chart(family, lam0, seeds[0], order, 1.0, interior, chart_radius).alpha
    a20 = _chart(family, lam0, seeds[1], order, -1.0, interior, chart_radius).alpha
    kind, swapped, _, _ = select_case(a10, a20)
    gsign = -1.0 if swapped else 1.0
    if swapped:
        sigma, tau = tau, sigma
        seeds = (seeds[1], seeds[0])

    def corner(seed, sgn, name):
        ch = _chart(family, lam, seed, order, sgn, interior, chart_radius)
        s_loc, t_loc = chart_sections(ch, family, c, c, radius=section_radius)
        t_in = RegularMap(family, lam, sigma, s_loc, sign=sgn)
        t_out = RegularMap(family, lam, t_loc, tau, sign=sgn)
        return CornerMap(family, tuple(lam), ch, s_loc, t_loc, t_in, t_out, name=name)

    c1 = corner(seeds[0], gsign, "S1")
    c2 = corner(seeds[1], -gsign, "S2")
    meta = {"swapped": swapped, "alpha1_0": a10, "alpha2_0": a20, "sigma": sigma, "tau": tau, "c": c}
    if order_punctures and c1.puncture > c2.puncture and kind.endswith("B") and abs(a10 - 1) < 1e-9 and abs(a20 - 1) < 1e-9:
        # both ratios are 1 at lambda = 0, so relabelling keeps case B and orders the punctures
        c1, c2 = c2, c1
        meta["relabelled"] = True
    return Displacement(c1, c2, kind, meta=meta)


def displacement(geometry, z) -> complex:
    """psi at a LiftedPoint of sigma (argument lifted around 0; lifts around s_i derived)."""
    zc = z.rho * np.exp(1j * z.phi)
    lifts = [z.phi + np.angle((zc - s) / zc) if s != 0 else z.phi for s in geometry.punctures]
    if not lifts:
        lifts = [z.phi]
    return complex(geometry(np.array([zc]), np.array(lifts)[:, None])[0])
