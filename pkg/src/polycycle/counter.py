"""Counting domains on the cover of the punctured section and the argument principle on them."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .locus import CurveTrace
from .transport import TransportError

__all__ = [
    "ArcSegment",
    "LineSegment",
    "PolylineSegment",
    "CountingDomain",
    "DomainError",
    "WindingConfig",
    "WindingReport",
    "build_domain",
    "build_domain_from_traces",
    "winding",
    "argument_variation",
]

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi


class DomainError(RuntimeError):
    pass


@dataclass
class ArcSegment:
    """center + r e^{i theta}, theta from th0 to th1 (lifted, any sign of th1 - th0)."""

    center: complex
    r: float
    th0: float
    th1: float
    tag: str = "circle-arc"
    label: str = ""

    def z(self, t):
        t = np.asarray(t, dtype=float)
        return self.center + self.r * np.exp(1j * (self.th0 + t * (self.th1 - self.th0)))

    def initial_t(self, per_radian: float = 5.0) -> np.ndarray:
        n = max(4, int(np.ceil(abs(self.th1 - self.th0) * per_radian)))
        return np.linspace(0.0, 1.0, n + 1)


@dataclass
class LineSegment:
    z0: complex
    z1: complex
    tag: str = "real-interval"
    label: str = ""

    def z(self, t):
        t = np.asarray(t, dtype=float)
        return self.z0 + t * (self.z1 - self.z0)

    def initial_t(self, n: int = 8) -> np.ndarray:
        return np.linspace(0.0, 1.0, n + 1)


@dataclass
class PolylineSegment:
    """Piecewise-linear curve through ``points``; log-polar interpolation about ``center`` if given."""

    points: np.ndarray
    center: complex | None = None
    tag: str = "locus"
    label: str = ""

    def __post_init__(self):
        p = np.asarray(self.points, dtype=complex)
        self.points = p
        if self.center is not None:
            w = np.log(np.abs(p - self.center)) + 1j * np.unwrap(np.angle(p - self.center))
            self._w = w
        else:
            self._w = p
        d = np.abs(np.diff(self._w))
        s = np.concatenate([[0.0], np.cumsum(d)])
        self._s = s / s[-1] if s[-1] > 0 else np.linspace(0, 1, len(p))

    def _interp(self, t):
        t = np.asarray(t, dtype=float)
        re = np.interp(t, self._s, self._w.real)
        im = np.interp(t, self._s, self._w.imag)
        return re + 1j * im

    def z(self, t):
        w = self._interp(t)
        if self.center is None:
            return w
        out = self.center + np.exp(w)
        # keep the vertices exact
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self._s, t)
        hit = (idx < len(self._s)) & (np.abs(self._s[np.minimum(idx, len(self._s) - 1)] - t) == 0)
        out = np.where(hit, self.points[np.minimum(idx, len(self._s) - 1)], out)
        return out

    def initial_t(self) -> np.ndarray:
        return self._s.copy()


@dataclass
class CountingDomain:
    kind: str
    R: float
    segments: list
    punctures: list
    anchor: tuple = (0, 0.5)
    excision: float = 0.0
    traces: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def closure_gap(self) -> float:
        gaps = [abs(self.segments[i].z(1.0) - self.segments[(i + 1) % len(self.segments)].z(0.0))
                for i in range(len(self.segments))]
        return float(max(gaps))

    def polyline(self, per: int = 64) -> np.ndarray:
        return np.concatenate([s.z(np.linspace(0, 1, per)) for s in self.segments])

    def signed_area(self) -> float:
        z = self.polyline()
        return 0.5 * float(np.sum((np.conj(z) * np.roll(z, -1)).imag))


def _clip_trace(tr: CurveTrace, R: float, eps: float) -> np.ndarray:
    """Trace points from the excision circle around its origin out to |z| = R."""
    p = np.asarray(tr.points, dtype=complex)
    s = complex(tr.origin)
    out = np.abs(p) >= R
    if not np.any(out):
        raise DomainError(f"trace k={tr.k} reaches only |z| = {np.max(np.abs(p)):.3g} < R = {R:.3g}"
                          f" (status {tr.status}); shrink R or lambda")
    j = int(np.argmax(out))
    a, b = p[j - 1], p[j]
    lo, hi = 0.0, 1.0
    for _ in range(60):
        m = 0.5 * (lo + hi)
        if abs(a + m * (b - a)) < R:
            lo = m
        else:
            hi = m
    end = a + lo * (b - a)
    end = end * R / abs(end)
    first = s + eps * (p[1] - s) / abs(p[1] - s)
    body = p[1:j]
    body = body[np.abs(body - s) > eps]
    return np.concatenate([[first], body, [end]])


def _lifted_end_angle(pts: np.ndarray, center: complex, start_angle: float) -> float:
    a = np.unwrap(np.angle(pts - center))
    a += TWO_PI * np.round((start_angle - a[0]) / TWO_PI)
    return float(a[-1])


def build_domain_from_traces(kind: str, R: float, punctures, trace_plus: CurveTrace,
                             trace_minus: CurveTrace, *, excision: float | None = None,
                             extra: dict | None = None) -> CountingDomain:
    """Domain bounded by S_R and the two loci of the first puncture (slit to the second if any).

    Boundary (counter-clockwise): locus k=-1 outward, arc of S_R, locus k=+1
    inward, then clockwise excision arcs around the punctures joined by the two
    sides of the real slit [s1, s2].
    """
    eps = excision if excision is not None else 1e-6 * R
    s1 = float(np.real(punctures[0]))
    pm = _clip_trace(trace_minus, R, eps)
    pp = _clip_trace(trace_plus, R, eps)
    # lifted angles about s1 at both ends of each locus
    bm0 = float(trace_minus.expected_angle)
    bp0 = float(trace_plus.expected_angle)
    bm0 = _lifted_end_angle(np.concatenate([[s1 + np.exp(1j * bm0)], pm[:1]]), s1, bm0)
    bp0 = _lifted_end_angle(np.concatenate([[s1 + np.exp(1j * bp0)], pp[:1]]), s1, bp0)
    bm1 = _lifted_end_angle(pm, s1, bm0)
    bp1 = _lifted_end_angle(pp, s1, bp0)
    if not bp1 > bm1:
        raise DomainError("loci do not bound a sector on the cover")
    # the arc is centred at 0; its lifted angles follow those about s1 (|s1| << R)
    th0 = float(np.angle(pm[-1]) + TWO_PI * np.round((bm1 - np.angle(pm[-1])) / TWO_PI))
    th1 = float(np.angle(pp[-1]) + TWO_PI * np.round((bp1 - np.angle(pp[-1])) / TWO_PI))
    if not th0 < 0 < th1:
        raise DomainError("arc of S_R does not cross the positive real axis")
    segs = [
        PolylineSegment(pm, s1, "locus", "H1_-1"),
        ArcSegment(0.0, R, th0, th1, "circle-arc", "S_R"),
        PolylineSegment(pp[::-1], s1, "locus", "H1_+1"),
    ]
    anchor = (1, -th0 / (th1 - th0))
    meta = dict(extra or {})
    slit = len(punctures) > 1 and float(np.real(punctures[1])) - s1 > 10 * eps
    if len(punctures) > 1 and float(np.real(punctures[1])) < s1 - 10 * eps:
        meta["second_puncture_outside"] = True
    if slit:
        s2 = float(np.real(punctures[1]))
        segs += [
            ArcSegment(s1, eps, bp0, 0.0, "excision", "s1+"),
            LineSegment(s1 + eps, s2 - eps, "real-interval", "[s1,s2]+"),
            ArcSegment(s2, eps, np.pi, -np.pi, "excision", "s2"),
            LineSegment(s2 - eps, s1 + eps, "real-interval", "[s1,s2]-"),
            ArcSegment(s1, eps, 0.0, bm0, "excision", "s1-"),
        ]
    else:
        segs.append(ArcSegment(s1, eps, bp0, bm0, "excision", "s1"))
    dom = CountingDomain(kind, R, segs, [float(np.real(s)) for s in punctures], anchor, eps,
                         {"+1": trace_plus, "-1": trace_minus}, meta)
    if dom.closure_gap() > 1e-9 * max(1.0, R):
        raise DomainError(f"boundary not closed (gap {dom.closure_gap():.2e})")
    return dom


def _case_a_domain(R, punctures, traces, eps, n_arc: int = 720) -> CountingDomain:
    """Intersection of the two planar sectors bounded by H^i_{+-1} and S_R (ratios >= 1)."""
    from shapely.geometry import Point, Polygon
    from shapely.geometry.polygon import orient

    polys = []
    for i, s in enumerate(punctures):
        pm = _clip_trace(traces[(i, -1)], R, eps)
        pp = _clip_trace(traces[(i, 1)], R, eps)
        th0 = float(np.angle(pm[-1]))
        th1 = float(np.angle(pp[-1]))
        if th1 <= th0:
            th1 += TWO_PI
        if th1 - th0 > TWO_PI or not th0 < 0 < th1:
            raise DomainError("case A sector is not planar (ratio below one); not supported")
        th = np.linspace(th0, th1, n_arc)
        th = np.union1d(th, [0.0])
        ring = np.concatenate([[s], pm, R * np.exp(1j * th), pp[::-1]])
        polys.append(Polygon(np.column_stack([ring.real, ring.imag])).buffer(0))
    dom = polys[0].intersection(polys[1])
    for s in punctures:
        dom = dom.difference(Point(float(np.real(s)), 0.0).buffer(eps, 64))
    if dom.geom_type != "Polygon" or len(dom.interiors) > 0:
        raise DomainError("case A intersection is not a simply connected polygon")
    dom = orient(dom, 1.0)
    xy = np.asarray(dom.exterior.coords)[:-1]
    z = xy[:, 0] + 1j * xy[:, 1]
    # start the ring at the point of S_R on the positive real axis
    j0 = int(np.argmin(np.abs(z - R)))
    z = np.roll(z, -j0)
    tags = []
    for a, b in zip(z, np.roll(z, -1)):
        m = 0.5 * (a + b)
        if abs(abs(m) - R) < 1e-6 * R:
            tags.append("circle-arc")
        elif min(abs(m - s) for s in punctures) < 1.5 * eps:
            tags.append("excision")
        else:
            tags.append("locus")
    segs = []
    start = 0
    for j in range(1, len(z) + 1):
        if j == len(z) or tags[j] != tags[start]:
            pts = np.concatenate([z[start:j], [z[j % len(z)]]])
            segs.append(PolylineSegment(pts, None, tags[start], tags[start]))
            start = j
    return CountingDomain("two-saddle-case-A", R, segs, [float(np.real(s)) for s in punctures],
                          (0, 0.0), eps, dict(traces))


def build_domain(psi, R: float, *, traces: dict | None = None, excision: float | None = None,
                 trace_kw: dict | None = None) -> CountingDomain:
    """Counting domain for a Displacement (loci traced on demand) or for supplied traces.

    ``traces`` maps (corner index, k) to CurveTrace.
    """
    traces = dict(traces or {})
    corners = getattr(psi, "corners", [])
    eps = excision if excision is not None else 1e-6 * R
    need = [(0, 1), (0, -1)]
    if psi.kind.endswith("case-A"):
        need += [(1, 1), (1, -1)]
    for key in need:
        if key not in traces:
            if not corners:
                raise DomainError(f"trace {key} missing")
            traces[key] = corners[key[0]].trace(key[1], R, **(trace_kw or {}))
    if psi.kind.endswith("case-A"):
        return _case_a_domain(R, psi.punctures, traces, eps)
    punct = psi.punctures if psi.punctures else [0.0]
    if psi.kind == "one-saddle":
        punct = punct[:1]
    dom = build_domain_from_traces(psi.kind, R, punct, traces[(0, 1)], traces[(0, -1)], excision=eps)
    dom.traces = traces
    return dom


@dataclass
class WindingConfig:
    max_increment: float = np.pi / 2
    max_lift_increment: float = np.pi / 4
    max_rounds: int = 16
    max_samples: int = 6000
    guard_rel: float = 1e-3
    guard_abs: float = 1e-9
    perturb: float | None = None


@dataclass
class WindingReport:
    kind: str
    R: float
    segments: list
    total_variation: float
    count_bound: int
    boundary_zero_flags: list
    limits_at_punctures: list
    max_increment: float
    half_density_variation: float
    integrality_defect: float
    perturbed: bool = False
    perturb_shift: float = 0.0
    status: str = "ok"
    notes: list = field(default_factory=list)
    boundary: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("boundary")
        d["limits_at_punctures"] = [[float(np.real(c)), float(np.imag(c))] for c in self.limits_at_punctures]
        return d


class _Sampler:
    """Boundary samples with cached function values, refined adaptively."""

    def __init__(self, f, domain: CountingDomain, punctures):
        self.f = f
        self.dom = domain
        self.punct = list(punctures)
        self.t = []
        for i, seg in enumerate(domain.segments):
            t = seg.initial_t()
            if i == domain.anchor[0]:
                t = np.union1d(t, [domain.anchor[1]])
            self.t.append(np.asarray(t, dtype=float))
        self.v = [np.full(len(t), np.nan + 0j) for t in self.t]

    def assemble(self):
        z = np.concatenate([seg.z(t) for seg, t in zip(self.dom.segments, self.t)])
        seg_id = np.concatenate([np.full(len(t), i) for i, t in enumerate(self.t)])
        offs = np.concatenate([[0], np.cumsum([len(t) for t in self.t])])
        ai, at = self.dom.anchor
        ja = offs[ai] + int(np.argmin(np.abs(self.t[ai] - at)))
        lifts = []
        for s in (self.punct or [0.0]):
            a = np.unwrap(np.angle(z - s))
            lifts.append(a - a[ja])
        return z, np.array(lifts), seg_id, offs

    def evaluate(self):
        z, lifts, seg_id, offs = self.assemble()
        v = np.concatenate(self.v)
        todo = np.isnan(v)
        if np.any(todo):
            v[todo] = self.f(z[todo], lifts[:, todo])
            for i in range(len(self.t)):
                self.v[i] = v[offs[i]:offs[i + 1]]
        return z, lifts, v, seg_id, offs

    def refine(self, bad_pairs, offs):
        new = [[] for _ in self.t]
        for j in bad_pairs:
            i = int(np.searchsorted(offs, j, side="right") - 1)
            k = j - offs[i]
            if k + 1 < len(self.t[i]):
                new[i].append(0.5 * (self.t[i][k] + self.t[i][k + 1]))
        added = 0
        for i, tn in enumerate(new):
            if not tn:
                continue
            t = np.concatenate([self.t[i], tn])
            v = np.concatenate([self.v[i], np.full(len(tn), np.nan + 0j)])
            order = np.argsort(t, kind="stable")
            self.t[i], self.v[i] = t[order], v[order]
            added += len(tn)
        return added


def _increments(v):
    return np.angle(np.roll(v, -1) * np.conj(v))


def argument_variation(f, domain: CountingDomain, cfg: WindingConfig | None = None):
    """Adaptive argument variation of f(z, lifts) along the closed boundary of ``domain``.

    Returns (sampler, z, lifts, values, increments, seg_id, offs).
    """
    cfg = cfg or WindingConfig()
    smp = _Sampler(f, domain, domain.punctures)
    for _ in range(cfg.max_rounds):
        z, lifts, v, seg_id, offs = smp.evaluate()
        inc = _increments(v)
        dl = np.abs(np.diff(lifts, axis=1)).max(axis=0) if lifts.size else np.zeros(len(z) - 1)
        bad = np.nonzero((np.abs(inc[:-1]) > cfg.max_increment) | (dl > cfg.max_lift_increment))[0]
        # a pair straddling two segments has coincident ends and needs no refinement
        bad = bad[seg_id[bad] == seg_id[bad + 1]]
        if bad.size == 0 or len(z) > cfg.max_samples:
            break
        smp.refine(bad, offs)
    z, lifts, v, seg_id, offs = smp.evaluate()
    return smp, z, lifts, v, _increments(v), seg_id, offs


def _half_density_variation(v, seg_id):
    keep = np.zeros(len(v), bool)
    for i in np.unique(seg_id):
        idx = np.nonzero(seg_id == i)[0]
        keep[idx[::2]] = True
        keep[idx[-1]] = True
    return float(np.sum(_increments(v[keep])))


def _report(psi, domain, z, lifts, v, inc, seg_id, offs, cfg, limits, perturbed, shift):
    segments = []
    flags = []
    for i, seg in enumerate(domain.segments):
        idx = np.arange(offs[i], offs[i + 1])
        # the pair joining the previous segment is counted here
        var = float(np.sum(inc[idx[:-1]])) + (float(inc[offs[i] - 1]) if i > 0 else float(inc[-1]))
        a = np.abs(v[idx])
        med = float(np.median(a))
        guard = max(cfg.guard_rel * med, cfg.guard_abs)
        low = idx[a < guard]
        seg_flags = [{"z": [float(z[j].real), float(z[j].imag)], "abs_psi": float(abs(v[j]))} for j in low]
        entry = {"tag": seg.tag, "label": seg.label, "var_arg": var, "samples": int(len(idx)),
                 "max_increment": float(np.max(np.abs(inc[idx[:-1]]))) if len(idx) > 1 else 0.0,
                 "flags": seg_flags}
        if seg.tag == "locus":
            im = v[idx].imag
            entry["im_sign_changes"] = int(np.sum(np.diff(np.sign(im[np.abs(im) > guard])) != 0))
        segments.append(entry)
        flags += [dict(f, segment=seg.label) for f in seg_flags]
    scale = float(np.median(np.abs(v)))
    for s, c in zip(domain.punctures, limits):
        if abs(c) < max(cfg.guard_rel * scale, cfg.guard_abs):
            flags.append({"z": [float(s), 0.0], "abs_psi": float(abs(c)), "segment": "puncture limit"})
    total = float(np.sum(inc))
    k = total / TWO_PI
    return WindingReport(
        kind=domain.kind, R=domain.R, segments=segments, total_variation=total,
        count_bound=max(0, int(round(k))), boundary_zero_flags=flags,
        limits_at_punctures=list(limits), max_increment=float(np.max(np.abs(inc))),
        half_density_variation=_half_density_variation(v, seg_id),
        integrality_defect=float(abs(k - round(k))), perturbed=perturbed, perturb_shift=shift,
        status="flagged" if flags else "ok",
        boundary={"z": z, "psi": v, "segment": seg_id,
                  "labels": [s.label or s.tag for s in domain.segments]})


def winding(psi, domain: CountingDomain, cfg: WindingConfig | None = None) -> WindingReport:
    """Argument principle on ``domain``: variation of arg psi and the zero-count bound.

    If the regular-zero guard trips and ``cfg.perturb`` is set, psi is replaced
    by psi + perturb (cached samples are shifted, not recomputed) and the count
    is redone; persistent flags are reported in the status.
    """
    cfg = cfg or WindingConfig()
    psi.shift = 0.0
    smp, z, lifts, v, inc, seg_id, offs = argument_variation(psi, domain, cfg)
    try:
        limits = psi.limits()
    except TransportError as exc:
        logger.warning("puncture limits unavailable: %s", exc)
        limits = [np.nan] * len(domain.punctures)
    rep = _report(psi, domain, z, lifts, v, inc, seg_id, offs, cfg, limits, False, 0.0)
    if rep.status == "ok" or cfg.perturb is None:
        if rep.status != "ok":
            rep.notes.append("regular-zero guard tripped; rerun with a perturbation shift (--perturb)")
        return rep
    first_flags = len(rep.boundary_zero_flags)
    shift = float(cfg.perturb)
    psi.shift = shift
    smp.v = [vv + shift for vv in smp.v]
    smp.f = psi
    cfg2 = WindingConfig(**{**asdict(cfg), "perturb": None})
    for _ in range(cfg2.max_rounds):
        z, lifts, v, seg_id, offs = smp.evaluate()
        inc = _increments(v)
        dl = np.abs(np.diff(lifts, axis=1)).max(axis=0)
        bad = np.nonzero((np.abs(inc[:-1]) > cfg2.max_increment) | (dl > cfg2.max_lift_increment))[0]
        bad = bad[seg_id[bad] == seg_id[bad + 1]]
        if bad.size == 0 or len(z) > cfg2.max_samples:
            break
        smp.refine(bad, offs)
    z, lifts, v, seg_id, offs = smp.evaluate()
    inc = _increments(v)
    limits = [c + shift for c in limits]
    rep = _report(psi, domain, z, lifts, v, inc, seg_id, offs, cfg2, limits, True, shift)
    rep.notes.append(f"regular-zero guard tripped at {first_flags} points; retried with psi + {shift:g}")
    if rep.status != "ok":
        rep.status = "flagged-after-retry"
    psi.shift = 0.0
    return rep
