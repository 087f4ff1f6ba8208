"""Real-analytic curves {h^k(z) = conj(z)} through a fixed point of a holonomy, and their intersections."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .family import CrossSection, SaddleChart, VectorFieldFamily
from .transport import HolonomyMap, TransportError

__all__ = [
    "CurveTrace",
    "TraceError",
    "trace_curve",
    "trace_locus",
    "locus_real_intersections",
    "polish_fixed_point",
    "holonomy_equality_points",
    "polyline_intersections",
    "project_to_locus",
]

logger = logging.getLogger(__name__)


class TraceError(RuntimeError):
    pass


@dataclass
class CurveTrace:
    k: int
    points: np.ndarray
    tangent_at_origin: float
    residuals: np.ndarray
    status: str = "ok"
    expected_angle: float = 0.0
    max_condition: float = 0.0
    origin: complex = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def arclength(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(np.abs(np.diff(self.points)))])

    @property
    def reached(self) -> float:
        return float(np.abs(self.points[-1] - self.origin))

    def lifted_angles(self) -> np.ndarray:
        """Continuous argument of (z - origin) along the trace, started at the expected angle."""
        d = self.points[1:] - self.origin
        ang = np.unwrap(np.angle(d))
        ang += 2 * np.pi * np.round((self.expected_angle - ang[0]) / (2 * np.pi))
        return np.concatenate([[self.expected_angle], ang])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "x", "y", "residual"])
            for s, z, r in zip(self.arclength, self.points, self.residuals):
                w.writerow([f"{s:.16e}", f"{z.real:.16e}", f"{z.imag:.16e}", f"{r:.6e}"])


def _eval(h, z, fd):
    """h and h' at the points z (h holomorphic: one real central difference suffices)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    n = z.size
    v = np.asarray(h(np.concatenate([z, z + fd, z - fd])), dtype=complex)
    return v[:n], (v[n:2 * n] - v[2 * n:]) / (2 * fd)


def _real_jac(dh):
    # F(z) = h(z) - conj(z); dF = h' dz - d(conj z): columns d/dx, d/dy
    cx = dh - 1.0
    cy = 1j * (dh + 1.0)
    return np.array([[cx.real, cy.real], [cx.imag, cy.imag]])


def _correct(h, zp, normal, fd, tol, max_iter=8, constraint=None):
    """Gauss-Newton on [Re F, Im F, constraint] = 0; returns (z, residual, cond, ok)."""
    z = complex(zp)
    cond = np.inf
    for it in range(max_iter):
        hv, dh = _eval(h, z, fd)
        F = hv[0] - np.conj(z)
        Jf = _real_jac(dh[0])
        if constraint is None:
            c = ((z - zp) * np.conj(normal)).real
            gc = np.array([normal.real, normal.imag])
        else:
            c, gc = constraint(z)
        A = np.vstack([Jf, gc])
        r = np.array([F.real, F.imag, c])
        sv = np.linalg.svd(A, compute_uv=False)
        cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
        dz, *_ = np.linalg.lstsq(A, -r, rcond=None)
        z = z + dz[0] + 1j * dz[1]
        if abs(dz[0] + 1j * dz[1]) < tol * max(1.0, abs(z)) * 10 and abs(F) < 1e3 * tol:
            hv, _ = _eval(h, z, fd)
            res = abs(hv[0] - np.conj(z))
            return z, res, cond, res < tol * 100
    hv, _ = _eval(h, z, fd)
    res = abs(hv[0] - np.conj(z))
    return z, res, cond, False


def _null_tangent(dh, prev):
    J = _real_jac(dh)
    _, _, vt = np.linalg.svd(J)
    t = vt[-1, 0] + 1j * vt[-1, 1]
    if (t * np.conj(prev)).real < 0:
        t = -t
    return t / abs(t)


def trace_curve(h: Callable, k: int, alpha: float, max_radius: float, *, origin: complex = 0.0,
                step0: float = 1e-4, max_step: float | None = None, tol: float = 1e-11,
                cond_cap: float = 1e8, fd: float = 1e-6, max_points: int = 400) -> CurveTrace:
    """Continue {h(z) = conj(z)} from ``origin`` along the branch leaving at angle k pi / alpha.

    ``h`` is the (already k-fold) map, holomorphic near the curve.
    """
    if k == 0:
        raise ValueError("k must be nonzero")
    theta = k * np.pi / alpha
    t = np.exp(1j * theta)
    max_step = max_step or max_radius / 25
    pts = [complex(origin)]
    res = [0.0]
    status = "ok"
    step = step0
    cmax = 0.0
    z = complex(origin)
    while True:
        if len(pts) >= max_points:
            status = "max-points"
            break
        remaining = max_radius - abs(z - origin)
        final = step >= remaining
        zp = z + min(step, remaining * 1.2) * t
        try:
            if final:
                def circ(w):
                    d = w - origin
                    return abs(d) ** 2 - max_radius ** 2, np.array([2 * d.real, 2 * d.imag])
                zn, r, cond, ok = _correct(h, zp, t, fd, tol, constraint=circ)
            else:
                zn, r, cond, ok = _correct(h, zp, t, fd, tol)
        except TransportError as exc:
            logger.debug("trace k=%d stopped: %s", k, exc)
            if step > step0 * 1e-3 and len(pts) > 1:
                step /= 2
                continue
            status = "left-domain"
            break
        if not ok or cond > cond_cap or abs(zn - z) > 2 * step or ((zn - z) * np.conj(t)).real <= 0:
            step /= 2
            if step < step0 * 1e-4:
                status = "corrector-divergence"
                break
            continue
        cmax = max(cmax, cond)
        _, dh = _eval(h, zn, fd)
        t = _null_tangent(dh[0], (zn - z) / abs(zn - z))
        z = zn
        pts.append(z)
        res.append(r)
        if final or abs(z - origin) >= max_radius * (1 - 1e-12):
            break
        step = min(step * 1.6, max_step)
    pts = np.array(pts)
    first = pts[1] - pts[0] if len(pts) > 1 else t
    return CurveTrace(k, pts, float(np.angle(first)), np.array(res), status, theta, cmax, origin)


def trace_locus(family: VectorFieldFamily, lam, chart: SaddleChart, section: CrossSection, k: int,
                max_radius: float, **kw) -> CurveTrace:
    """Trace the component of {h_sigma^k(z) = conj z} tangent to angle k pi / alpha at 0."""
    if max_radius > section.radius * (1 + 1e-12) and section.radius > 0:
        raise ValueError("max_radius exceeds the section radius")
    h = HolonomyMap(family, lam, chart, section, k)
    kw.setdefault("step0", 1e-4 * section.radius)
    return trace_curve(h, k, chart.alpha, max_radius, **kw)


def project_to_locus(h: Callable, z, normal, fd: float = 1e-6, tol: float = 1e-11):
    """Corrector projection of an approximate point onto {h(z) = conj z} along ``normal``."""
    zn, r, cond, ok = _correct(h, z, normal, fd, tol)
    return zn, r, ok


def polish_fixed_point(h: Callable, x0: float, *, tol: float = 1e-13, max_iter: int = 50,
                       bracket: tuple[float, float] | None = None, fd: float = 1e-7) -> float:
    """Real root of h(x) = x by Newton, with a bisection fallback inside ``bracket``."""
    def g(x):
        return float(np.real(np.ravel(h(np.array([x], dtype=complex)))[0])) - x

    x = float(x0)
    for _ in range(max_iter):
        gx = g(x)
        d = (g(x + fd) - g(x - fd)) / (2 * fd)
        if d == 0 or not np.isfinite(d):
            break
        xn = x - gx / d
        if bracket is not None and not (bracket[0] <= xn <= bracket[1]):
            break
        if abs(xn - x) < tol * max(1.0, abs(x)):
            return xn
        x = xn
    if bracket is None:
        return x
    from scipy.optimize import brentq
    a, b = bracket
    if g(a) * g(b) > 0:
        return x
    return brentq(g, a, b, xtol=tol, rtol=1e-15)


def locus_real_intersections(trace: CurveTrace, segment: tuple[float, float], h: Callable | None = None,
                             *, degenerate_tol: float = 1e-12) -> list[complex]:
    """Crossings of the trace with a real interval, Newton-polished on h(x) = x when h is given."""
    a, b = min(segment), max(segment)
    pts = trace.points
    im = pts.imag
    if np.all(np.abs(im[1:]) < degenerate_tol):
        trace.meta["degenerate_real"] = True
        return []
    out: list[complex] = []
    for j in range(1, len(pts) - 1):
        y0, y1 = im[j], im[j + 1]
        if y0 == 0.0 and a <= pts[j].real <= b:
            xs = pts[j].real
        elif y0 * y1 < 0:
            s = y0 / (y0 - y1)
            xs = pts[j].real + s * (pts[j + 1].real - pts[j].real)
            if not (a <= xs <= b):
                continue
        else:
            continue
        if h is not None:
            lo = min(pts[j].real, pts[j + 1].real)
            hi = max(pts[j].real, pts[j + 1].real)
            xs = polish_fixed_point(h, xs, bracket=(min(lo, xs), max(hi, xs)))
        out.append(complex(xs, 0.0))
    return out


def polyline_intersections(p: np.ndarray, q: np.ndarray, skip_origin: float = 0.0) -> list[complex]:
    """Pairwise segment intersections of two polylines (complex arrays)."""
    out = []
    for i in range(len(p) - 1):
        a, b = p[i], p[i + 1]
        for j in range(len(q) - 1):
            c, d = q[j], q[j + 1]
            r, s = b - a, d - c
            den = (r.conjugate() * s).imag
            if den == 0:
                continue
            t = ((c - a).conjugate() * s).imag / den
            u = ((c - a).conjugate() * r).imag / den
            if 0 <= t <= 1 and 0 <= u <= 1:
                z = a + t * r
                if skip_origin <= 0 or abs(z) > skip_origin:
                    out.append(z)
    return out


def holonomy_equality_points(h1: Callable, h2: Callable, seeds, R: float, *, tol: float = 1e-12,
                             dedup: float = 1e-8, fd: float = 1e-6, max_iter: int = 30) -> tuple[list, dict]:
    """Solutions of h2(z) = h1(z) in |z| < R by complex Newton from ``seeds``."""
    sols: list[complex] = []
    dropped = 0
    for z0 in np.ravel(np.asarray(seeds, dtype=complex)):
        z = complex(z0)
        ok = False
        try:
            for _ in range(max_iter):
                v1, d1 = _eval(h1, z, fd)
                v2, d2 = _eval(h2, z, fd)
                G, dG = v2[0] - v1[0], d2[0] - d1[0]
                if dG == 0:
                    break
                dz = G / dG
                z -= dz
                if abs(z) > 2 * R:
                    break
                if abs(dz) < tol * max(1.0, abs(z)) or abs(G) < tol * 1e-3:
                    ok = abs(z) < R
                    break
        except TransportError:
            ok = False
        if not ok:
            dropped += 1
            continue
        if all(abs(z - s) > dedup for s in sols):
            sols.append(z)
    return sols, {"dropped_seeds": dropped, "n_seeds": int(np.size(seeds))}
