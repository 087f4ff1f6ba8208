"""Abelian integrals over ovals of a polynomial Hamiltonian and the checks built on them.

Conventions: the saddle value of H, when there is a saddle, is 0; the real
ovals fill the interval between the centre value and 0.  Ovals are oriented
counter-clockwise, so that the integral of x dy is the enclosed area.  The
perturbed field is X = kappa (H_y + l1 B, -(H_x + l1 A)), with kappa = +1 when
the centre is a minimum of H and -1 for a maximum; with these choices the
return-map displacement of H satisfies psi(h) = l1 I(h) + O(l1^2).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .family import VectorFieldFamily

__all__ = [
    "HamiltonianSetup",
    "HamiltonianError",
    "OvalCycle",
    "trace_oval",
    "abelian_integral",
    "continued_integral",
    "vanishing_cycle_integral",
    "picard_lefschetz_imaginary",
    "PicardLefschetzResult",
    "poincare_pontryagin_check",
]

logger = logging.getLogger(__name__)

X, Y = sp.symbols("x y")


class HamiltonianError(RuntimeError):
    pass


@dataclass
class HamiltonianSetup:
    """H(x, y) with a centre and a saddle on its boundary, and a one-form A dx + B dy."""

    H: str
    A: str
    B: str
    param_names: Sequence[str] = ()
    center: tuple | None = (0.0, 0.0)
    saddle: tuple | None = None
    name: str = "hamiltonian"

    def __post_init__(self):
        self._params = sp.symbols(list(self.param_names)) if self.param_names else []
        if not isinstance(self._params, (list, tuple)):
            self._params = [self._params]
        loc = {str(s): s for s in [X, Y, *self._params]}
        self._H = sp.sympify(self.H, locals=loc)
        self._A = sp.sympify(self.A, locals=loc)
        self._B = sp.sympify(self.B, locals=loc)
        Hx, Hy = sp.diff(self._H, X), sp.diff(self._H, Y)
        self._Hx, self._Hy = Hx, Hy
        args = (X, Y)
        self.Hf = sp.lambdify(args, self._H, "numpy")
        self.grad = sp.lambdify(args, [Hx, Hy], "numpy")
        self.hess = sp.lambdify(args, [[sp.diff(Hx, X), sp.diff(Hx, Y)], [sp.diff(Hy, X), sp.diff(Hy, Y)]],
                                "numpy")
        pargs = (X, Y, *self._params)
        self._omega = sp.lambdify(pargs, [self._A, self._B], "numpy")
        h_saddle = None
        if self.saddle is not None:
            h_saddle = float(self.Hf(*self.saddle))
            if abs(h_saddle) > 1e-12:
                raise HamiltonianError(f"H at the saddle is {h_saddle:g}, expected 0")
            if np.max(np.abs(self.grad(*self.saddle))) > 1e-10:
                raise HamiltonianError("dH does not vanish at the saddle")
        self.kappa = 0.0
        self.h_center = np.nan
        self.h_range = (np.nan, np.nan)
        if self.center is None:
            # local models (e.g. a bare Morse saddle) carry no period annulus
            return
        ev = np.linalg.eigvalsh(np.array(self.hess(*self.center), dtype=float))
        if np.all(ev > 0):
            self.kappa = 1.0
        elif np.all(ev < 0):
            self.kappa = -1.0
        else:
            raise HamiltonianError("the centre is not a non-degenerate extremum of H")
        self.h_center = float(self.Hf(*self.center))
        # real ovals fill the interval between the centre value and the saddle value
        if self.kappa > 0:
            self.h_range = (self.h_center, 0.0 if h_saddle is not None else np.inf)
        else:
            self.h_range = (0.0 if h_saddle is not None else -np.inf, self.h_center)
        if self.h_range[0] >= self.h_range[1]:
            raise HamiltonianError("the centre value lies on the wrong side of the saddle value")

    def on_oval_side(self, h: float) -> bool:
        return bool(self.h_range[0] < h < self.h_range[1])

    def omega(self, x, y, lam=()):
        lam = list(lam)[: len(self._params)] + [0.0] * max(0, len(self._params) - len(list(lam)))
        A, B = self._omega(x, y, *lam)
        return A + 0 * x, B + 0 * x

    def perturbed_family(self) -> VectorFieldFamily:
        """X = kappa (H_y + l1 B, -(H_x + l1 A)) with l1 the first parameter."""
        if self.center is None:
            raise HamiltonianError("no period annulus without a centre")
        if not self._params:
            raise HamiltonianError("the one-form needs at least the multiplier parameter")
        l1 = self._params[0]
        P = self.kappa * (self._Hy + l1 * self._B)
        Q = -self.kappa * (self._Hx + l1 * self._A)
        return VectorFieldFamily(sp.expand(P), sp.expand(Q), tuple(str(p) for p in self._params), name=self.name)


@dataclass
class OvalCycle:
    """Closed curve p(theta), theta uniform on [0, 2 pi), with its derivative."""

    x: np.ndarray
    y: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    h: complex

    def integrate(self, setup: HamiltonianSetup, lam=()) -> complex:
        A, B = setup.omega(self.x, self.y, lam)
        return complex(np.mean(A * self.dx + B * self.dy) * 2 * np.pi)


def _ray_radius(setup: HamiltonianSetup, h: float, theta: float, r_max: float) -> float:
    cx, cy = setup.center
    c, s = np.cos(theta), np.sin(theta)

    def g(r):
        return float(setup.Hf(cx + r * c, cy + r * s)) - h
    # first crossing of the level going out from the centre
    rs = np.linspace(0, r_max, 400)
    vals = np.array([g(r) for r in rs])
    idx = np.nonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))[0]
    if idx.size == 0:
        raise HamiltonianError(f"level {h:g} not reached along direction {theta:.3f}")
    j = idx[0]
    return brentq(g, rs[j], rs[j + 1], xtol=1e-15, rtol=1e-15)


def trace_oval(setup: HamiltonianSetup, h: float, *, ds: float | None = None, r_max: float = 10.0,
               max_steps: int = 200000) -> np.ndarray:
    """Predictor-corrector trace of the real oval {H = h} around the centre (counter-clockwise)."""
    if not setup.on_oval_side(h):
        raise HamiltonianError(f"h = {h:g} outside the oval range {setup.h_range}")
    cx, cy = setup.center
    r0 = _ray_radius(setup, h, 0.0, r_max)
    p = np.array([cx + r0, cy])
    ds = ds or r0 / 50
    pts = [p.copy()]
    turned = 0.0
    ang_prev = 0.0
    for _ in range(max_steps):
        gx, gy = setup.grad(*p)
        t = np.array([-gy, gx]) * setup.kappa
        t /= np.hypot(*t)
        q = p + ds * t
        for _ in range(20):
            gx, gy = setup.grad(*q)
            dh = float(setup.Hf(*q)) - h
            g2 = gx * gx + gy * gy
            q = q - dh * np.array([gx, gy]) / g2
            if abs(dh) < 1e-14:
                break
        ang = np.arctan2(q[1] - cy, q[0] - cx)
        d = (ang - ang_prev + np.pi) % (2 * np.pi) - np.pi
        turned += d
        ang_prev = ang
        if turned >= 2 * np.pi:
            break
        pts.append(q.copy())
        p = q
    else:
        raise HamiltonianError("oval did not close")
    return np.array(pts)


def _polar_cycle(setup: HamiltonianSetup, h: float, n: int, r_max: float = 10.0) -> OvalCycle:
    """Oval as r(theta) about the centre, each node solved by Newton on the ray."""
    cx, cy = setup.center
    th = 2 * np.pi * np.arange(n) / n
    c, s = np.cos(th), np.sin(th)
    pts = trace_oval(setup, h, r_max=r_max)
    ang = np.unwrap(np.arctan2(pts[:, 1] - cy, pts[:, 0] - cx))
    if np.any(np.diff(ang) <= 0):
        raise HamiltonianError("oval is not star-shaped about the centre")
    rad = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
    r = np.interp(th, ang - ang[0], rad, period=2 * np.pi)
    for _ in range(60):
        x, y = cx + r * c, cy + r * s
        gx, gy = setup.grad(x, y)
        Hr = gx * c + gy * s
        dr = (setup.Hf(x, y) - h) / Hr
        r = r - dr
        if np.max(np.abs(dr)) < 1e-15 * np.max(r):
            break
    x, y = cx + r * c, cy + r * s
    gx, gy = setup.grad(x, y)
    Hr = gx * c + gy * s
    Hth = r * (-gx * s + gy * c)
    drdth = -Hth / Hr
    dx = drdth * c - r * s
    dy = drdth * s + r * c
    return OvalCycle(x, y, dx, dy, h)


def abelian_integral(setup: HamiltonianSetup, lam, h, *, n: int = 256, tol: float = 1e-12,
                     max_n: int = 1 << 15, branch: str = "+") -> complex:
    """I(h) = integral of omega over the oval of {H = h} (counter-clockwise).

    Real h on the oval side uses the real oval with mesh doubling until two
    successive values agree to ``tol``; other h are reached by continuation
    (``branch`` selects the upper or lower half-plane for real h past the
    saddle value).
    """
    if np.imag(h) != 0 or not setup.on_oval_side(float(np.real(h))):
        return continued_integral(setup, lam, complex(h), branch=branch)
    h = float(np.real(h))
    prev = None
    while n <= max_n:
        val = _polar_cycle(setup, h, n).integrate(setup, lam)
        if prev is not None and abs(val - prev) < tol * max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    raise HamiltonianError(f"quadrature did not converge at h = {h:g}")


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _project(setup: HamiltonianSetup, x, y, h, max_iter: int = 30):
    """Newton along grad H / (grad H . grad H) onto {H = h} (complex points)."""
    for _ in range(max_iter):
        gx, gy = setup.grad(x, y)
        g2 = gx * gx + gy * gy
        d = setup.Hf(x, y) - h
        x, y = x - d * gx / g2, y - d * gy / g2
        if np.max(np.abs(d)) < 1e-15:
            break
    return x, y


def _chord_points(setup: HamiltonianSetup, p, q, h, fractions):
    """Points of the local branch of {H = h} over the chord p -> q.

    The better-conditioned coordinate (x when |H_y| >= |H_x| at p) is
    interpolated linearly and the other one solved by Newton, continuing from
    the previous point so the branch through p is followed.
    """
    gx, gy = setup.grad(p[0], p[1])
    use_x = abs(gy) >= abs(gx)
    i, j = (0, 1) if use_x else (1, 0)
    cur = np.array(p, dtype=complex)
    out = np.empty((len(fractions), 2), dtype=complex)
    for m, t in enumerate(fractions):
        v = np.empty(2, dtype=complex)
        v[i] = p[i] + t * (q[i] - p[i])
        v[j] = cur[j]
        for _ in range(30):
            g = setup.grad(v[0], v[1])
            step = (setup.Hf(v[0], v[1]) - h) / g[j]
            v[j] -= step
            if abs(step) < 1e-16 * max(1.0, abs(v[j])):
                break
        out[m] = cur = v
    return out, use_x


def _segment_integral(setup: HamiltonianSetup, lam, p, q, h) -> complex:
    s = (_GL_X + 1) / 2
    pts, use_x = _chord_points(setup, p, q, h, np.concatenate([s, [1.0]]))
    if np.max(np.abs(pts[-1] - q)) > 1e-9 * max(1.0, np.max(np.abs(q))):
        raise HamiltonianError("local branch does not reach the next node; refine the cycle")
    x, y = pts[:-1, 0], pts[:-1, 1]
    gx, gy = setup.grad(x, y)
    A, B = setup.omega(x, y, lam)
    if use_x:
        f = (A - B * gx / gy) * (q[0] - p[0])
    else:
        f = (B - A * gy / gx) * (q[1] - p[1])
    return complex(np.sum(_GL_W / 2 * f))


def _refine(setup: HamiltonianSetup, P: np.ndarray, h, max_seg: float) -> np.ndarray:
    """Insert curve points on every chord longer than ``max_seg``."""
    n = len(P)
    out = []
    for j in range(n):
        p, q = P[j], P[(j + 1) % n]
        out.append(p)
        k = int(np.ceil(np.sqrt(np.sum(np.abs(q - p) ** 2)) / max_seg))
        if k > 1:
            pts, _ = _chord_points(setup, p, q, h, np.arange(1, k) / k)
            out.extend(pts)
    return np.array(out)


def continued_integral(setup: HamiltonianSetup, lam, h: complex, *, branch: str = "+",
                       n: int = 256, steps: int = 200, max_seg: float | None = None) -> complex:
    """Analytic continuation of I along the circle |h'| = |h| from the real oval to h.

    The path starts at the real value h0 = +-|h| on the oval side; for h real
    on the far side of the saddle value it runs through the upper half-plane
    when ``branch`` is '+' and the lower one for '-'.  The cycle is a closed
    polyline of points of the complex level curve, moved by a midpoint step of
    dp/dh = grad H / (grad H . grad H), projected back onto the level and
    refined wherever neighbours separate; the integral is the sum of local
    Gauss-Legendre integrals along the curve between consecutive nodes.
    """
    if setup.saddle is None:
        raise HamiltonianError("continuation needs a saddle value to turn around")
    side = 1.0 if setup.h_range[0] >= 0 else -1.0
    r = abs(h)
    if r == 0 or r >= abs(setup.h_center):
        raise HamiltonianError(f"|h| = {r:g} must lie in (0, {abs(setup.h_center):g})")
    h0 = side * r
    target = float(np.angle(h / h0))
    if np.imag(h) == 0 and np.real(h) * side < 0:
        up = 1.0 if branch == "+" else -1.0
        target = np.pi * up * side
    max_seg = max_seg or 0.2 * np.sqrt(r)
    cyc = _polar_cycle(setup, h0, n)
    P = _refine(setup, np.column_stack([cyc.x, cyc.y]).astype(complex), h0, max_seg)
    ss = np.linspace(0.0, target, steps + 1)
    for k in range(steps):
        ha, hb = h0 * np.exp(1j * ss[k]), h0 * np.exp(1j * ss[k + 1])
        x, y = P[:, 0], P[:, 1]
        gx, gy = setup.grad(x, y)
        g2 = gx * gx + gy * gy
        xm, ym = x + gx / g2 * (hb - ha) / 2, y + gy / g2 * (hb - ha) / 2
        gx, gy = setup.grad(xm, ym)
        g2 = gx * gx + gy * gy
        x, y = _project(setup, x + gx / g2 * (hb - ha), y + gy / g2 * (hb - ha), hb)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise HamiltonianError("cycle continuation left the regular part of the level curve")
        P = _refine(setup, np.column_stack([x, y]), hb, max_seg)
    hf = h0 * np.exp(1j * target)
    m = len(P)
    return sum(_segment_integral(setup, lam, P[j], P[(j + 1) % m], hf) for j in range(m))


def _morse_frame(setup: HamiltonianSetup):
    """Isotropic directions e1, e2 of the Hessian at the saddle with e1^T M e2 = 1."""
    M = np.array(setup.hess(*setup.saddle), dtype=float)
    w, V = np.linalg.eigh(M)
    if not w[0] < 0 < w[1]:
        raise HamiltonianError("saddle Hessian is not indefinite")
    a, b = np.sqrt(-w[0]), np.sqrt(w[1])
    # M = b^2 v1 v1^T - a^2 v0 v0^T; isotropic: v1/b +- v0/a
    e1 = V[:, 1] / b + V[:, 0] / a
    e2 = V[:, 1] / b - V[:, 0] / a
    e2 = e2 / (e1 @ M @ e2)
    return np.asarray(setup.saddle, dtype=float), e1, e2


def vanishing_cycle_integral(setup: HamiltonianSetup, lam, h: float, *, n: int = 512,
                             safety: float = 3.0) -> complex:
    """Integral of omega over the vanishing cycle delta(h) of the saddle (u turning positively)."""
    if setup.saddle is None:
        raise HamiltonianError("no saddle declared")
    p0, e1, e2 = _morse_frame(setup)
    rho = safety * np.sqrt(abs(h))
    th = 2 * np.pi * np.arange(n) / n
    u = rho * np.exp(1j * th)
    # H ~ u v / 2 * 2 (quadratic part is u v): start from v = h / u and continue in theta
    v = np.empty(n, dtype=complex)
    vk = h / u[0]
    for k in range(n + 1):
        uk = u[k % n]
        for _ in range(50):
            x = p0[0] + uk * e1[0] + vk * e2[0]
            y = p0[1] + uk * e1[1] + vk * e2[1]
            gx, gy = setup.grad(x, y)
            Hv = gx * e2[0] + gy * e2[1]
            dv = (setup.Hf(x, y) - h) / Hv
            vk = vk - dv
            if abs(dv) < 1e-16 * max(1.0, abs(vk)):
                break
        if k < n:
            v[k] = vk
        elif abs(vk - v[0]) > 1e-10 * abs(v[0]):
            raise HamiltonianError("vanishing cycle did not close")
    x = p0[0] + u * e1[0] + v * e2[0]
    y = p0[1] + u * e1[1] + v * e2[1]
    gx, gy = setup.grad(x, y)
    Hu = gx * e1[0] + gy * e1[1]
    Hv = gx * e2[0] + gy * e2[1]
    du = 1j * u
    dv = -Hu / Hv * du
    dx = e1[0] * du + e2[0] * dv
    dy = e1[1] * du + e2[1] * dv
    return OvalCycle(x, y, dx, dy, h).integrate(setup, lam)


@dataclass
class PicardLefschetzResult:
    h: float
    I_plus: complex
    I_minus: complex
    delta_integral: complex
    orientation: int
    im_continuation: float
    im_vanishing: float
    disagreement: float
    ok: bool


def picard_lefschetz_imaginary(setup: HamiltonianSetup, lam, h, *, orientation: int | None = None,
                               tol: float = 1e-6, n: int = 256) -> list[PicardLefschetzResult]:
    """Im I+(h) past the saddle value two ways: (I+ - I-)/2i by continuation and the vanishing-cycle integral / 2i.

    The orientation of delta(h) is calibrated on the first h (sign making the
    identity hold) unless given; every further h is an independent check.
    """
    hs = np.atleast_1d(np.asarray(h, dtype=float))
    if any(setup.on_oval_side(v) or v == 0 for v in hs):
        raise ValueError("h must lie on the far side of the saddle value")
    out = []
    for hv in hs:
        Ip = continued_integral(setup, lam, complex(hv), branch="+", n=n)
        Im = continued_integral(setup, lam, complex(hv), branch="-", n=n)
        d = vanishing_cycle_integral(setup, lam, hv)
        if orientation is None:
            orientation = 1 if abs((Ip - Im) - d) <= abs((Ip - Im) + d) else -1
        d = orientation * d
        dis = abs((Ip - Im) - d)
        out.append(PicardLefschetzResult(
            float(hv), Ip, Im, d, orientation, float(np.imag(Ip)), float(np.real(d / 2j)),
            float(dis), bool(dis < tol * (1 + abs(Ip)))))
    return out


def _return_displacement(setup: HamiltonianSetup, fam: VectorFieldFamily, lam, h: float,
                         theta: float, rtol: float = 1e-12, atol: float = 1e-14) -> float:
    """H(P(p)) - H(p) for the point p of {H = h} on the ray at angle theta, via the exact
    identity dH/dt = -l1 omega(X) accumulated along the orbit."""
    cx, cy = setup.center
    r = _ray_radius(setup, h, theta, 10.0)
    p0 = np.array([cx + r * np.cos(theta), cy + r * np.sin(theta)])
    f = fam.field(lam)
    l1 = float(lam[0])
    nrm = np.array([-np.sin(theta), np.cos(theta)])

    def rhs(t, v):
        P, Q = f(v[0], v[1])
        A, B = setup.omega(v[0], v[1], lam)
        return [P, Q, -l1 * (A * P + B * Q)]

    def back(t, v):
        return (v[0] - cx) * nrm[0] + (v[1] - cy) * nrm[1]
    back.terminal = True
    P0, Q0 = f(*p0)
    back.direction = float(np.sign(P0 * nrm[0] + Q0 * nrm[1]))
    s0 = solve_ivp(rhs, (0, 1e-3), [*p0, 0.0], method="DOP853", rtol=rtol, atol=atol)
    sol = solve_ivp(rhs, (1e-3, 1e4), s0.y[:, -1], method="DOP853", rtol=rtol, atol=atol,
                    events=back)
    if sol.t_events[0].size == 0:
        raise HamiltonianError(f"no return at h = {h:g}")
    ye = sol.y_events[0][0]
    if (ye[0] - cx) * np.cos(theta) + (ye[1] - cy) * np.sin(theta) < 0:
        raise HamiltonianError("returned on the opposite half-ray")
    return float(ye[2])


def poincare_pontryagin_check(setup: HamiltonianSetup, lam1_values, h_grid, *, theta: float = 0.0,
                              other_params=()) -> dict:
    """Relative deviation of psi/l1 from I(h) on ``h_grid`` for each l1 in ``lam1_values``."""
    fam = setup.perturbed_family()
    h_grid = np.asarray(h_grid, dtype=float)
    I = np.array([abelian_integral(setup, [1.0, *other_params], h).real for h in h_grid])
    rows = []
    for l1 in lam1_values:
        lam = [float(l1), *other_params]
        psi = np.array([_return_displacement(setup, fam, lam, h, theta) for h in h_grid])
        row = {"lambda1": float(l1), "psi": psi.tolist(), "max_abs_psi": float(np.max(np.abs(psi)))}
        if l1 == 0:
            row["max_rel_deviation"] = 0.0
        else:
            row["psi_over_lambda"] = (psi / l1).tolist()
            row["max_rel_deviation"] = float(np.max(np.abs(psi / l1 - I)) / np.max(np.abs(I)))
        rows.append(row)
    devs = [r["max_rel_deviation"] for r in rows if r["lambda1"] != 0]
    ratios = [devs[i] / devs[i + 1] for i in range(len(devs) - 1) if devs[i + 1] > 0]
    return {"h": h_grid.tolist(), "I": I.tolist(), "rows": rows, "decrease_ratios": ratios}
