"""Analytic planar vector-field families, saddle location and saddle charts."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

__all__ = [
    "VectorFieldFamily",
    "SaddleChart",
    "CrossSection",
    "SaddleError",
    "find_saddle",
    "find_equilibria",
    "build_saddle_chart",
]

_X, _Y = sp.symbols("x y")


class SaddleError(RuntimeError):
    """Newton failed to converge or the equilibrium is not a hyperbolic saddle."""


def _sympify(expr, params: Sequence[sp.Symbol]):
    local = {str(s): s for s in params}
    local.update({"x": _X, "y": _Y, "pi": sp.pi, "E": sp.E, "e": sp.E})
    return sp.sympify(expr, locals=local)


def _terms_to_expr(terms, params):
    out = sp.Integer(0)
    for t in terms:
        if isinstance(t, dict):
            i, j, c = t["i"], t["j"], t["c"]
        else:
            i, j, c = t
        out += _sympify(str(c), params) * _X ** int(i) * _Y ** int(j)
    return out


@dataclass
class VectorFieldFamily:
    """X_lambda = P d/dx + Q d/dy with coefficients depending on lambda.

    ``P`` and ``Q`` may be built from monomial lists ``(i, j, c)`` (``c`` an
    arithmetic expression in the parameters) or given directly as analytic
    expressions in ``x, y`` and the parameters (needed for e.g. ``sin x``).
    """

    P_expr: sp.Expr
    Q_expr: sp.Expr
    param_names: tuple[str, ...] = ()
    name: str = "family"
    box: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if sp.simplify(self.P_expr) == 0 and sp.simplify(self.Q_expr) == 0:
            raise ValueError("P and Q are both identically zero")
        self._params = sp.symbols(self.param_names) if self.param_names else ()
        if isinstance(self._params, sp.Symbol):
            self._params = (self._params,)
        args = (_X, _Y, *self._params)
        self._f = sp.lambdify(args, [self.P_expr, self.Q_expr], "numpy")
        jac = [[sp.diff(e, v) for v in (_X, _Y)] for e in (self.P_expr, self.Q_expr)]
        self._jac = sp.lambdify(args, jac, "numpy")

    @classmethod
    def from_terms(cls, P_terms, Q_terms, param_names=(), **kw) -> "VectorFieldFamily":
        params = sp.symbols(tuple(param_names)) if param_names else ()
        if isinstance(params, sp.Symbol):
            params = (params,)
        return cls(_terms_to_expr(P_terms, params), _terms_to_expr(Q_terms, params),
                   tuple(param_names), **kw)

    @classmethod
    def from_strings(cls, P: str, Q: str, param_names=(), **kw) -> "VectorFieldFamily":
        params = sp.symbols(tuple(param_names)) if param_names else ()
        if isinstance(params, sp.Symbol):
            params = (params,)
        return cls(_sympify(P, params), _sympify(Q, params), tuple(param_names), **kw)

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def _lam(self, lam) -> tuple:
        lam = tuple(np.atleast_1d(np.asarray(lam, dtype=float))) if lam is not None else ()
        if len(lam) < self.n_params:
            lam = lam + (0.0,) * (self.n_params - len(lam))
        return lam[: self.n_params]

    def field(self, lam, sign: float = 1.0) -> Callable:
        """Return ``f(x, y) -> (P, Q)`` at fixed lambda; works on complex arrays."""
        lam = self._lam(lam)
        f = self._f

        def rhs(x, y):
            P, Q = f(x, y, *lam)
            P = P + 0 * x  # broadcast constants
            Q = Q + 0 * y
            return sign * P, sign * Q

        return rhs

    def jacobian(self, lam, point) -> np.ndarray:
        J = np.array(self._jac(point[0], point[1], *self._lam(lam)), dtype=complex)
        return J.real.copy() if np.isrealobj(np.asarray(point)) else J

    def __call__(self, x, y, lam):
        P, Q = self._f(x, y, *self._lam(lam))
        return P + 0 * x, Q + 0 * y


def find_saddle(family: VectorFieldFamily, lam, seed, *, root_tol: float = 1e-13,
                max_iter: int = 60) -> np.ndarray:
    """Newton-refine an equilibrium from ``seed`` and check that it is a saddle."""
    p = np.asarray(seed, dtype=float).copy()
    for _ in range(max_iter):
        P, Q = family(p[0], p[1], lam)
        r = np.array([P, Q], dtype=float)
        if np.linalg.norm(r) < root_tol:
            break
        J = family.jacobian(lam, p)
        try:
            p = p - np.linalg.solve(J, r)
        except np.linalg.LinAlgError as exc:
            raise SaddleError(f"singular Jacobian at {p}") from exc
        if not np.all(np.isfinite(p)):
            raise SaddleError("Newton diverged")
    else:
        P, Q = family(p[0], p[1], lam)
        if np.hypot(P, Q) >= root_tol * 100:
            raise SaddleError(f"no convergence from seed {seed}")
    ev = np.linalg.eigvals(family.jacobian(lam, p))
    if np.any(np.abs(ev.imag) > 1e-12) or not (ev.real.min() < 0 < ev.real.max()):
        raise SaddleError(f"equilibrium {p} is not a saddle (eigenvalues {ev})")
    return p


def find_equilibria(family: VectorFieldFamily, lam, center, radius: float, n: int = 9) -> list:
    """Equilibria found by Newton from a seed grid in a square around ``center``."""
    found: list[np.ndarray] = []
    c = np.asarray(center, dtype=float)
    for sx in np.linspace(-radius, radius, n):
        for sy in np.linspace(-radius, radius, n):
            p = c + (sx, sy)
            for _ in range(40):
                P, Q = family(p[0], p[1], lam)
                r = np.array([P, Q], dtype=float)
                if np.linalg.norm(r) < 1e-12:
                    break
                J = family.jacobian(lam, p)
                if abs(np.linalg.det(J)) < 1e-14:
                    break
                p = p - np.linalg.solve(J, r)
                if not np.all(np.isfinite(p)) or np.linalg.norm(p - c) > 3 * radius:
                    break
            P, Q = family(p[0], p[1], lam)
            if np.all(np.isfinite(p)) and np.hypot(P, Q) < 1e-10 and np.linalg.norm(p - c) <= 2 * radius:
                if all(np.linalg.norm(p - q) > 1e-6 for q in found):
                    found.append(p.copy())
    return found


def _taylor_coefficients(g: Callable, order: int, r: float, m: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Bivariate Taylor coefficients of an analytic map at 0 by Cauchy integrals (2D FFT)."""
    th = np.exp(2j * np.pi * np.arange(m) / m)
    A, B = np.meshgrid(r * th, r * th, indexing="ij")
    ga, gb = g(A, B)
    scale = r ** np.add.outer(np.arange(m), np.arange(m))
    ca = np.fft.fft2(ga) / m**2 / scale
    cb = np.fft.fft2(gb) / m**2 / scale
    k = order + 2
    return ca[:k, :k].real.copy(), cb[:k, :k].real.copy()


def _compose(C: np.ndarray, s: np.ndarray, swap: bool, n: int) -> np.ndarray:
    """Series of sum C[i,j] a^i b^j with b = s(a) (or a = s(b) when swap), truncated at degree n."""
    D = C.T if swap else C
    out = np.zeros(n + 1)
    spow = np.zeros(n + 1)
    spow[0] = 1.0
    for j in range(D.shape[1]):
        for i in range(min(D.shape[0], n + 1)):
            if D[i, j] != 0.0:
                out[i:] += D[i, j] * spow[: n + 1 - i]
        spow = np.convolve(spow, s)[: n + 1]
    return out


def _manifold_graph(Cf: np.ndarray, Cg: np.ndarray, mu_f: float, mu_g: float, order: int,
                    swap: bool) -> np.ndarray:
    """Graph g = s(f) of the invariant manifold tangent to the f-axis.

    Cf, Cg hold the Taylor coefficients of the f- and g-components; the equation
    solved order by order is  G(f, s(f)) = s'(f) F(f, s(f)).
    """
    s = np.zeros(order + 1)
    for n in range(2, order + 1):
        gs = _compose(Cg, s, swap, order)
        fs = _compose(Cf, s, swap, order)
        ds = np.polynomial.polynomial.polyder(s) if order > 0 else np.zeros(1)
        res = gs - np.convolve(ds, fs)[: order + 1]
        s[n] = res[n] / (n * mu_f - mu_g)
    return s


@dataclass
class SaddleChart:
    """Coordinates (X, Y) near a saddle in which the separatrices are the axes.

    ``X`` follows the unstable direction and ``Y`` the stable one of the field
    ``sign * X_lambda``; the local foliation reads x(1+..)dy + alpha y(1+..)dx.
    """

    saddle: np.ndarray
    V: np.ndarray
    s_coef: np.ndarray  # unstable manifold b = s(a)
    u_coef: np.ndarray  # stable manifold a = u(b)
    mu_u: float
    mu_s: float
    radius: float
    sign: float = 1.0
    lam: tuple = ()
    order: int = 8
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Vinv = np.linalg.inv(self.V)
        self._ds = np.polynomial.polynomial.polyder(self.s_coef)
        self._du = np.polynomial.polynomial.polyder(self.u_coef)

    @property
    def alpha(self) -> float:
        return -self.mu_s / self.mu_u

    def _ab(self, x, y):
        dx = x - self.saddle[0]
        dy = y - self.saddle[1]
        a = self.Vinv[0, 0] * dx + self.Vinv[0, 1] * dy
        b = self.Vinv[1, 0] * dx + self.Vinv[1, 1] * dy
        return a, b

    def forward(self, x, y):
        """Plane point -> chart coordinates (X, Y)."""
        a, b = self._ab(x, y)
        pv = np.polynomial.polynomial.polyval
        return a - pv(b, self.u_coef), b - pv(a, self.s_coef)

    def gradients(self, x, y):
        """Gradients of X and Y with respect to the plane coordinates."""
        a, b = self._ab(x, y)
        pv = np.polynomial.polynomial.polyval
        du = pv(b, self._du)
        ds = pv(a, self._ds)
        Vi = self.Vinv
        gX = (Vi[0, 0] - du * Vi[1, 0], Vi[0, 1] - du * Vi[1, 1])
        gY = (Vi[1, 0] - ds * Vi[0, 0], Vi[1, 1] - ds * Vi[0, 1])
        return gX, gY

    def inverse(self, X, Y, tol: float = 1e-15, max_iter: int = 50):
        """Chart coordinates -> plane point, Newton on a - u(b) = X, b - s(a) = Y."""
        X = np.asarray(X, dtype=complex)
        Y = np.asarray(Y, dtype=complex)
        pv = np.polynomial.polynomial.polyval
        a, b = X.copy(), Y.copy()
        for _ in range(max_iter):
            ra = a - pv(b, self.u_coef) - X
            rb = b - pv(a, self.s_coef) - Y
            du = pv(b, self._du)
            ds = pv(a, self._ds)
            det = 1.0 - du * ds
            da = (ra + du * rb) / det
            db = (rb + ds * ra) / det
            a = a - da
            b = b - db
            if np.all(np.abs(da) + np.abs(db) <= tol * (1 + np.abs(a) + np.abs(b))):
                break
        x = self.saddle[0] + self.V[0, 0] * a + self.V[0, 1] * b
        y = self.saddle[1] + self.V[1, 0] * a + self.V[1, 1] * b
        if np.isrealobj(X) and np.isrealobj(Y):
            return x.real, y.real
        return x, y

    def unstable_separatrix(self, t):
        """Plane points of the polynomial unstable-manifold graph at a = t."""
        t = np.asarray(t, dtype=float)
        b = np.polynomial.polynomial.polyval(t, self.s_coef)
        return self.saddle[:, None] + self.V @ np.vstack([t, b])

    def stable_separatrix(self, t):
        t = np.asarray(t, dtype=float)
        a = np.polynomial.polynomial.polyval(t, self.u_coef)
        return self.saddle[:, None] + self.V @ np.vstack([a, t])


def build_saddle_chart(family: VectorFieldFamily, lam, saddle, order: int = 8, *,
                       sign: float = 1.0, interior=None, radius: float | None = None,
                       radius_factor: float = 0.25, max_radius: float = 1.0) -> SaddleChart:
    """Straighten the two separatrices of a saddle into the coordinate axes.

    ``sign = -1`` builds the chart for the reversed field (roles of the stable
    and unstable separatrices swapped, alpha inverted).  ``interior`` is a plane
    point that must lie in the open quadrant X > 0, Y > 0 (eigenvector signs
    are chosen accordingly).
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    p0 = np.asarray(saddle, dtype=float)
    J = sign * family.jacobian(lam, p0)
    ev, vecs = np.linalg.eig(J)
    if np.any(np.abs(np.imag(ev)) > 1e-12) or not (ev.real.min() < 0 < ev.real.max()):
        raise SaddleError(f"not a saddle: eigenvalues {ev}")
    ev = ev.real
    vecs = vecs.real
    iu, is_ = (0, 1) if ev[0] > 0 else (1, 0)
    vu = vecs[:, iu] / np.linalg.norm(vecs[:, iu])
    vs = vecs[:, is_] / np.linalg.norm(vecs[:, is_])
    if interior is not None:
        ab = np.linalg.solve(np.column_stack([vu, vs]), np.asarray(interior, float) - p0)
        vu = vu * (1 if ab[0] > 0 else -1)
        vs = vs * (1 if ab[1] > 0 else -1)
    else:
        vu = vu * (1 if vu[np.argmax(np.abs(vu))] > 0 else -1)
        vs = vs * (1 if vs[np.argmax(np.abs(vs))] > 0 else -1)
    V = np.column_stack([vu, vs])
    mu_u, mu_s = ev[iu], ev[is_]

    if radius is None:
        others = [q for q in find_equilibria(family, lam, p0, 4.0) if np.linalg.norm(q - p0) > 1e-6]
        dist = min((np.linalg.norm(q - p0) for q in others), default=np.inf)
        radius = min(radius_factor * dist, max_radius)

    f = family.field(lam, sign)
    Vinv = np.linalg.inv(V)

    def g(a, b):
        x = p0[0] + V[0, 0] * a + V[0, 1] * b
        y = p0[1] + V[1, 0] * a + V[1, 1] * b
        P, Q = f(x, y)
        return Vinv[0, 0] * P + Vinv[0, 1] * Q, Vinv[1, 0] * P + Vinv[1, 1] * Q

    r_fft = min(max(2.0 * radius, 0.2), 1.0)
    Ca, Cb = _taylor_coefficients(g, order, r_fft)
    s_coef = _manifold_graph(Ca, Cb, mu_u, mu_s, order, swap=False)
    u_coef = _manifold_graph(Cb, Ca, mu_s, mu_u, order, swap=True)
    return SaddleChart(p0, V, s_coef, u_coef, mu_u, mu_s, float(radius), sign,
                       tuple(family._lam(lam)), order)


@dataclass
class CrossSection:
    """A transversal parameterized by a complex coordinate z (z = 0 on the invariant curve).

    Chart sections: ``axis='sigma'`` is {Y = c} parameterized by X - offset,
    ``axis='tau'`` is {X = c} parameterized by Y - offset.  Line sections
    (``chart is None``) are anchor + (z + offset) * direction in the plane.
    """

    anchor: float | np.ndarray
    radius: float
    chart: SaddleChart | None = None
    axis: str = "line"
    direction: np.ndarray | None = None
    offset: complex = 0.0
    name: str = "section"

    def point(self, z):
        z = np.asarray(z, dtype=complex) + self.offset
        if self.axis == "sigma":
            return self.chart.inverse(z, np.full_like(z, self.anchor))
        if self.axis == "tau":
            return self.chart.inverse(np.full_like(z, self.anchor), z)
        a = np.asarray(self.anchor, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        return a[0] + z * d[0], a[1] + z * d[1]

    def coordinate(self, x, y):
        if self.axis == "sigma":
            return self.chart.forward(x, y)[0] - self.offset
        if self.axis == "tau":
            return self.chart.forward(x, y)[1] - self.offset
        a = np.asarray(self.anchor, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        return (x - a[0]) * d[0] + (y - a[1]) * d[1] - self.offset

    def level(self, x, y):
        """Transverse function vanishing on the section, with its plane gradient."""
        if self.axis == "sigma":
            _, Yc = self.chart.forward(x, y)
            return Yc - self.anchor, self.chart.gradients(x, y)[1]
        if self.axis == "tau":
            Xc, _ = self.chart.forward(x, y)
            return Xc - self.anchor, self.chart.gradients(x, y)[0]
        a = np.asarray(self.anchor, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        n = (-d[1], d[0])
        return (x - a[0]) * n[0] + (y - a[1]) * n[1], (n[0] + 0 * x, n[1] + 0 * x)

    def transversality(self, family: VectorFieldFamily, lam, sign: float = 1.0, n: int = 21) -> float:
        """Minimum |sin| of the angle between the field and the section on real points."""
        z = np.linspace(-self.radius, self.radius, n)
        x, y = self.point(z)
        x, y = np.real(x), np.real(y)
        P, Q = family.field(lam, sign)(x, y)
        _, (gx, gy) = self.level(x, y)
        gx, gy = np.real(gx), np.real(gy)
        return float(np.min(np.abs(P * gx + Q * gy) / (np.hypot(P, Q) * np.hypot(gx, gy))))
