"""Real limit cycles by direct integration of the first-return map on a section."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .family import CrossSection, VectorFieldFamily

__all__ = ["ReturnMap", "BruteForceResult", "brute_force_limit_cycles"]

logger = logging.getLogger(__name__)


class ReturnMap:
    """Real first-return map z -> P(z) of ``section`` under the flow of sign * X_lambda."""

    def __init__(self, family: VectorFieldFamily, lam, section: CrossSection, *, sign: float = 1.0,
                 t_max: float = 400.0, rtol: float = 1e-12, atol: float = 1e-13,
                 escape: float = 1e3):
        self.f = family.field(lam, sign)
        self.section = section
        self.t_max = t_max
        self.rtol, self.atol = rtol, atol
        self.escape = escape

    def _real_level(self, x, y):
        v, (gx, gy) = self.section.level(x, y)
        return float(np.real(v)), float(np.real(gx)), float(np.real(gy))

    def __call__(self, z: float):
        """Returns (P(z), period) or (nan, nan) when the orbit escapes or does not return."""
        x0, y0 = self.section.point(np.array([z], dtype=complex))
        p0 = np.array([np.real(x0).item(), np.real(y0).item()])
        P, Q = self.f(p0[0], p0[1])
        _, gx, gy = self._real_level(*p0)
        crossing = np.sign(gx * P + gy * Q)
        if crossing == 0:
            return np.nan, np.nan
        f = self.f

        def rhs(t, v):
            a, b = f(v[0], v[1])
            return [a, b]

        def hit(t, v):
            return self._real_level(v[0], v[1])[0]
        hit.terminal = True
        hit.direction = crossing

        def away(t, v):
            return self.escape - abs(v[0]) - abs(v[1])
        away.terminal = True

        # leave the section before arming the return event
        t_leave = 1e-3
        s0 = solve_ivp(rhs, (0, t_leave), p0, method="DOP853", rtol=self.rtol, atol=self.atol)
        sol = solve_ivp(rhs, (t_leave, self.t_max), s0.y[:, -1], method="DOP853", rtol=self.rtol,
                        atol=self.atol, events=(hit, away))
        if sol.t_events[0].size == 0:
            return np.nan, np.nan
        pe = sol.y_events[0][0]
        w = self.section.coordinate(pe[0], pe[1])
        return float(np.real(w)), float(sol.t_events[0][0])


@dataclass
class BruteForceResult:
    roots: list
    window: tuple
    degenerate: bool = False
    flags: list = field(default_factory=list)
    samples: np.ndarray | None = None


def brute_force_limit_cycles(family: VectorFieldFamily, lam, section: CrossSection, window, *,
                             sign: float = 1.0, n: int = 41, xtol: float = 1e-12,
                             degenerate_tol: float = 1e-10, t_max: float = 400.0,
                             spacing: str = "linear") -> BruteForceResult:
    """Fixed points of the real return map on ``window`` by sign changes and bisection."""
    pm = ReturnMap(family, lam, section, sign=sign, t_max=t_max)
    a, b = float(window[0]), float(window[1])
    if spacing == "log":
        zs = np.geomspace(a, b, n)
    else:
        zs = np.linspace(a, b, n)
    d = np.array([pm(z)[0] - z for z in zs])
    ok = np.isfinite(d)
    flags = []
    if not np.all(ok):
        flags.append(f"return map undefined at {int(np.sum(~ok))} of {n} samples; window trimmed")
    zs_ok, d_ok = zs[ok], d[ok]
    res = BruteForceResult([], (a, b), samples=np.column_stack([zs, d]), flags=flags)
    if zs_ok.size == 0:
        return res
    res.window = (float(zs_ok[0]), float(zs_ok[-1]))
    if np.max(np.abs(d_ok)) < degenerate_tol:
        res.degenerate = True
        res.flags.append("displacement identically zero: no isolated cycles")
        return res

    def g(z):
        return pm(z)[0] - z

    for j in range(len(zs_ok) - 1):
        if np.sign(d_ok[j]) == 0:
            res.roots.append(float(zs_ok[j]))
            continue
        if np.sign(d_ok[j]) * np.sign(d_ok[j + 1]) < 0:
            r = brentq(g, zs_ok[j], zs_ok[j + 1], xtol=xtol, rtol=1e-14)
            h = 1e-6 * max(1.0, abs(r))
            der = (g(r + h) - g(r - h)) / (2 * h)
            if abs(der) < 1e-6:
                res.flags.append(f"near-multiple root at {r:.6g} (slope {der:.2e})")
            res.roots.append(float(r))
    return res
