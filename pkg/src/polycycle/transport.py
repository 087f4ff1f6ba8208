"""Leafwise transport in the complexified foliation: Dulac maps, holonomies, regular transports.

A leaf is followed above a prescribed path in a *base coordinate* g (complex
time, a chart coordinate, its logarithm, or the level function of a section):
the plane point p obeys  dp/ds = F(p) * (dw/ds) / (grad g . F)(p)  so that
g(p(s)) = w(s) along the path.  Logarithmic base coordinates give the lift to
the universal cover for free.
"""
from __future__ import annotations

import csv
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .family import CrossSection, SaddleChart, VectorFieldFamily

__all__ = [
    "LiftedPoint",
    "LeafPath",
    "TransportResult",
    "LeafTransport",
    "TransportError",
    "transport",
    "dulac",
    "holonomy",
    "HolonomyMap",
    "monodromy_residual",
    "separatrix_offsets",
    "chart_sections",
    "regular_transport",
    "real_hit_time",
    "transport_tolerances",
]

logger = logging.getLogger(__name__)

MAX_ARC_STEP = np.pi / 8
_DEFAULT_TOL = {"rtol": 1e-12, "atol": 1e-14}


@contextmanager
def transport_tolerances(rtol: float | None = None, atol: float | None = None):
    """Temporarily change the integrator tolerances used by engines built without explicit ones."""
    old = dict(_DEFAULT_TOL)
    if rtol is not None:
        _DEFAULT_TOL["rtol"] = float(rtol)
    if atol is not None:
        _DEFAULT_TOL["atol"] = float(atol)
    try:
        yield dict(_DEFAULT_TOL)
    finally:
        _DEFAULT_TOL.update(old)


class TransportError(RuntimeError):
    def __init__(self, status: str, message: str = ""):
        super().__init__(f"{status}: {message}" if message else status)
        self.status = status


@dataclass
class LiftedPoint:
    """Point rho * exp(i phi) on the universal cover of a punctured section."""

    rho: float
    phi: float
    section_id: str = ""

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    @property
    def z(self) -> complex:
        return self.rho * np.exp(1j * self.phi)

    @property
    def log(self) -> complex:
        return np.log(self.rho) + 1j * self.phi


@dataclass
class LeafPath:
    """Base path: waypoints (rows) of the base coordinate, one column per transported point."""

    base: str
    waypoints: np.ndarray
    description: str = ""

    def __post_init__(self):
        w = np.asarray(self.waypoints, dtype=complex)
        if w.ndim == 1:
            w = w[:, None]
        self.waypoints = w

    def refined(self, max_step: float) -> "LeafPath":
        """Subdivide segments so that no step of the base coordinate exceeds ``max_step``."""
        w = self.waypoints
        rows = [w[:1]]
        for k in range(len(w) - 1):
            d = np.max(np.abs(w[k + 1] - w[k]))
            m = max(1, int(np.ceil(d / max_step)))
            t = np.arange(1, m + 1)[:, None] / m
            rows.append(w[k] + t * (w[k + 1] - w[k]))
        return LeafPath(self.base, np.vstack(rows), self.description)


@dataclass
class TransportResult:
    endpoint: np.ndarray
    path: LeafPath
    status: str
    error_estimate: float
    point: tuple = ()
    lift: np.ndarray | None = None
    samples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def lifted(self, k: int = 0) -> LiftedPoint:
        """Endpoint as a point of the cover, using the tracked logarithm when available."""
        e = np.ravel(self.endpoint)[k]
        if self.lift is None:
            return LiftedPoint(abs(e), float(np.angle(e)))
        return LiftedPoint(abs(e), float(np.ravel(self.lift)[k].imag))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "base_re", "base_im", "x_re", "x_im", "y_re", "y_im"])
            for row in self.samples:
                w.writerow([f"{v:.16e}" for v in row])


def _unpack(v, n):
    return v[:n], v[n:2 * n]


class LeafTransport:
    """Follows leaves of ``sign * X_lambda`` above base paths."""

    def __init__(self, family: VectorFieldFamily, lam, sign: float = 1.0, *,
                 rtol: float | None = None, atol: float | None = None, chart: SaddleChart | None = None,
                 escape_radius: float | None = None, record: bool = False):
        self.family = family
        self.lam = lam
        self.sign = sign
        self.f = family.field(lam, sign)
        self.rtol = _DEFAULT_TOL["rtol"] if rtol is None else rtol
        self.atol = _DEFAULT_TOL["atol"] if atol is None else atol
        self.chart = chart
        self.escape_radius = escape_radius
        self.record = record

    def _base(self, base: str, section: CrossSection | None):
        ch = self.chart
        if base == "time":
            return None
        if base in ("X", "logX", "Y", "logY"):
            if ch is None:
                raise ValueError(f"base {base!r} needs a chart")
            idx = 0 if base.endswith("X") else 1
            log = base.startswith("log")

            def g(x, y):
                val = ch.forward(x, y)[idx]
                gx, gy = ch.gradients(x, y)[idx]
                if log:
                    return val, gx / val, gy / val
                return val, gx, gy
            return g
        if base == "level":
            def g(x, y):
                val, (gx, gy) = section.level(x, y)
                return val, gx, gy
            return g
        raise ValueError(f"unknown base coordinate {base!r}")

    def run(self, x0, y0, path: LeafPath, *, section: CrossSection | None = None,
            track: str | None = None, track0=None):
        """Integrate along ``path``; returns (x, y, status, err, tracked_log)."""
        x = np.atleast_1d(np.asarray(x0, dtype=complex)).copy()
        y = np.atleast_1d(np.asarray(y0, dtype=complex)).copy()
        n = x.size
        w = path.waypoints
        if w.shape[1] == 1 and n > 1:
            w = np.repeat(w, n, axis=1)
        gfun = self._base(path.base, section)
        f = self.f
        ch = self.chart
        tidx = None if track is None else (0 if track == "X" else 1)
        L = None
        if tidx is not None:
            L = np.atleast_1d(np.asarray(track0, dtype=complex)).copy()
            if L.size == 1 and n > 1:
                L = np.repeat(L, n)
        status = "ok"
        samples = []

        for k in range(len(w) - 1):
            dw = w[k + 1] - w[k]
            if np.all(dw == 0):
                continue

            def rhs(s, v, dw=dw):
                px, py = v[:n], v[n:2 * n]
                P, Q = f(px, py)
                if gfun is None:
                    fac = dw
                else:
                    _, gx, gy = gfun(px, py)
                    fac = dw / (gx * P + gy * Q)
                out = [fac * P, fac * Q]
                if tidx is not None:
                    val = ch.forward(px, py)[tidx]
                    hx, hy = ch.gradients(px, py)[tidx]
                    out.append(fac * (hx * P + hy * Q) / val)
                return np.concatenate(out)

            events = []
            if self.escape_radius is not None and ch is not None:
                c0 = ch.saddle
                R = self.escape_radius

                def escape(s, v):
                    px, py = v[:n], v[n:2 * n]
                    return R - np.max(np.abs(px - c0[0]) + np.abs(py - c0[1]))
                escape.terminal = True
                events.append(escape)

            def blowup(s, v):
                return 1e6 - np.max(np.abs(v[:2 * n]))
            blowup.terminal = True
            events.append(blowup)

            v0 = np.concatenate([x, y] + ([L] if L is not None else []))
            sol = solve_ivp(rhs, (0.0, 1.0), v0, method="DOP853", rtol=self.rtol,
                            atol=self.atol, events=events)
            if sol.status == -1:
                status = "step-underflow"
                logger.debug("transport step underflow: %s", sol.message)
                v = sol.y[:, -1]
            elif sol.status == 1:
                status = "left-domain"
                v = sol.y[:, -1]
            else:
                v = sol.y[:, -1]
            x, y = v[:n].copy(), v[n:2 * n].copy()
            if L is not None:
                L = v[2 * n:].copy()
            if self.record:
                samples.append((k + 1, w[k + 1][0].real, w[k + 1][0].imag,
                                x[0].real, x[0].imag, y[0].real, y[0].imag))
            if status != "ok":
                break

        err = 0.0
        if status == "ok" and gfun is not None:
            val = gfun(x, y)[0]
            target = w[-1]
            if path.base.startswith("log"):
                ref = np.exp(target)
                err = float(np.max(np.abs(val - ref) / np.abs(ref)))
            else:
                err = float(np.max(np.abs(val - target)))
        self._samples = samples
        return x, y, status, err, L


def real_hit_time(family: VectorFieldFamily, lam, p0, section: CrossSection, *, sign: float = 1.0,
                  t_max: float = 200.0, direction: int = 0, min_time: float = 1e-6,
                  rtol: float = 1e-12, atol: float = 1e-14):
    """Real flow time from ``p0`` to the first crossing of ``section`` (None if never)."""
    f = family.field(lam, sign)

    def rhs(t, v):
        P, Q = f(v[0], v[1])
        return [P, Q]

    def ev(t, v):
        return float(np.real(section.level(v[0], v[1])[0]))
    ev.terminal = True
    ev.direction = direction
    reach = 2.0 * section.radius if section.radius > 0 else np.inf
    # leave the start section before arming the event
    t0, v0 = 0.0, np.asarray(p0, float)
    while t0 < t_max:
        s0 = solve_ivp(rhs, (t0, t0 + min_time), v0, method="DOP853", rtol=rtol, atol=atol)
        sol = solve_ivp(rhs, (t0 + min_time, t_max), s0.y[:, -1], method="DOP853", rtol=rtol,
                        atol=atol, events=ev)
        if sol.t_events[0].size == 0:
            return None, None
        te, pe = float(sol.t_events[0][0]), sol.y_events[0][0]
        # chart level sets are global curves: only crossings near the section count
        if abs(section.coordinate(pe[0], pe[1])) <= reach:
            return te, pe
        t0, v0 = te, pe
    return None, None


def separatrix_offsets(chart: SaddleChart, family: VectorFieldFamily, c_sigma: float,
                       c_tau: float, delta: float = 1e-3) -> tuple[float, float]:
    """X-offset of the stable separatrix on {Y = c_sigma} and Y-offset of the unstable one on {X = c_tau}.

    Each separatrix is followed as a leaf from a point very close to the saddle,
    where the polynomial graph is exact to O(delta^(order+1)).
    """
    eng = LeafTransport(family, chart.lam, chart.sign, chart=chart)
    d = np.sign(c_sigma) * delta
    x0, y0 = chart.inverse(np.complex128(0.0), np.complex128(d))
    path = LeafPath("logY", [np.log(complex(d)), np.log(complex(c_sigma))], "separatrix")
    x, y, st, _, _ = eng.run(x0, y0, path)
    if st != "ok":
        raise TransportError(st, "stable separatrix leaf")
    off_sigma = chart.forward(x, y)[0][0].real
    d = np.sign(c_tau) * delta
    x0, y0 = chart.inverse(np.complex128(d), np.complex128(0.0))
    path = LeafPath("logX", [np.log(complex(d)), np.log(complex(c_tau))], "separatrix")
    x, y, st, _, _ = eng.run(x0, y0, path)
    if st != "ok":
        raise TransportError(st, "unstable separatrix leaf")
    off_tau = chart.forward(x, y)[1][0].real
    return float(off_sigma), float(off_tau)


def chart_sections(chart: SaddleChart, family: VectorFieldFamily, c1: float, c2: float,
                   radius: float | None = None, exact_offsets: bool = True):
    """sigma = {Y = c1} and tau = {X = c2} with z = 0 on the true separatrices."""
    r = radius if radius is not None else 0.5 * min(abs(c1), abs(c2))
    o1, o2 = separatrix_offsets(chart, family, c1, c2) if exact_offsets else (0.0, 0.0)
    sigma = CrossSection(c1, r, chart, "sigma", offset=o1, name="sigma")
    tau = CrossSection(c2, r, chart, "tau", offset=o2, name="tau")
    return sigma, tau


def _log_lift(z, phi, offset):
    """log of (offset + z) continued from the lifted log of z (requires |offset| < |z|)."""
    rho = np.abs(z)
    lz = np.log(rho) + 1j * np.asarray(phi, dtype=float)
    if offset == 0:
        return lz
    return lz + np.log1p(offset / z)


def _arc_steps(w0, w1, max_step=MAX_ARC_STEP):
    d = np.max(np.abs(np.imag(np.asarray(w1) - np.asarray(w0))))
    return max(1, int(np.ceil(d / max_step)))


def dulac(family: VectorFieldFamily, lam, chart: SaddleChart, sigma: CrossSection,
          tau: CrossSection, z, phi=None, *, engine: LeafTransport | None = None) -> TransportResult:
    """Dulac map sigma -> tau at lifted points (rho e^{i phi}) of the cover of sigma minus 0.

    ``z`` may be a LiftedPoint, or moduli ``rho`` together with lifted ``phi``.
    The leaf is followed above the straight segment from log X(start) to log c2,
    which for real z > 0 is the first-quadrant orbit.
    """
    if isinstance(z, LiftedPoint):
        rho, phi = np.array([z.rho]), np.array([z.phi])
    else:
        rho = np.atleast_1d(np.asarray(z, dtype=float))
        phi = np.zeros_like(rho) if phi is None else np.atleast_1d(np.asarray(phi, dtype=float))
        rho, phi = np.broadcast_arrays(rho, phi)
    eng = engine or LeafTransport(family, lam, chart.sign, chart=chart,
                                  escape_radius=3 * chart.radius + 2 * max(abs(sigma.anchor), abs(tau.anchor)))
    zc = rho * np.exp(1j * phi)
    X0 = sigma.offset + zc
    w0 = _log_lift(zc, phi, sigma.offset)
    w1 = np.full_like(w0, np.log(complex(tau.anchor)))
    m = _arc_steps(w0, w1)
    t = np.linspace(0, 1, m + 1)[:, None]
    path = LeafPath("logX", w0 + t * (w1 - w0), "section-to-section")
    x0, y0 = chart.inverse(X0, np.full_like(X0, sigma.anchor))
    x, y, st, err, L = eng.run(x0, y0, path, track="Y", track0=np.log(complex(sigma.anchor)))
    Yc = chart.forward(x, y)[1]
    wend = Yc - tau.offset
    lift = None
    if L is not None:
        lift = L + (np.log1p(-tau.offset / Yc) if tau.offset != 0 else 0)
    return TransportResult(wend, path, st, err, (x, y), lift, eng._samples)


class HolonomyMap:
    """k-fold holonomy of the separatrix crossed by a chart section, evaluated by transport."""

    def __init__(self, family: VectorFieldFamily, lam, chart: SaddleChart, section: CrossSection,
                 turns: int = 1, engine: LeafTransport | None = None):
        if section.axis not in ("sigma", "tau"):
            raise ValueError("holonomy needs a chart section")
        self.family, self.lam, self.chart, self.section = family, lam, chart, section
        self.turns = int(turns)
        self.engine = engine or LeafTransport(family, lam, chart.sign, chart=chart,
                                              escape_radius=4 * chart.radius + 2 * abs(section.anchor))
        self.last_status = "ok"
        self.last_error = 0.0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        z = np.atleast_1d(z).ravel()
        if self.turns == 0:
            return z.reshape(shape)
        sec, ch = self.section, self.chart
        c = complex(sec.anchor)
        fib = sec.offset + z
        if sec.axis == "sigma":
            base = "logY"
            x0, y0 = ch.inverse(fib, np.full_like(fib, c))
        else:
            base = "logX"
            x0, y0 = ch.inverse(np.full_like(fib, c), fib)
        w0 = np.log(c)
        m = max(1, int(np.ceil(2 * np.pi * abs(self.turns) / MAX_ARC_STEP)))
        path = LeafPath(base, w0 + 2j * np.pi * self.turns * np.linspace(0, 1, m + 1),
                        f"separatrix-loop({self.turns} turns)")
        x, y, st, err, _ = self.engine.run(x0, y0, path)
        self.last_status, self.last_error = st, err
        if st != "ok":
            raise TransportError(st, "holonomy loop")
        Xc, Yc = ch.forward(x, y)
        out = (Xc if sec.axis == "sigma" else Yc) - sec.offset
        return out.reshape(shape)

    def derivative(self, z, h: float = 1e-5):
        """Complex derivative by central differences (the map is holomorphic)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        v = self(np.concatenate([z + h, z - h, z + 1j * h, z - 1j * h]))
        n = z.size
        return ((v[:n] - v[n:2 * n]) / (2 * h) + (v[2 * n:3 * n] - v[3 * n:]) / (2j * h)) / 2

    def value_and_derivative(self, z, h: float = 1e-5):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        n = z.size
        v = self(np.concatenate([z, z + h, z - h, z + 1j * h, z - 1j * h]))
        d = ((v[n:2 * n] - v[2 * n:3 * n]) / (2 * h) + (v[3 * n:4 * n] - v[4 * n:]) / (2j * h)) / 2
        return v[:n], d

    def power(self, k: int) -> "HolonomyMap":
        return HolonomyMap(self.family, self.lam, self.chart, self.section, self.turns * k, self.engine)


def holonomy(family: VectorFieldFamily, lam, chart: SaddleChart, section: CrossSection,
             turns: int = 1) -> HolonomyMap:
    """Holonomy h^turns of the separatrix through the section, one positive turn per unit."""
    return HolonomyMap(family, lam, chart, section, turns)


def monodromy_residual(family: VectorFieldFamily, lam, chart: SaddleChart, sigma: CrossSection,
                       tau: CrossSection, x) -> np.ndarray:
    """|h_tau(D(e^{2 pi i} x)) - D(x)| for real x > 0."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    both = dulac(family, lam, chart, sigma, tau, np.concatenate([x, x]),
                 np.concatenate([np.full_like(x, 2 * np.pi), np.zeros_like(x)]))
    if not both.ok:
        raise TransportError(both.status, "dulac")
    n = x.size
    d_turned, d_plain = both.endpoint[:n], both.endpoint[n:]
    h = holonomy(family, lam, chart, tau, 1)
    return np.abs(h(d_turned) - d_plain)


def regular_transport(family: VectorFieldFamily, lam, src: CrossSection, z, dst: CrossSection,
                      t_guess: float, *, sign: float = 1.0, engine: LeafTransport | None = None,
                      time_steps: int = 8) -> TransportResult:
    """Transport from ``src`` to ``dst`` above a complex-time path followed by a landing leg.

    ``t_guess`` is the real flow time of a nearby real orbit; the landing leg uses
    the level function of ``dst`` as base coordinate, so it ends exactly on it.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    eng = engine or LeafTransport(family, lam, sign, chart=dst.chart)
    x0, y0 = src.point(z)
    x0 = np.asarray(x0, dtype=complex) * np.ones_like(z)
    y0 = np.asarray(y0, dtype=complex) * np.ones_like(z)
    p1 = LeafPath("time", np.linspace(0, t_guess, time_steps + 1), "regular")
    x, y, st, err, _ = eng.run(x0, y0, p1)
    if st != "ok":
        return TransportResult(np.full_like(z, np.nan), p1, st, np.inf, (x, y))
    g0 = dst.level(x, y)[0]
    p2 = LeafPath("level", np.vstack([g0, np.zeros_like(g0)]), "landing")
    x, y, st, err, _ = eng.run(x, y, p2, section=dst)
    w = dst.coordinate(x, y)
    return TransportResult(w, p2, st, err, (x, y))


def transport(family: VectorFieldFamily, lam, src: CrossSection, start, path: LeafPath,
              dst: CrossSection | None = None, *, sign: float = 1.0,
              chart: SaddleChart | None = None, **kw) -> TransportResult:
    """Follow the leaf through ``start`` on ``src`` above ``path``, then land on ``dst``."""
    ch = chart or src.chart or (dst.chart if dst is not None else None)
    eng = LeafTransport(family, lam, sign if ch is None else ch.sign, chart=ch, **kw)
    start = np.atleast_1d(np.asarray(start, dtype=complex))
    x0, y0 = src.point(start)
    x0 = np.asarray(x0, dtype=complex) * np.ones_like(start)
    y0 = np.asarray(y0, dtype=complex) * np.ones_like(start)
    x, y, st, err, _ = eng.run(x0, y0, path)
    if dst is None or st != "ok":
        return TransportResult(np.asarray([x, y]), path, st, err, (x, y), samples=eng._samples)
    g0 = dst.level(x, y)[0]
    if np.max(np.abs(g0)) > 1e-14:
        land = LeafPath("level", np.vstack([g0, np.zeros_like(g0)]), "landing")
        x, y, st, err2, _ = eng.run(x, y, land, section=dst)
        err = max(err, err2)
    return TransportResult(dst.coordinate(x, y), path, st, err, (x, y), samples=eng._samples)
