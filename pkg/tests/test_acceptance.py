"""Acceptance criteria, each at its stated tolerance; a summary line per criterion is printed at the end."""
import json
import time

import numpy as np
import pytest

from polycycle.cli import EXIT_OK, main
from polycycle.counter import ArcSegment, CountingDomain, LineSegment, argument_variation
from polycycle.hamiltonian import picard_lefschetz_imaginary, poincare_pontryagin_check
from polycycle.locus import trace_locus
from polycycle.transport import dulac, holonomy, monodromy_residual

BT_SAMPLES = [(0.0, 0.0), (-0.087, 0.1), (0.05, -0.05), (-0.02, 0.03), (0.01, 0.02)]
PENDULUM_SAMPLES = [(0.0, 0.0), (0.0264, -0.01), (0.01, 0.0), (-0.02, 0.01), (0.005, 0.005)]


def test_1_linear_model_exactness(linear, criterion):
    t0 = time.time()
    rho, phi = np.meshgrid(np.geomspace(1e-3, 1e-1, 9), np.linspace(-2 * np.pi, 2 * np.pi, 9))
    rho, phi = rho.ravel(), phi.ravel()
    worst_rel, worst_der = 0.0, 0.0
    for a in (0.5, 1.0, 2.0, np.e):
        ch, s, t = linear.build_chart([a])
        c1, c2 = s.anchor, t.anchor
        assert c1 == c2 == 1.0
        r = dulac(linear.family, [a], ch, s, t, rho, phi)
        exact = c1 * c2 ** (-a) * np.exp(a * (np.log(rho) + 1j * phi))
        worst_rel = max(worst_rel, float(np.max(np.abs(r.endpoint - exact) / np.abs(exact))))
        for sec, ref in ((s, np.exp(-2j * np.pi / a)), (t, np.exp(-2j * np.pi * a))):
            d = holonomy(linear.family, [a], ch, sec).derivative(0.0)[0]
            worst_der = max(worst_der, abs(d - ref))
    dt = time.time() - t0
    ok = worst_rel < 1e-8 and worst_der < 1e-6 and dt < 60
    criterion(1, ok, f"max rel. Dulac error {worst_rel:.2e} (< 1e-8), max holonomy derivative error "
                     f"{worst_der:.2e} (< 1e-6), {dt:.1f} s")
    assert ok


def test_2_monodromy_identity(bt, pendulum, criterion):
    t0 = time.time()
    worst = 0.0
    for cfg, samples in ((bt, BT_SAMPLES), (pendulum, PENDULUM_SAMPLES)):
        for lam in samples:
            for corner in range(len(cfg.loop.saddles)):
                ch, s, t = cfg.build_chart(list(lam), corner)
                x = np.geomspace(1e-3 * s.radius, 0.9 * s.radius, 20)
                worst = max(worst, float(monodromy_residual(cfg.family, list(lam), ch, s, t, x).max()))
    dt = time.time() - t0
    ok = worst < 1e-7 and dt < 300
    criterion(2, ok, f"max monodromy residual {worst:.2e} (< 1e-7) over 10 parameter samples, {dt:.1f} s")
    assert ok


def test_3_locus_properties(bt, pendulum, criterion):
    t0 = time.time()
    worst_angle, worst_im = 0.0, 0.0
    for cfg, lam in ((bt, [-0.087, 0.1]), (pendulum, [0.0264, -0.01])):
        ch, s, tau = cfg.build_chart(lam)
        for k in (1, -1):
            tr = trace_locus(cfg.family, lam, ch, s, k, s.radius)
            assert tr.status == "ok"
            dev = np.angle(np.exp(1j * (tr.tangent_at_origin - k * np.pi / ch.alpha)))
            worst_angle = max(worst_angle, abs(dev))
            # D is real on the lifted locus
            d = dulac(cfg.family, lam, ch, s, tau, np.abs(tr.points[1:]), tr.lifted_angles()[1:])
            worst_im = max(worst_im, float(np.max(np.abs(d.endpoint.imag))))
    dt = time.time() - t0
    ok = worst_angle < 1e-3 and worst_im < 1e-6 and dt < 300
    criterion(3, ok, f"max tangent deviation {worst_angle:.2e} rad (< 1e-3), max |Im D| on loci "
                     f"{worst_im:.2e} (< 1e-6), {dt:.1f} s")
    assert ok


def _staircase_domain(rng):
    """Star-shaped domain of circular arcs about a random centre joined by radial segments."""
    n = int(rng.integers(3, 7))
    th = np.sort(rng.uniform(0, 2 * np.pi, n))
    th = np.append(th, th[0] + 2 * np.pi)
    r = rng.uniform(0.5, 1.5, n)
    c = complex(*rng.uniform(-0.3, 0.3, 2))
    segs = []
    for i in range(n):
        j = (i + 1) % n
        segs.append(ArcSegment(c, r[i], th[i], th[i + 1]))
        segs.append(LineSegment(c + r[i] * np.exp(1j * th[i + 1]), c + r[j] * np.exp(1j * th[i + 1])))

    def inside(z):
        d = z - c
        a = np.mod(np.angle(d) - th[0], 2 * np.pi) + th[0]
        return abs(d) < r[np.searchsorted(th, a) - 1]

    return CountingDomain("model", 1.5, segs, []), inside


def test_4_argument_principle_sandwich(criterion):
    t0 = time.time()
    rng = np.random.default_rng(20240611)
    failures, n_boundary = 0, 0
    for _ in range(10):
        dom, inside = _staircase_domain(rng)
        assert dom.closure_gap() < 1e-12
        for j in range(5):
            deg = int(rng.integers(1, 7))
            roots = list(rng.uniform(-1.6, 1.6, deg) + 1j * rng.uniform(-1.6, 1.6, deg))
            on = 0
            if j == 4:
                # one root placed on the boundary
                seg = dom.segments[int(rng.integers(len(dom.segments)))]
                roots[0] = complex(seg.z(rng.uniform(0.2, 0.8)))
                on, n_boundary = 1, n_boundary + 1
            lead = complex(*rng.normal(size=2))

            def p(z, lifts, roots=roots, lead=lead):
                return lead * np.prod([z - q for q in roots], axis=0)

            inc = argument_variation(p, dom)[4]
            var = float(np.sum(inc))
            zd = sum(bool(inside(q)) for q in roots[on:])
            if not 2 * np.pi * zd - 1e-9 <= var <= 2 * np.pi * (zd + on) + 1e-9:
                failures += 1
    dt = time.time() - t0
    ok = failures == 0 and dt < 120
    criterion(4, ok, f"{50 - failures}/50 polynomials satisfy the sandwich on 10 domains "
                     f"({n_boundary} with a boundary root), {dt:.1f} s")
    assert ok


def test_5_hamiltonian_identities(bt, criterion):
    t0 = time.time()
    setup = bt.hamiltonian
    pl = picard_lefschetz_imaginary(setup, [1.0], [-0.05, -0.03, -0.02, -0.01, -0.005])
    worst_pl = max(r.disagreement for r in pl)
    h_grid = np.linspace(0.2, 0.8, 5) * setup.h_center
    pp = poincare_pontryagin_check(setup, [1e-2, 1e-3, 1e-4], h_grid)
    ratios = pp["decrease_ratios"]
    dt = time.time() - t0
    ok = worst_pl < 1e-6 and min(ratios) >= 5 and dt < 600
    criterion(5, ok, f"Picard-Lefschetz disagreement {worst_pl:.2e} (< 1e-6); Poincare-Pontryagin deviation "
                     f"ratios {', '.join(f'{r:.2f}' for r in ratios)} (>= 5), {dt:.1f} s")
    assert ok


@pytest.fixture(scope="module")
def shipped_counts(families_dir, tmp_path_factory):
    out = {}
    t0 = time.time()
    for name in ("bogdanov_takens", "pendulum"):
        d = tmp_path_factory.mktemp(name)
        code = main(["count", "--family", str(families_dir / f"{name}.yaml"), "--check-bruteforce",
                     "--out-dir", str(d), "--no-svg"])
        out[name] = (code, [json.loads(p.read_text()) for p in sorted(d.glob("count_*.json"))])
    return out, time.time() - t0


def test_6_count_consistency(shipped_counts, criterion):
    runs, dt = shipped_counts
    lines, ok = [], dt < 900
    for name, (code, reports) in runs.items():
        ok &= code == EXIT_OK and len(reports) == 3
        for r in reports:
            cb, nb = r["report"]["count_bound"], len(r["bruteforce"]["roots"])
            flags = len(r["report"]["boundary_zero_flags"])
            ok &= cb == nb and flags == 0
            lines.append(f"{name} {r['lambda']}: {cb} vs {nb}")
    criterion(6, ok, f"count_bound vs brute force: {'; '.join(lines)}; {dt:.1f} s")
    assert ok


def test_7_degenerate_guard(families_dir, tmp_path, criterion, capsys):
    code = main(["count", "--family", str(families_dir / "bogdanov_takens.yaml"), "--lambda", "0,0",
                 "--perturb", "1e-3", "--out-dir", str(tmp_path), "--no-svg"])
    rep = json.loads((tmp_path / "count_000.json").read_text())["report"]
    tripped = any("guard tripped" in n for n in rep["notes"])
    ok = code == EXIT_OK and tripped and rep["perturbed"] and rep["status"] == "ok"
    criterion(7, ok, f"unbroken loop: guard tripped={tripped}, retry status={rep['status']}, "
                     f"count_bound={rep['count_bound']}, exit {code}")
    assert ok
