import numpy as np
import pytest

from polycycle.locus import (holonomy_equality_points, locus_real_intersections, polish_fixed_point,
                             polyline_intersections, trace_curve)

ALPHA = 0.8


def g(z):
    return z + 0.3 * z ** 2


def g_inv(w):
    return (-1 + np.sqrt(1 + 1.2 * w)) / 0.6


def model_holonomy(k):
    # conjugate of a rotation by a real map, so {h(z) = conj z} is g^{-1} of two lines
    return lambda z: g_inv(np.exp(-2j * np.pi * k / ALPHA) * g(np.asarray(z, dtype=complex)))


@pytest.mark.parametrize("k", [1, -1])
def test_trace_follows_conjugated_line(k):
    tr = trace_curve(model_holonomy(k), k, ALPHA, 0.5)
    assert tr.status == "ok"
    assert tr.reached == pytest.approx(0.5)
    assert abs(np.sin(tr.tangent_at_origin - k * np.pi / ALPHA)) < 1e-3
    w = g(tr.points[1:])
    assert np.max(np.abs(np.sin(np.angle(w) - k * np.pi / ALPHA))) < 1e-10
    assert tr.residuals.max() < 1e-10
    ang = tr.lifted_angles()
    assert ang[0] == pytest.approx(k * np.pi / ALPHA)


def test_trace_rejects_k_zero():
    with pytest.raises(ValueError):
        trace_curve(model_holonomy(1), 0, ALPHA, 0.5)


def test_trace_csv(tmp_path):
    tr = trace_curve(model_holonomy(1), 1, ALPHA, 0.2)
    tr.to_csv(tmp_path / "t.csv")
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "s,x,y,residual" and len(rows) == len(tr.points) + 1


def test_polish_fixed_point():
    h = lambda z: 0.5 * z + 0.5 + 0.1 * (z - 1) ** 2
    assert polish_fixed_point(h, 0.7) == pytest.approx(1.0, abs=1e-13)
    assert polish_fixed_point(h, 0.7, bracket=(0.5, 1.5)) == pytest.approx(1.0, abs=1e-13)


def test_polyline_intersections():
    p = np.array([-1 - 1j, 1 + 1j])
    q = np.array([-1 + 1j, 1 - 1j])
    (z,) = polyline_intersections(p, q)
    assert abs(z) < 1e-15
    assert polyline_intersections(p, q, skip_origin=1e-3) == []


def test_real_intersections_of_a_crossing_trace():
    from polycycle.locus import CurveTrace
    pts = np.array([0, 0.1 + 0.1j, 0.3 - 0.1j, 0.5 - 0.2j])
    tr = CurveTrace(1, pts, 0.0, np.zeros(4))
    (z,) = locus_real_intersections(tr, (0.0, 1.0))
    assert z == pytest.approx(0.2)
    flat = CurveTrace(1, np.array([0, 0.1, 0.2 + 0j]), 0.0, np.zeros(3))
    assert locus_real_intersections(flat, (0.0, 1.0)) == []
    assert flat.meta["degenerate_real"]


def test_holonomy_equality_points():
    sols, info = holonomy_equality_points(lambda z: 2 * z, lambda z: z ** 2, [1.5 + 0.1j, 2.5, 3 + 1j], 3.0)
    assert len(sols) == 1 and sols[0] == pytest.approx(2.0)
