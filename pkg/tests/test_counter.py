import numpy as np
import pytest

from polycycle.counter import (ArcSegment, CountingDomain, DomainError, LineSegment, PolylineSegment,
                               WindingConfig, argument_variation, build_domain_from_traces, winding)
from polycycle.locus import CurveTrace
from polycycle.loops import ModelDisplacement


def disc(R=1.0, center=0.0):
    return CountingDomain("model", R, [ArcSegment(center, R, 0.0, 2 * np.pi)], [])


def ray(k, alpha, R, origin=0.0):
    th = k * np.pi / alpha
    pts = origin + np.linspace(0, 1.5 * R, 40) * np.exp(1j * th)
    return CurveTrace(k, pts, th, np.zeros(40), expected_angle=th, origin=origin)


def test_segments_and_closure():
    dom = CountingDomain("model", 1.0, [LineSegment(-1, 1), ArcSegment(0, 1, 0, np.pi)], [])
    assert dom.closure_gap() < 1e-15
    assert dom.signed_area() == pytest.approx(np.pi / 2, rel=1e-3)
    seg = PolylineSegment(np.array([1.0, 1j, -1.0]), center=0.0)
    # log-polar interpolation stays on the unit circle and keeps the vertices
    assert np.allclose(np.abs(seg.z(np.linspace(0, 1, 11))), 1.0)
    assert seg.z(0.5) == pytest.approx(1j)


def test_argument_variation_counts_roots():
    roots = [0.2 + 0.1j, -0.5j, 0.7, 1.5]
    f = lambda z, lifts: np.prod([z - r for r in roots], axis=0)
    _, z, lifts, v, inc, seg_id, offs = argument_variation(f, disc())
    assert np.sum(inc) / (2 * np.pi) == pytest.approx(3, abs=1e-9)
    assert np.max(np.abs(inc)) <= np.pi / 2


def test_winding_model_and_report_fields():
    psi = ModelDisplacement(lambda z, l: (z - 0.3) * (z + 0.4j))
    rep = winding(psi, disc())
    assert rep.count_bound == 2 and rep.status == "ok"
    assert rep.integrality_defect < 1e-9
    assert rep.half_density_variation == pytest.approx(rep.total_variation, abs=1e-6)
    d = rep.to_dict()
    assert "boundary" not in d and d["count_bound"] == 2


def test_guard_and_perturb_retry():
    psi = ModelDisplacement(lambda z, l: z - 1.0)
    rep = winding(psi, disc())
    assert rep.status == "flagged" and rep.boundary_zero_flags
    assert any("perturb" in n for n in rep.notes)
    rep = winding(psi, disc(), WindingConfig(perturb=0.05))
    assert rep.status == "ok" and rep.perturbed and rep.count_bound == 1
    assert psi.shift == 0.0


def test_cover_domain_from_loci():
    alpha, R, c = 0.8, 0.5, 0.01
    dom = build_domain_from_traces("one-saddle", R, [0.0], ray(1, alpha, R), ray(-1, alpha, R), excision=1e-7)
    assert dom.closure_gap() < 1e-12
    # z^alpha - c has one zero on the sector |arg z| < pi/alpha of the cover; (z - 0.2) adds one more

    def f(z, lifts):
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.exp(alpha * (np.log(np.abs(z)) + 1j * lifts[0]))
        return (w - c) * (z - 0.2)

    rep = winding(ModelDisplacement(f, [0.0]), dom)
    assert rep.count_bound == 2
    assert rep.status == "ok"


def test_slit_domain_between_punctures():
    alpha, R = 1.0, 0.5
    dom = build_domain_from_traces("two-saddle-case-B", R, [-0.05, 0.05], ray(1, alpha, R, -0.05), ray(-1, alpha, R, -0.05),
                                   excision=1e-6)
    assert [s.label for s in dom.segments][3:] == ["s1+", "[s1,s2]+", "s2", "[s1,s2]-", "s1-"]
    f = lambda z, lifts: (z - 0.3) * (z - 0.2 - 0.1j)
    assert winding(ModelDisplacement(f, [-0.05, 0.05]), dom).count_bound == 2


def test_domain_requires_long_traces():
    short = ray(1, 1.0, 0.1)
    with pytest.raises(DomainError):
        build_domain_from_traces("one-saddle", 1.0, [0.0], short, ray(-1, 1.0, 0.1))
