import numpy as np
import pytest

from polycycle.bruteforce import ReturnMap, brute_force_limit_cycles
from polycycle.family import CrossSection, VectorFieldFamily


@pytest.fixture(scope="module")
def vdp():
    fam = VectorFieldFamily.from_strings("y", "-x + l1*(1 - x**2)*y", ["l1"])
    sec = CrossSection(np.array([0.0, 0.0]), 5.0, None, "line", np.array([1.0, 0.0]))
    return fam, sec


def test_van_der_pol_cycle(vdp):
    fam, sec = vdp
    res = brute_force_limit_cycles(fam, [0.1], sec, (0.5, 3.0), n=21)
    assert len(res.roots) == 1 and not res.flags
    (r,) = res.roots
    # amplitude 2 + O(l1^2)
    assert abs(r - 2.0) < 1e-2
    P, T = ReturnMap(fam, [0.1], sec)(r)
    assert P == pytest.approx(r, abs=1e-9)
    assert T == pytest.approx(2 * np.pi, rel=1e-2)


def test_harmonic_case_is_degenerate(vdp):
    fam, sec = vdp
    res = brute_force_limit_cycles(fam, [0.0], sec, (0.5, 3.0), n=11)
    assert res.degenerate and res.roots == []


def test_escaping_orbits_are_trimmed():
    # x' = y, y' = -x + y: every orbit spirals out, so nothing returns inside a small escape box
    fam = VectorFieldFamily.from_strings("y", "-x + y")
    sec = CrossSection(np.array([0.0, 0.0]), 5.0, None, "line", np.array([1.0, 0.0]))
    pm = ReturnMap(fam, [], sec, escape=3.0)
    assert np.isnan(pm(2.0)[0])
    res = brute_force_limit_cycles(fam, [], sec, (0.1, 1.0), n=5)
    assert res.roots == []
