import numpy as np
import pytest

from polycycle.cli import _bruteforce_for
from polycycle.loops import ModelDisplacement, select_case


def test_select_case():
    assert select_case(1.0, 1.0) == ("two-saddle-case-B", False, 1.0, 1.0)
    kind, swapped, a1, a2 = select_case(0.5, 0.5)
    assert kind == "two-saddle-case-A" and swapped and a2 == pytest.approx(2.0)
    assert select_case(3.0, 0.5)[0] == "two-saddle-case-B"


def test_model_displacement_limits():
    psi = ModelDisplacement(lambda z, l: z - 0.25, [0.0, 0.1])
    assert psi.limits() == [pytest.approx(-0.25), pytest.approx(-0.15)]
    psi.shift = 1.0
    assert psi(np.array([0.25]), np.zeros((2, 1)))[0] == pytest.approx(1.0)


@pytest.fixture(scope="module")
def bt_psi(bt):
    lam = [-0.087, 0.1]
    return lam, bt.build_displacement(lam)


def test_one_saddle_orientation(bt_psi):
    lam, psi = bt_psi
    assert psi.kind == "one-saddle"
    # alpha > 1 at this parameter, so time is reversed to bring the Dulac ratio below one
    assert psi.meta["sign"] == -1.0 and psi.meta["alpha"] < 1.0
    assert psi.punctures == [0.0]


def test_one_saddle_zero_matches_return_map(bt, bt_psi):
    lam, psi = bt_psi
    bf, _ = _bruteforce_for(bt, lam, psi, window=(1e-4, 0.06))
    (r,) = bf.roots
    v = psi.real_values(np.array([0.9 * r, r, 1.1 * r]))
    assert abs(v[1]) < 1e-10
    assert np.real(v[0]) * np.real(v[2]) < 0
    assert np.max(np.abs(np.imag(v))) < 1e-12


def test_displacement_is_real_symmetric(bt_psi):
    lam, psi = bt_psi
    z = np.array([0.02 + 0.01j, 0.03 + 0.02j])
    lifts = np.angle(z)[None, :]
    a = psi(z, lifts)
    b = psi(np.conj(z), -lifts)
    np.testing.assert_allclose(b, np.conj(a), atol=1e-11)


def test_two_saddle_punctures_ordered(pendulum):
    psi = pendulum.build_displacement([0.01, 0.0])
    assert psi.kind == "two-saddle-case-B"
    s1, s2 = psi.punctures
    assert s1 < s2
    # saddle eigenvalues (l1 +- sqrt(l1^2 + 4)) / 2; the corners run in opposite time directions
    q = np.sqrt(0.01 ** 2 + 4)
    a = (q - 0.01) / (q + 0.01)
    assert sorted(c.alpha for c in psi.corners) == [pytest.approx(a, rel=1e-12), pytest.approx(1 / a, rel=1e-12)]
