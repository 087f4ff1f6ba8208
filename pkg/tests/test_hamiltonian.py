from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from polycycle.hamiltonian import (HamiltonianError, HamiltonianSetup, abelian_integral, continued_integral,
                                   picard_lefschetz_imaginary, poincare_pontryagin_check, trace_oval,
                                   vanishing_cycle_integral)


@pytest.fixture(scope="module")
def bt_ham(bt):
    return bt.hamiltonian


def test_harmonic_area():
    s = HamiltonianSetup("(x**2 + y**2)/2", "-y", "x")
    for h in (0.1, 0.5, 2.0):
        assert abelian_integral(s, (), h) == pytest.approx(4 * np.pi * h, rel=1e-12)
    assert abelian_integral(replace(s, A="0"), (), 0.5) == pytest.approx(np.pi, rel=1e-12)


def test_centre_type_and_ranges(bt_ham):
    assert bt_ham.kappa == -1.0
    assert bt_ham.h_range == pytest.approx((0.0, 1 / 6))
    assert bt_ham.on_oval_side(0.1) and not bt_ham.on_oval_side(-0.01)
    s = HamiltonianSetup("y**2/2 - x**2/2 + x**3/3", "y", "0", center=(1.0, 0.0), saddle=(0.0, 0.0))
    assert s.kappa == 1.0 and s.h_range == pytest.approx((-1 / 6, 0.0))


def test_bad_setups():
    with pytest.raises(HamiltonianError):
        HamiltonianSetup("x*y", "y", "0", center=(0.0, 0.0))
    with pytest.raises(HamiltonianError):
        HamiltonianSetup("x**2 + y**2 + 1", "y", "0", saddle=(0.0, 0.0))


@pytest.mark.parametrize("h", [0.02, 0.1, 0.15])
def test_bt_oval_against_quadrature(bt_ham, h):
    g = lambda x: x * x - 2 * x ** 3 / 3 - 2 * h
    x1, x2 = brentq(g, 1e-9, 1.0), brentq(g, 1.0, 1.5)
    area = 2 * quad(lambda x: np.sqrt(max(g(x), 0.0)), x1, x2, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    # counter-clockwise oval: the integral of y dx is minus the enclosed area
    assert abelian_integral(bt_ham, [1.0], h).real == pytest.approx(-area, rel=1e-10)


def test_green_identity(bt_ham):
    a = abelian_integral(replace(bt_ham, A="0", B="x"), [1.0], 0.1)
    b = abelian_integral(bt_ham, [1.0], 0.1)
    assert a == pytest.approx(-b, rel=1e-12)
    assert abs(abelian_integral(replace(bt_ham, A="0", B="y"), [1.0], 0.1)) < 1e-12


def test_oval_lies_on_level(bt_ham):
    pts = trace_oval(bt_ham, 0.1)
    assert np.max(np.abs(bt_ham.Hf(pts[:, 0], pts[:, 1]) - 0.1)) < 1e-10
    # counter-clockwise about the centre
    z = pts[:, 0] - 1.0 + 1j * pts[:, 1]
    assert np.sum(np.angle(np.roll(z, -1) / z)) == pytest.approx(2 * np.pi, abs=1e-6)
    with pytest.raises(HamiltonianError):
        trace_oval(bt_ham, 0.2)


def test_continuation_agrees_on_oval_side(bt_ham):
    h = 0.08
    assert continued_integral(bt_ham, [1.0], complex(h)) == pytest.approx(abelian_integral(bt_ham, [1.0], h),
                                                                           rel=1e-10)


def test_morse_residue():
    s = HamiltonianSetup("x*y", "y", "0", center=None, saddle=(0.0, 0.0))
    for h in (1e-3, 0.02):
        assert abs(vanishing_cycle_integral(s, (), h)) == pytest.approx(2 * np.pi * h, rel=1e-12)


def test_picard_lefschetz(bt_ham):
    res = picard_lefschetz_imaginary(bt_ham, [1.0], [-0.05, -0.02, -0.01])
    assert all(r.ok and r.disagreement < 1e-7 for r in res)
    # frozen from two independent evaluations that agree to 4e-16
    assert res[0].im_continuation == pytest.approx(0.154111560520163, abs=1e-12)
    with pytest.raises(ValueError):
        picard_lefschetz_imaginary(bt_ham, [1.0], [0.05])


def test_pontryagin_first_order():
    s = HamiltonianSetup("(x**2 + y**2)/2", "-y", "x", ("l1",))
    out = poincare_pontryagin_check(s, [1e-2, 1e-3, 0.0], [0.1, 0.5])
    assert out["I"] == pytest.approx([0.4 * np.pi, 2 * np.pi])
    assert out["rows"][-1]["max_abs_psi"] == 0.0
    assert out["decrease_ratios"][0] > 5
