import math

import numpy as np
import pytest

from delayval import DelayMeasure, WindowMismatchError, combine_risk_adjusted


def test_atom_exp_integral():
    # unit atom at -d, f = e^{lam tau}
    m = DelayMeasure.point_mass(1.0, -1.0, 1.0)
    got = m.integrate(lambda t: math.exp(t))
    assert got == pytest.approx(math.exp(-1.0), rel=1e-15)


def test_uniform_density_against_exponential():
    m = DelayMeasure.uniform(1.0, 1.0, cells=256)
    got = m.integrate(math.exp)
    # midpoint rule: O(h^2) against the closed form 1 - e^{-1}
    assert got == pytest.approx(1.0 - math.exp(-1.0), abs=1e-5)


def test_total_mass_of_scaled_atom():
    m = DelayMeasure.point_mass(1.0, -1.0, 0.02)
    assert m.integrate(lambda t: 1.0) == pytest.approx(0.02, rel=1e-15)
    assert m.total_mass() == pytest.approx(0.02, rel=1e-15)


def test_partial_exp_integral_single_atom():
    c, r, d = 0.7, 0.04, 1.0
    m = DelayMeasure.point_mass(d, -d, c)
    for s in (-1.0, -0.5, -0.25, 0.0):
        assert m.partial_exp_integral(r, s) == pytest.approx(
            c * math.exp(-r * (s + d)), rel=1e-14)


def test_partial_exp_integral_zero_measure():
    m = DelayMeasure.zero(2.0)
    assert m.partial_exp_integral(0.3, -1.0) == 0.0


def test_partial_exp_integral_lebesgue_restriction():
    m = DelayMeasure.uniform(1.0, 1.0, cells=256)
    # lam = 0: plain mass of [-1, -0.5]
    assert m.partial_exp_integral(0.0, -0.5) == pytest.approx(0.5, rel=1e-12)


def test_partial_at_zero_matches_exp_integral():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = DelayMeasure(1.5,
                         atoms=((-1.5, rng.normal()), (float(rng.uniform(-1.5, 0)), rng.normal())),
                         density=rng.normal(size=32))
        lam = float(rng.uniform(-1, 1))
        a = m.partial_exp_integral(lam, 0.0)
        b = m.integrate(lambda t: math.exp(lam * t))
        assert a == pytest.approx(b, rel=1e-13)


def test_partial_monotone_in_s_for_nonnegative():
    rng = np.random.default_rng(8)
    m = DelayMeasure(1.0, atoms=((-1.0, 0.5), (-0.3, 0.2)),
                     density=rng.uniform(0, 1, size=64))
    s_grid = np.linspace(-1.0, 0.0, 41)
    vals = [m.partial_exp_integral(0.05, s) for s in s_grid]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


def test_integrate_linear_in_measure_and_function():
    rng = np.random.default_rng(9)
    for _ in range(10):
        m1 = DelayMeasure(1.0, atoms=((float(rng.uniform(-1, 0)), rng.normal()),),
                          density=rng.normal(size=16))
        m2 = DelayMeasure(1.0, atoms=((float(rng.uniform(-1, 0)), rng.normal()),),
                          density=rng.normal(size=16))
        a, b = rng.normal(), rng.normal()
        f = lambda t: math.sin(3 * t) + 0.5
        g = lambda t: t * t
        lhs = (m1.scaled(a) + m2.scaled(b)).integrate(f)
        assert lhs == pytest.approx(a * m1.integrate(f) + b * m2.integrate(f), rel=1e-12, abs=1e-14)
        lhs2 = m1.integrate(lambda t: a * f(t) + b * g(t))
        assert lhs2 == pytest.approx(a * m1.integrate(f) + b * m1.integrate(g), rel=1e-12, abs=1e-14)


def test_combine_risk_adjusted_single_atom():
    phi = DelayMeasure.point_mass(1.0, -1.0, 0.05)
    phi1 = DelayMeasure.point_mass(1.0, -1.0, 0.15)
    out = combine_risk_adjusted(phi, [phi1], [0.2])
    assert out.atoms == ((-1.0, pytest.approx(0.02, rel=1e-15)),)


def test_combine_with_zero_vector_is_identity():
    phi = DelayMeasure(1.0, atoms=((-0.4, 0.3),), density=np.full(8, 0.1))
    out = combine_risk_adjusted(phi, [DelayMeasure.zero(1.0)], [0.7])
    assert out == phi


def test_combine_sign_flip():
    phi = DelayMeasure.zero(1.0)
    phi1 = DelayMeasure.point_mass(1.0, -1.0, 1.0)
    out = combine_risk_adjusted(phi, [phi1], [1.0])
    assert out.atoms == ((-1.0, -1.0),)
    assert not out.is_nonnegative()


def test_combine_window_mismatch():
    phi = DelayMeasure.point_mass(1.0, -1.0, 1.0)
    phi1 = DelayMeasure.point_mass(2.0, -1.0, 1.0)
    with pytest.raises(WindowMismatchError):
        combine_risk_adjusted(phi, [phi1], [1.0])


def test_total_variation_and_sign():
    m = DelayMeasure(1.0, atoms=((-1.0, -0.3), (-0.2, 0.1)), density=np.full(4, -2.0))
    assert m.total_variation() == pytest.approx(0.3 + 0.1 + 2.0, rel=1e-14)
    assert not m.is_nonnegative()
    assert m.total_mass() == pytest.approx(-0.3 + 0.1 - 2.0, rel=1e-14)


def test_atom_locations_validated():
    with pytest.raises(ValueError):
        DelayMeasure(1.0, atoms=((-1.5, 1.0),))
    with pytest.raises(ValueError):
        DelayMeasure(1.0, atoms=((0.5, 1.0),))


def test_ring_stencil_atoms_on_and_off_grid():
    m = DelayMeasure(1.0, atoms=((-1.0, 2.0), (-0.255, 1.0)))
    lags, w = m.ring_stencil(0.01)
    got = dict(zip(lags.tolist(), w.tolist()))
    assert got[100] == pytest.approx(2.0)
    # -0.255 sits halfway between lags 25 and 26
    assert got[25] == pytest.approx(0.5)
    assert got[26] == pytest.approx(0.5)


def test_ring_stencil_density_mass_is_preserved():
    m = DelayMeasure.uniform(1.0, 3.0, cells=16)
    lags, w = m.ring_stencil(0.05)
    assert w.sum() == pytest.approx(3.0, rel=1e-12)


def test_ring_stencil_rejects_nondividing_step():
    m = DelayMeasure.point_mass(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        m.ring_stencil(0.03)


def test_json_roundtrip():
    m = DelayMeasure(1.0, atoms=((-1.0, 0.02), (-0.5, -0.01)), density=np.full(8, 0.25))
    again = DelayMeasure.from_json(m.to_json(), 1.0)
    assert again == m
