import math

import numpy as np
import pytest

from delayval import (DelayMeasure, HistorySegment, IncomeModel, MarketParams,
                      ResolventPoleError, char_function, check_positivity,
                      discount_spread, memory_kernel, resolvent_pair,
                      spectral_bound)
from util import headline_model, random_valid_model

# frozen oracle values (40-digit arithmetic, see the tests' README note)
K_HEADLINE = 0.020591089329029836461
LAM0_HEADLINE = 0.0098048609987266104204


def no_delay_model(mu0=0.01, sigma0=0.1, d=1.0):
    market = MarketParams(r=0.03, mu=[0.07], sigma=[[0.2]])
    model = IncomeModel(mu0=mu0, sigma0=[sigma0], phi=DelayMeasure.zero(d),
                        phi_vec=(DelayMeasure.zero(d),))
    return model, market


def test_char_function_without_delay():
    model, market = no_delay_model()
    a = 0.01 - 0.1 * 0.2
    for lam in (-0.5, 0.0, 0.03, 1.0):
        assert char_function(model, market, lam) == pytest.approx(lam - a, rel=1e-15)


def test_char_function_single_atom_against_oracle():
    model, market, _ = headline_model()
    assert char_function(model, market, 0.03) == pytest.approx(K_HEADLINE, rel=1e-14)


def test_char_function_increasing_for_nonnegative_measure():
    model, market, _ = headline_model()
    grid = np.linspace(-1.0, 1.0, 201)
    vals = char_function(model, market, grid)
    assert np.all(np.diff(vals) > 0)


def test_discount_spread_no_delay():
    model, market = no_delay_model()
    assert discount_spread(model, market) == pytest.approx(0.04, rel=1e-15)


def test_discount_spread_equals_char_at_r_bitwise():
    model, market, _ = headline_model()
    assert discount_spread(model, market) == char_function(model, market, market.r)
    assert discount_spread(model, market) == pytest.approx(K_HEADLINE, rel=1e-14)


def test_negative_spread_flagged():
    market = MarketParams(r=0.03, mu=[0.07], sigma=[[0.2]])
    phi = DelayMeasure.point_mass(1.0, -1.0, 0.05)
    model = IncomeModel(mu0=0.01, sigma0=[0.1], phi=phi, phi_vec=(DelayMeasure.zero(1.0),))
    rep = check_positivity(model, market)
    assert rep.measure_nonnegative
    assert not rep.spread_positive
    assert rep.spread == pytest.approx(0.04 - 0.05 * math.exp(-0.03), rel=1e-12)
    assert not rep.ok()


def test_positive_report_headline():
    model, market, _ = headline_model()
    rep = check_positivity(model, market)
    assert rep.measure_nonnegative and rep.spread_positive and rep.ok()


def test_signed_measure_flagged():
    market = MarketParams(r=0.03, mu=[0.07], sigma=[[0.2]])
    phi1 = DelayMeasure.point_mass(1.0, -1.0, 1.0)
    model = IncomeModel(mu0=0.01, sigma0=[0.0], phi=DelayMeasure.zero(1.0), phi_vec=(phi1,))
    rep = check_positivity(model, market)  # Phi = -kappa delta_{-d}, kappa > 0
    assert not rep.measure_nonnegative


def test_spectral_bound_no_delay_exact():
    model, market = no_delay_model()
    assert spectral_bound(model, market) == 0.01 - 0.1 * 0.2


def test_spectral_bound_headline_against_bisection_oracle():
    model, market, _ = headline_model()
    lam0 = spectral_bound(model, market)
    assert lam0 == pytest.approx(LAM0_HEADLINE, abs=1e-10)

    # independent oracle: plain bisection on x + 0.01 - 0.02 e^{-x}
    f = lambda x: x + 0.01 - 0.02 * math.exp(-x)
    lo, hi = 0.0, 0.02
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    assert lam0 == pytest.approx(0.5 * (lo + hi), abs=1e-10)


def test_spectral_bound_brackets_strictly():
    rng = np.random.default_rng(21)
    for _ in range(10):
        model, market = random_valid_model(rng)
        lam0 = spectral_bound(model, market)
        assert char_function(model, market, lam0 - 0.01) < 0
        assert char_function(model, market, lam0 + 0.01) > 0


def test_spectral_bound_refuses_signed_measure():
    market = MarketParams(r=0.03, mu=[0.07], sigma=[[0.2]])
    phi1 = DelayMeasure.point_mass(1.0, -1.0, 1.0)
    model = IncomeModel(mu0=0.01, sigma0=[0.0], phi=DelayMeasure.zero(1.0), phi_vec=(phi1,))
    with pytest.raises(ValueError, match="nonnegative"):
        spectral_bound(model, market)


def test_spread_sign_iff_root_below_r():
    rng = np.random.default_rng(22)
    for i in range(40):
        model, market = random_valid_model(rng, want_spread_sign=+1 if i % 3 else -1)
        spread = discount_spread(model, market)
        lam0 = spectral_bound(model, market)
        assert (spread > 0) == (lam0 < market.r)


def test_memory_kernel_single_atom():
    model, market, _ = headline_model()
    for s in (-1.0, -0.6, -0.2, 0.0):
        assert memory_kernel(model, market, s) == pytest.approx(
            0.02 * math.exp(-0.03 * (s + 1.0)), rel=1e-13)
    assert memory_kernel(model, market, -1.0) == pytest.approx(0.02, rel=1e-13)


def test_memory_kernel_zero_without_delay():
    model, market = no_delay_model()
    assert all(memory_kernel(model, market, s) == 0.0 for s in (-1.0, -0.5, 0.0))


def test_resolvent_no_delay():
    model, market = no_delay_model()
    a = 0.01 - 0.1 * 0.2
    f, g = resolvent_pair(model, market, 0.07)
    assert f == pytest.approx(1.0 / (0.07 - a), rel=1e-14)
    assert all(g(s) == 0.0 for s in (-1.0, -0.5, 0.0))


def test_resolvent_at_r_matches_memory_kernel():
    model, market, _ = headline_model()
    spread = discount_spread(model, market)
    f, g = resolvent_pair(model, market, market.r)
    assert f == pytest.approx(1.0 / spread, rel=1e-14)
    for s in np.linspace(-1.0, 0.0, 21):
        assert g(s) * spread == pytest.approx(memory_kernel(model, market, s),
                                              rel=1e-12, abs=1e-15)


def test_resolvent_pole_at_spectral_bound():
    model, market, _ = headline_model()
    lam0 = spectral_bound(model, market)
    with pytest.raises(ResolventPoleError):
        resolvent_pair(model, market, lam0)


def test_coefficients_invariant_under_history_scaling():
    # spread, root and kernel depend only on the coefficients
    model, market, hist = headline_model()
    before = (discount_spread(model, market), spectral_bound(model, market),
              memory_kernel(model, market, -0.5))
    _ = HistorySegment(hist.t0, hist.d, 7.5 * hist.values)
    after = (discount_spread(model, market), spectral_bound(model, market),
             memory_kernel(model, market, -0.5))
    assert before == after


def test_history_segment_invariants():
    h = HistorySegment(0.0, 1.0, np.linspace(0.5, 2.0, 11))
    assert h.x0 == 2.0
    assert h.dt == pytest.approx(0.1)
    assert h.at_offset(0.0) == 2.0
    assert h.at_offset(-1.0) == 0.5
    assert h.at_offset(-0.55) == pytest.approx(np.interp(-0.55, h.grid(), h.values))
    r = h.resampled(0.05)
    assert r.values.size == 21
    assert r.at_offset(-0.3) == pytest.approx(h.at_offset(-0.3))
    with pytest.raises(ValueError):
        h.resampled(0.3)


def test_income_model_validation():
    market = MarketParams(r=0.03, mu=[0.07], sigma=[[0.2]])
    with pytest.raises(ValueError, match="positive"):
        IncomeModel(mu0=0.0, sigma0=[0.1], phi=DelayMeasure.zero(1.0),
                    phi_vec=(DelayMeasure.zero(1.0),))
    with pytest.raises(ValueError, match="delay window"):
        IncomeModel(mu0=0.01, sigma0=[0.1], phi=DelayMeasure.zero(1.0),
                    phi_vec=(DelayMeasure.zero(2.0),))
    with pytest.raises(ValueError):
        model = IncomeModel(mu0=0.01, sigma0=[0.1, 0.2], phi=DelayMeasure.zero(1.0),
                            phi_vec=(DelayMeasure.zero(1.0), DelayMeasure.zero(1.0)))
        model.risk_adjusted_measure(market)  # 2 loadings vs 1-asset market
