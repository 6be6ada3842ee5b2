import numpy as np
import pytest

from delayval import MarketParams, asset_paths, deflator_path


def test_scalar_market_price_of_risk():
    mp = MarketParams(r=0.02, mu=[0.06], sigma=[[0.2]])
    assert mp.kappa == pytest.approx([0.2], rel=1e-15)


def test_zero_excess_return():
    mp = MarketParams(r=0.03, mu=[0.03, 0.03], sigma=[[0.2, 0.0], [0.05, 0.3]])
    assert np.allclose(mp.kappa, 0.0)


def test_identity_volatility():
    mp = MarketParams(r=0.0, mu=[0.03, -0.01], sigma=np.eye(2))
    assert mp.kappa == pytest.approx([0.03, -0.01], rel=1e-15)


def test_kappa_residual():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        sigma = rng.normal(size=(n, n)) + 3 * np.eye(n)
        mu = rng.normal(0.05, 0.02, size=n)
        mp = MarketParams(r=0.025, mu=mu, sigma=sigma)
        resid = np.linalg.norm(sigma.T @ mp.kappa - (mu - 0.025))
        assert resid <= 1e-12 * max(np.linalg.norm(mu - 0.025), 1e-30)


def test_singular_volatility_rejected():
    with pytest.raises(ValueError):
        MarketParams(r=0.02, mu=[0.05, 0.05], sigma=[[0.2, 0.2], [0.2, 0.2]])


def test_deflator_deterministic_when_kappa_zero():
    mp = MarketParams(r=0.04, mu=[0.04], sigma=[[0.3]])
    t = np.linspace(0.0, 2.0, 9)
    z = np.zeros((9, 1))
    xi = deflator_path(mp, t, z)
    assert np.allclose(xi, np.exp(-0.04 * t), rtol=1e-15)


def test_deflator_initial_value_and_positivity():
    mp = MarketParams(r=0.03, mu=[0.07], sigma=[[0.2]])
    rng = np.random.default_rng(11)
    t = np.linspace(0.0, 1.0, 5)
    dz = rng.normal(scale=0.5, size=(100, 4, 1))
    z = np.concatenate([np.zeros((100, 1, 1)), np.cumsum(dz, axis=1)], axis=1)
    xi = deflator_path(mp, t, z)
    assert np.all(xi[:, 0] == 1.0)
    assert np.all(xi > 0)


def test_deflator_unit_mean_martingale():
    # E[xi(t) e^{rt}] = 1, Monte Carlo oracle at 3 sigma
    mp = MarketParams(r=0.03, mu=[0.08, 0.05], sigma=[[0.25, 0.0], [0.1, 0.2]])
    rng = np.random.default_rng(2024)
    n, t_end = 100_000, 1.5
    z = np.zeros((n, 2, 2))
    z[:, 1, :] = rng.normal(scale=np.sqrt(t_end), size=(n, 2))
    xi = deflator_path(mp, np.array([0.0, t_end]), z)
    vals = xi[:, 1] * np.exp(mp.r * t_end)
    se = vals.std(ddof=1) / np.sqrt(n)
    assert abs(vals.mean() - 1.0) < 3 * se


def test_deflator_same_input_same_output():
    mp = MarketParams(r=0.03, mu=[0.07], sigma=[[0.2]])
    rng = np.random.default_rng(3)
    t = np.linspace(0, 1, 11)
    z = np.concatenate([np.zeros((1, 1)), rng.normal(size=(10, 1)).cumsum(0)], axis=0) * 0.1
    a = deflator_path(mp, t, z)
    b = deflator_path(mp, t, z)
    assert np.array_equal(a, b)


def test_asset_paths_start_at_s0_and_stay_positive():
    mp = MarketParams(r=0.03, mu=[0.07], sigma=[[0.2]])
    t = np.linspace(0, 1, 11)
    rng = np.random.default_rng(4)
    z = np.concatenate([np.zeros((1, 1)), rng.normal(size=(10, 1)).cumsum(0) * 0.3], axis=0)
    s = asset_paths(mp, [100.0], t, z)
    assert s[0, 0] == pytest.approx(100.0)
    assert np.all(s > 0)
