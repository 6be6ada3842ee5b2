"""Complete Black-Scholes market block.

Holds the riskless rate, asset drift vector and volatility matrix,
derives the market price of risk at construction, and simulates the
state-price deflator exactly (log-exact scheme; no discretization error).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["MarketParams", "deflator_path", "asset_paths"]


@dataclass(frozen=True, eq=False)
class MarketParams:
    """r: riskless rate (1/years); mu: drift vector (1/years);
    sigma: volatility matrix (1/sqrt(years)).  sigma sigma^T must be
    positive definite; the market price of risk kappa = (sigma^T)^{-1}
    (mu - r 1) is cached at construction.
    """

    r: float
    mu: np.ndarray
    sigma: np.ndarray
    kappa: np.ndarray = field(init=False)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError(f"sigma must be square, got shape {sigma.shape}")
        n = sigma.shape[0]
        if mu.shape != (n,):
            raise ValueError(f"mu must have shape ({n},), got {mu.shape}")
        try:
            np.linalg.cholesky(sigma @ sigma.T)
        except np.linalg.LinAlgError:
            raise ValueError("sigma sigma^T is not positive definite") from None
        mu.setflags(write=False)
        sigma.setflags(write=False)
        kappa = np.linalg.solve(sigma.T, mu - self.r)
        kappa.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "kappa", kappa)

    @property
    def n_assets(self) -> int:
        return self.sigma.shape[0]

    def market_price_of_risk(self) -> np.ndarray:
        """kappa solving sigma^T kappa = mu - r 1 (cached)."""
        return self.kappa

    def to_json(self) -> dict:
        return {"r": self.r, "mu": self.mu.tolist(), "sigma": self.sigma.tolist()}

    @classmethod
    def from_json(cls, fragment: dict) -> "MarketParams":
        return cls(r=float(fragment["r"]), mu=fragment["mu"], sigma=fragment["sigma"])


def deflator_path(mp: MarketParams, t: np.ndarray, z_path: np.ndarray) -> np.ndarray:
    """State-price deflator along a Brownian path, simulated exactly:

        xi(t) = exp(-(r + |kappa|^2 / 2) t - kappa . Z(t))

    t      -- grid times, t[0] = 0
    z_path -- Brownian path(s) on the grid; shape (..., len(t), n) with
              z_path[..., 0, :] = 0.
    Returns xi with shape (..., len(t)); xi[..., 0] = 1 exactly.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z_path, dtype=float)
    if z.shape[-1] != mp.n_assets or z.shape[-2] != t.size:
        raise ValueError(f"z_path shape {z.shape} incompatible with grid size "
                         f"{t.size} and {mp.n_assets} assets")
    if np.any(z[..., 0, :] != 0.0):
        raise ValueError("Brownian path must start at 0 at t=0")
    kz = z @ mp.kappa
    half_k2 = 0.5 * float(mp.kappa @ mp.kappa)
    return np.exp(-(mp.r + half_k2) * t - kz)


def asset_paths(mp: MarketParams, s0: np.ndarray, t: np.ndarray,
                z_path: np.ndarray) -> np.ndarray:
    """Exact GBM asset prices along a Brownian path (demo utility).

    S_i(t) = S_i(0) exp((mu_i - |sigma_i.|^2 / 2) t + (sigma Z(t))_i).
    Shapes as in deflator_path; returns (..., len(t), n).
    """
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    t = np.asarray(t, dtype=float)
    z = np.asarray(z_path, dtype=float)
    drift = mp.mu - 0.5 * np.sum(mp.sigma**2, axis=1)
    log_s = np.log(s0) + drift * t[..., :, None] + z @ mp.sigma.T
    return np.exp(log_s)
