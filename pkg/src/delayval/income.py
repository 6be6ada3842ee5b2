"""Delayed labor-income model and its analytic objects.

The income process follows a linear SFDE: geometric drift/volatility
plus delay integrals of the path over the window [-d, 0] against signed
measures (drift measure phi, per-asset volatility measures phi_i).
Everything the valuation formula needs is derived here:

* the risk-adjusted delay measure  Phi = phi - sum_i kappa_i phi_i,
* the characteristic function     K(lam) = lam - a - int e^{lam s} Phi(ds),
  with a = mu0 - sigma0 . kappa,
* the discount spread             K = K(r)  (reciprocal annuity factor),
* the spectral bound lambda0, the unique real root of K when Phi >= 0,
* the memory kernel               G(s) = int_{-d}^{s} e^{-r(s-u)} Phi(du),
* the resolvent pair (f, g) used as a Laplace-transform oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .market import MarketParams
from .measures import DelayMeasure, combine_risk_adjusted

__all__ = [
    "IncomeModel",
    "HistorySegment",
    "PositivityReport",
    "PositivityError",
    "ResolventPoleError",
    "char_function",
    "discount_spread",
    "check_positivity",
    "spectral_bound",
    "memory_kernel",
    "resolvent_pair",
]


class PositivityError(RuntimeError):
    """Raised when an operation requires the positivity conditions
    (nonnegative risk-adjusted measure, positive discount spread) and
    they do not hold."""

    def __init__(self, report: "PositivityReport"):
        self.report = report
        super().__init__(f"positivity conditions violated: {report}")


class ResolventPoleError(ValueError):
    """Raised when the resolvent is requested at (numerically) a root of
    the characteristic function."""


@dataclass(frozen=True)
class PositivityReport:
    """Diagnostic for the model gate: the risk-adjusted measure must be
    nonnegative and the discount spread strictly positive for the
    closed-form valuation to apply."""

    measure_nonnegative: bool
    spread_positive: bool
    spread: float

    def ok(self) -> bool:
        return self.measure_nonnegative and self.spread_positive


@dataclass(frozen=True, eq=False)
class IncomeModel:
    """mu0: income drift (1/years, must be > 0); sigma0: volatility
    loading per asset (1/sqrt(years)); phi: drift delay measure;
    phi_vec: one volatility delay measure per asset; all measures share
    the delay window d (years)."""

    mu0: float
    sigma0: np.ndarray
    phi: DelayMeasure
    phi_vec: tuple[DelayMeasure, ...]
    d: float = field(init=False)

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError(f"income drift must be positive, got {self.mu0}")
        sigma0 = np.atleast_1d(np.asarray(self.sigma0, dtype=float))
        sigma0.setflags(write=False)
        object.__setattr__(self, "sigma0", sigma0)
        phi_vec = tuple(self.phi_vec)
        if len(phi_vec) != sigma0.size:
            raise ValueError(f"need {sigma0.size} volatility delay measures, got {len(phi_vec)}")
        d = self.phi.delay_window
        for m in phi_vec:
            if m.delay_window != d:
                raise ValueError("all delay measures must share the delay window")
        object.__setattr__(self, "phi_vec", phi_vec)
        object.__setattr__(self, "d", d)

    @property
    def n_assets(self) -> int:
        return self.sigma0.size

    def risk_adjusted_measure(self, market: MarketParams) -> DelayMeasure:
        """Phi = phi - sum_i kappa_i phi_i."""
        if market.n_assets != self.n_assets:
            raise ValueError(f"market has {market.n_assets} assets, income model {self.n_assets}")
        return combine_risk_adjusted(self.phi, self.phi_vec, market.kappa)

    def risk_adjusted_drift(self, market: MarketParams) -> float:
        """a = mu0 - sigma0 . kappa, the linear drift under the pricing measure."""
        return self.mu0 - float(self.sigma0 @ market.kappa)

    def to_json(self) -> dict:
        return {
            "mu0": self.mu0,
            "sigma0": self.sigma0.tolist(),
            "d": self.d,
            "phi": self.phi.to_json(),
            "phi_vec": [m.to_json() for m in self.phi_vec],
        }

    @classmethod
    def from_json(cls, fragment: dict) -> "IncomeModel":
        d = float(fragment["d"])
        phi = DelayMeasure.from_json(fragment["phi"], d)
        phi_vec = tuple(DelayMeasure.from_json(m, d) for m in fragment["phi_vec"])
        return cls(mu0=float(fragment["mu0"]), sigma0=fragment["sigma0"],
                   phi=phi, phi_vec=phi_vec)


@dataclass(frozen=True, eq=False)
class HistorySegment:
    """Income trajectory on [t0 - d, t0], sampled on a uniform grid.

    values[-1] is the current income X0(t0); the grid step must divide d
    exactly.  Between nodes the segment is read by linear interpolation.
    """

    t0: float
    d: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("history needs at least two values on [t0-d, t0]")
        vals = np.array(vals, copy=True)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if not self.d > 0:
            raise ValueError(f"delay window must be positive, got {self.d}")

    @property
    def dt(self) -> float:
        return self.d / (self.values.size - 1)

    @property
    def x0(self) -> float:
        """Current income level X0(t0)."""
        return float(self.values[-1])

    def grid(self) -> np.ndarray:
        """Window offsets s in [-d, 0] for each stored value."""
        return np.linspace(-self.d, 0.0, self.values.size)

    def at_offset(self, s: float) -> float:
        """Linearly interpolated value at offset s in [-d, 0]."""
        if not (-self.d <= s <= 0.0):
            raise ValueError(f"offset {s} outside [-{self.d}, 0]")
        pos = (s + self.d) / self.dt
        k = min(int(pos), self.values.size - 2)
        frac = pos - k
        return float((1.0 - frac) * self.values[k] + frac * self.values[k + 1])

    def resampled(self, dt: float) -> "HistorySegment":
        """The same segment on a grid of step dt (dt must divide d)."""
        steps = self.d / dt
        n = int(round(steps))
        if abs(steps - n) > 1e-9 * max(1, n):
            raise ValueError(f"dt={dt} does not divide the delay window {self.d}")
        if n == self.values.size - 1:
            return self
        new_vals = np.interp(np.linspace(-self.d, 0.0, n + 1), self.grid(), self.values)
        return HistorySegment(self.t0, self.d, new_vals)

    @classmethod
    def flat(cls, level: float, d: float, n_points: int = 101, t0: float = 0.0) -> "HistorySegment":
        return cls(t0, d, np.full(n_points, float(level)))

    @classmethod
    def from_function(cls, f: Callable[[float], float], d: float,
                      n_points: int = 101, t0: float = 0.0) -> "HistorySegment":
        s = np.linspace(-d, 0.0, n_points)
        return cls(t0, d, np.array([f(si) for si in s]))


# -- characteristic machinery --------------------------------------------


def char_function(model: IncomeModel, market: MarketParams, lam: float) -> float:
    """K(lam) = lam - (mu0 - sigma0 . kappa) - int e^{lam s} Phi(ds)."""
    a = model.risk_adjusted_drift(market)
    phi_ra = model.risk_adjusted_measure(market)
    return lam - a - phi_ra.exp_integral(lam)


def discount_spread(model: IncomeModel, market: MarketParams,
                    exit_intensity: float = 0.0) -> float:
    """The characteristic function at the riskless rate (plus any Poisson
    exit intensity): the reciprocal of the valuation's annuity factor."""
    return char_function(model, market, market.r + exit_intensity)


def check_positivity(model: IncomeModel, market: MarketParams,
                     exit_intensity: float = 0.0) -> PositivityReport:
    """Diagnostic gate: never raises.

    measure_nonnegative -- every atom mass and density cell of the
                           risk-adjusted measure is >= 0;
    spread_positive     -- discount spread at r + exit_intensity is > 0.
    """
    phi_ra = model.risk_adjusted_measure(market)
    spread = discount_spread(model, market, exit_intensity)
    return PositivityReport(
        measure_nonnegative=phi_ra.is_nonnegative(),
        spread_positive=spread > 0.0,
        spread=spread,
    )


def spectral_bound(model: IncomeModel, market: MarketParams,
                   tol: float = 1e-12, max_iter: int = 200) -> float:
    """The unique real root lambda0 of the characteristic function.

    Requires the risk-adjusted measure to be nonnegative (which makes
    K strictly increasing with K(-inf) = -inf, K(+inf) = +inf, so a
    bracketing search always terminates).  The root satisfies
    |K(lambda0)| <= tol * max(1, |lambda0|).
    """
    phi_ra = model.risk_adjusted_measure(market)
    if not phi_ra.is_nonnegative():
        raise ValueError("spectral bound requires a nonnegative risk-adjusted measure "
                         "(monotonicity of the characteristic function is not guaranteed "
                         "for signed measures)")
    a = model.risk_adjusted_drift(market)
    tv = phi_ra.total_variation()

    def K(x: float) -> float:
        return x - a - phi_ra.exp_integral(x)

    # K(a) = -int e^{a s} Phi(ds) <= 0; expand geometrically for the
    # upper end (and downward, defensively, in case of rounding).
    lo, hi = a - max(tv, 1e-6), a + max(tv, 1e-6)
    step = max(tv, 1e-6)
    while K(hi) <= 0.0:
        hi += step
        step *= 2.0
    step = max(tv, 1e-6)
    while K(lo) >= 0.0:
        lo -= step
        step *= 2.0

    # bisection to machine width, then a secant polish for the residual
    f_lo = K(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f_mid = K(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    root = lo if abs(K(lo)) <= abs(K(hi)) else hi
    if abs(K(root)) > tol * max(1.0, abs(root)):
        raise ArithmeticError(f"root refinement stalled: K({root}) = {K(root)}")
    return root


def memory_kernel(model: IncomeModel, market: MarketParams, s: float,
                  exit_intensity: float = 0.0) -> float:
    """G(s) = int_{-d}^{s} e^{-(r+delta)(s-u)} Phi(du), the weight of past
    income at offset s in the valuation formula."""
    phi_ra = model.risk_adjusted_measure(market)
    return phi_ra.partial_exp_integral(market.r + exit_intensity, s)


def resolvent_pair(model: IncomeModel, market: MarketParams,
                   lam: float) -> tuple[float, Callable[[float], float]]:
    """(f, g) with f = 1/K(lam) and g(s) = (1/K(lam)) int_{-d}^{s}
    e^{-lam (s-u)} Phi(du); defined only away from roots of K."""
    k_lam = char_function(model, market, lam)
    if abs(k_lam) < 1e-14:
        raise ResolventPoleError(
            f"lam={lam} is (numerically) in the spectrum: K(lam) = {k_lam}")
    phi_ra = model.risk_adjusted_measure(market)
    f = 1.0 / k_lam

    def g(s: float) -> float:
        return phi_ra.partial_exp_integral(lam, s) / k_lam

    return f, g
