"""delayval: valuation of payment streams with delayed (SFDE) dynamics
in a complete Black-Scholes market.

The closed-form value decomposes into an annuity factor times the
current payment level plus a memory-kernel integral over the trailing
trajectory; Monte Carlo simulation under both the physical and the
risk-neutral measure, a deterministic delay-ODE mean path, and a
Laplace-transform identity serve as cross-checking oracles.
"""
from ._backend import BACKEND, available_backends
from .income import (HistorySegment, IncomeModel, PositivityError,
                     PositivityReport, ResolventPoleError, char_function,
                     check_positivity, discount_spread, memory_kernel,
                     resolvent_pair, spectral_bound)
from .market import MarketParams, asset_paths, deflator_path
from .measures import DelayMeasure, WindowMismatchError, combine_risk_adjusted
from .simulation import (IncomePaths, MartingaleReport, McEstimate, SimConfig,
                         discrete_mean_value, martingale_check,
                         mc_human_capital, simulate_income)
from .valuation import (CoverageError, DivergentTransformError,
                        LaplaceCheckResult, ValuationResult, human_capital,
                        human_capital_poisson, laplace_transform_check,
                        mean_path)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "available_backends",
    "DelayMeasure", "WindowMismatchError", "combine_risk_adjusted",
    "MarketParams", "deflator_path", "asset_paths",
    "IncomeModel", "HistorySegment", "PositivityReport", "PositivityError",
    "ResolventPoleError", "char_function", "discount_spread",
    "check_positivity", "spectral_bound", "memory_kernel", "resolvent_pair",
    "ValuationResult", "CoverageError", "DivergentTransformError",
    "LaplaceCheckResult", "human_capital", "human_capital_poisson",
    "mean_path", "laplace_transform_check",
    "SimConfig", "McEstimate", "IncomePaths", "MartingaleReport",
    "simulate_income", "mc_human_capital", "martingale_check",
    "discrete_mean_value",
]
