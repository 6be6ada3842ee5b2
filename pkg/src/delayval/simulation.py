"""Euler-Maruyama simulation of the delayed income SFDE and the Monte
Carlo valuation oracle.

The simulator runs under either the physical measure (drift mu0 and the
raw drift delay measure) or the risk-neutral measure (drift mu0 -
sigma0 . kappa and the risk-adjusted measure); volatility loadings are
identical under both.  The Monte Carlo value of the income stream is
estimated per path by trapezoid quadrature of the discounted payoff up
to an automatically chosen horizon whose truncation bias is bounded
using the spectral bound.

Increments are counter-based (see rng), so estimates are a pure
function of (seed, config): thread count, chunking and scheduling do
not change a single bit of the output.  Path chunks run in parallel
threads (the compiled kernel releases the GIL); reductions happen once,
in path order, on the fully assembled arrays.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ._backend import euler_accumulate, euler_paths, mean_path_kernel
from .income import (HistorySegment, IncomeModel, PositivityError,
                     check_positivity, spectral_bound)
from .market import MarketParams
from .valuation import CoverageError

__all__ = [
    "SimConfig",
    "McEstimate",
    "IncomePaths",
    "MartingaleReport",
    "simulate_income",
    "mc_human_capital",
    "martingale_check",
    "discrete_mean_value",
]

STREAM_MAIN = 0
STREAM_PILOT = 1

_PATHS_ELEMENT_CAP = 200_000_000  # full-path storage guard (~1.6 GB)


@dataclass(frozen=True)
class SimConfig:
    """dt: step (years; must divide the delay window); n_paths: total
    path count (mirrored pairs count as two); horizon: years past the
    anchor, or None to choose automatically from the truncation bound;
    measure: "physical" or "risk_neutral"; antithetic: mirror the second
    half of the paths; n_threads: worker threads over path chunks."""

    dt: float
    n_paths: int
    seed: int
    horizon: float | None = None
    measure: str = "risk_neutral"
    antithetic: bool = False
    n_threads: int = 1
    chunk_size: int = 4096

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_paths < 2:
            raise ValueError(f"need at least 2 paths, got {self.n_paths}")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic pairing needs an even path count")
        if self.measure not in ("physical", "risk_neutral"):
            raise ValueError(f"measure must be physical or risk_neutral, got {self.measure!r}")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.n_threads < 1 or self.chunk_size < 1:
            raise ValueError("n_threads and chunk_size must be >= 1")


@dataclass(frozen=True)
class McEstimate:
    """value/std_error in currency units; truncation_tail_bound bounds
    the bias from cutting the integral at the simulated horizon."""

    value: float
    std_error: float
    n_paths: int
    truncation_tail_bound: float
    horizon: float
    dt: float
    measure: str

    def __post_init__(self):
        if self.n_paths > 1 and not self.std_error > 0:
            raise ValueError("standard error must be positive for more than one path")


@dataclass(frozen=True)
class IncomePaths:
    """t: grid times; x: income paths (n_paths, len(t)); xi: state-price
    deflator along each path's own Brownian increments."""

    t: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    measure: str


@dataclass(frozen=True)
class MartingaleReport:
    zscore: float
    mean: float
    std_error: float
    n_paths: int
    horizon: float


def _measure_drift(model: IncomeModel, market: MarketParams, measure: str):
    if measure == "physical":
        return model.mu0, model.phi
    return model.risk_adjusted_drift(market), model.risk_adjusted_measure(market)


def _stencils(model: IncomeModel, market: MarketParams, measure: str, dt: float):
    a, drift_measure = _measure_drift(model, market, measure)
    dlags, dw = drift_measure.ring_stencil(dt)
    vlags_parts, vw_parts, voff = [], [], [0]
    for m_i in model.phi_vec:
        lags_i, w_i = m_i.ring_stencil(dt)
        vlags_parts.append(lags_i)
        vw_parts.append(w_i)
        voff.append(voff[-1] + lags_i.size)
    vlags = np.concatenate(vlags_parts) if vlags_parts else np.zeros(0, dtype=np.int64)
    vw = np.concatenate(vw_parts) if vw_parts else np.zeros(0)
    return a, dlags, dw, vlags, vw, np.asarray(voff, dtype=np.int64)


def _snap_steps(horizon: float, dt: float) -> int:
    return max(1, int(math.ceil(horizon / dt - 1e-9)))


def _chunk_ranges(n: int, chunk: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def _run_accumulate(model, market, hist, cfg: SimConfig, n_steps: int,
                    wdisc: np.ndarray, with_deflator: bool, stream: int,
                    probe_step: int | None = None):
    """Chunked (optionally threaded) accumulate pass.  Returns per-path
    (payoff, stoch_integral, min_x, probe) arrays in path order."""
    h = hist.resampled(cfg.dt)
    a, dlags, dw, vlags, vw, voff = _stencils(model, market, cfg.measure, cfg.dt)
    kappa = market.kappa
    eta_drift = -(market.r + 0.5 * float(kappa @ kappa)) * cfg.dt
    n_fresh = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    if probe_step is None:
        probe_step = n_steps

    payoff = np.empty(cfg.n_paths)
    stoch = np.empty(cfg.n_paths)
    minx = np.empty(cfg.n_paths)
    probe = np.empty(cfg.n_paths)

    def run_chunk(lo: int, hi: int) -> None:
        m = hi - lo
        n_out = 2 * m if cfg.antithetic else m
        c_pay = np.empty(n_out)
        c_sto = np.empty(n_out)
        c_min = np.empty(n_out)
        c_prb = np.empty(n_out)
        euler_accumulate(h.values, a, dlags, dw, model.sigma0, vlags, vw, voff,
                         wdisc, cfg.dt, n_steps, cfg.seed, stream, lo, hi,
                         cfg.antithetic, kappa, eta_drift, with_deflator,
                         probe_step, c_pay, c_sto, c_min, c_prb)
        payoff[lo:hi] = c_pay[:m]
        stoch[lo:hi] = c_sto[:m]
        minx[lo:hi] = c_min[:m]
        probe[lo:hi] = c_prb[:m]
        if cfg.antithetic:
            payoff[n_fresh + lo:n_fresh + hi] = c_pay[m:]
            stoch[n_fresh + lo:n_fresh + hi] = c_sto[m:]
            minx[n_fresh + lo:n_fresh + hi] = c_min[m:]
            probe[n_fresh + lo:n_fresh + hi] = c_prb[m:]

    ranges = _chunk_ranges(n_fresh, cfg.chunk_size)
    if cfg.n_threads == 1 or len(ranges) == 1:
        for lo, hi in ranges:
            run_chunk(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=cfg.n_threads) as pool:
            list(pool.map(lambda r: run_chunk(*r), ranges))
    return payoff, stoch, minx, probe


def _mean_and_se(values: np.ndarray, antithetic: bool) -> tuple[float, float, int]:
    """Deterministic reduction: pairwise numpy sums in path order.  For
    antithetic runs the statistical units are the mirrored pair means."""
    if antithetic:
        half = values.size // 2
        units = 0.5 * (values[:half] + values[half:])
    else:
        units = values
    mean = float(np.mean(units))
    if units.size > 1:
        se = float(np.std(units, ddof=1) / math.sqrt(units.size))
    else:
        se = 0.0
    return mean, se, units.size


def simulate_income(model: IncomeModel, market: MarketParams, hist: HistorySegment,
                    cfg: SimConfig) -> IncomePaths:
    """Full income and deflator trajectories on [t0, t0 + horizon].

    Requires an explicit horizon.  The deflator is evaluated exactly
    (log-exact exponential) on each path's own Brownian increments.
    Memory scales with n_paths * horizon / dt; guarded at ~1.6 GB.
    """
    if cfg.horizon is None:
        raise ValueError("simulate_income needs an explicit horizon")
    if hist.d != model.d:
        raise CoverageError(
            f"history covers a window of {hist.d} years, model delay window is {model.d}")
    h = hist.resampled(cfg.dt)
    n_steps = _snap_steps(cfg.horizon, cfg.dt)
    L = h.values.size - 1
    if cfg.n_paths * (L + 1 + n_steps) > _PATHS_ELEMENT_CAP:
        raise ValueError("full-path storage would exceed the memory guard; "
                         "reduce n_paths or horizon, or use mc_human_capital")
    a, dlags, dw, vlags, vw, voff = _stencils(model, market, cfg.measure, cfg.dt)
    n_fresh = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    x_out = np.empty((cfg.n_paths, L + 1 + n_steps))
    kz_out = np.empty((cfg.n_paths, L + 1 + n_steps))

    def run_chunk(lo: int, hi: int) -> None:
        m = hi - lo
        n_out = 2 * m if cfg.antithetic else m
        cx = np.empty((n_out, L + 1 + n_steps))
        ckz = np.empty((n_out, L + 1 + n_steps))
        euler_paths(h.values, a, dlags, dw, model.sigma0, vlags, vw, voff,
                    cfg.dt, n_steps, cfg.seed, STREAM_MAIN, lo, hi,
                    cfg.antithetic, market.kappa, cx, ckz)
        x_out[lo:hi] = cx[:m]
        kz_out[lo:hi] = ckz[:m]
        if cfg.antithetic:
            x_out[n_fresh + lo:n_fresh + hi] = cx[m:]
            kz_out[n_fresh + lo:n_fresh + hi] = ckz[m:]

    ranges = _chunk_ranges(n_fresh, cfg.chunk_size)
    if cfg.n_threads == 1 or len(ranges) == 1:
        for lo, hi in ranges:
            run_chunk(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=cfg.n_threads) as pool:
            list(pool.map(lambda r: run_chunk(*r), ranges))

    t = hist.t0 + np.arange(n_steps + 1) * cfg.dt
    x = x_out[:, L:]
    kz = kz_out[:, L:]
    half_k2 = 0.5 * float(market.kappa @ market.kappa)
    xi = np.exp(-(market.r + half_k2) * (t - hist.t0) - kz)
    return IncomePaths(t=t, x=x, xi=xi, measure=cfg.measure)


def _growth_envelope(hist: HistorySegment, lam0: float) -> float:
    """C such that |history| <= C e^{lam0 s} on the window; by comparison
    the (nonnegative-measure) mean path stays below C e^{lam0 t}."""
    return float(np.max(np.abs(hist.values) * np.exp(-lam0 * hist.grid())))


def _tail_bound(growth_const: float, rate: float, horizon: float) -> float:
    return growth_const * math.exp(-rate * horizon) / rate


def mc_human_capital(model: IncomeModel, market: MarketParams, hist: HistorySegment,
                     cfg: SimConfig, exit_intensity: float = 0.0) -> McEstimate:
    """Monte Carlo value of the discounted income stream.

    physical measure:     mean of  int_0^T xi(t) X(t) e^{-delta t} dt
    risk-neutral measure: mean of  int_0^T e^{-(r+delta) t} X(t) dt

    both estimating the same value (per-path trapezoid).  The horizon
    (when cfg.horizon is None) is chosen so that the analytic truncation
    bound from the spectral bound is below 0.1 standard errors, the
    standard error being scaled up from a pilot run on a separate
    substream.  Requires the positivity gate, which also guarantees the
    discounted mean decays at rate r + delta - lambda0 > 0.
    """
    report = check_positivity(model, market, exit_intensity)
    if not report.ok():
        raise PositivityError(report)
    if hist.d != model.d:
        raise CoverageError(
            f"history covers a window of {hist.d} years, model delay window is {model.d}")
    lam0 = spectral_bound(model, market)
    rho = market.r + exit_intensity
    rate = rho - lam0
    growth_const = _growth_envelope(hist, lam0)
    with_deflator = cfg.measure == "physical"
    # discount applied per step: the deflator already carries e^{-rt}
    disc_rate = exit_intensity if with_deflator else rho

    def weights(n_steps: int) -> np.ndarray:
        t = np.arange(n_steps + 1) * cfg.dt
        w = np.full(n_steps + 1, cfg.dt)
        w[0] = w[-1] = 0.5 * cfg.dt
        return w * np.exp(-disc_rate * t)

    if cfg.horizon is not None:
        horizon = cfg.horizon
    else:
        pilot_h = max(3.0 / rate, 2.0 * model.d)
        pilot_steps = _snap_steps(pilot_h, cfg.dt)
        n_pilot = min(4096, cfg.n_paths)
        if cfg.antithetic and n_pilot % 2:
            n_pilot += 1
        pilot_cfg = replace(cfg, n_paths=n_pilot, n_threads=1)
        pay, _, _, _ = _run_accumulate(model, market, hist, pilot_cfg, pilot_steps,
                                       weights(pilot_steps), with_deflator, STREAM_PILOT)
        p_mean, p_se, _ = _mean_and_se(pay, cfg.antithetic)
        units = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
        pilot_units = n_pilot // 2 if cfg.antithetic else n_pilot
        se_scaled = p_se * math.sqrt(pilot_units / units)
        tol = max(0.1 * se_scaled, 1e-10 * max(1.0, abs(p_mean)))
        horizon = math.log(max(growth_const / (rate * tol), 1.0)) / rate
        horizon = max(horizon, pilot_h)

    n_steps = _snap_steps(horizon, cfg.dt)
    horizon = n_steps * cfg.dt
    pay, _, _, _ = _run_accumulate(model, market, hist, cfg, n_steps,
                                   weights(n_steps), with_deflator, STREAM_MAIN)
    value, se, _ = _mean_and_se(pay, cfg.antithetic)
    return McEstimate(value=value, std_error=se, n_paths=cfg.n_paths,
                      truncation_tail_bound=_tail_bound(growth_const, rate, horizon),
                      horizon=horizon, dt=cfg.dt, measure=cfg.measure)


def discrete_mean_value(model: IncomeModel, market: MarketParams, hist: HistorySegment,
                        cfg: SimConfig, exit_intensity: float = 0.0,
                        horizon: float | None = None) -> float:
    """Exact expectation of the Monte Carlo estimator under the discrete
    scheme: because the dynamics are linear, the Euler scheme's mean
    follows the deterministic delay recursion, and a measure change on
    the Gaussian increments shows the physical- and risk-neutral-measure
    estimators share this same expectation.  Used to budget the O(dt)
    discretization bias without touching the estimator itself."""
    if horizon is None:
        if cfg.horizon is None:
            raise ValueError("pass a horizon (none stored in the config)")
        horizon = cfg.horizon
    h = hist.resampled(cfg.dt)
    a, dlags, dw, _, _, _ = _stencils(model, market, "risk_neutral", cfg.dt)
    n_steps = _snap_steps(horizon, cfg.dt)
    full = mean_path_kernel(h.values, a, dlags, dw, cfg.dt, n_steps)
    m = full[h.values.size - 1:]
    t = np.arange(n_steps + 1) * cfg.dt
    w = np.full(n_steps + 1, cfg.dt)
    w[0] = w[-1] = 0.5 * cfg.dt
    rho = market.r + exit_intensity
    return float(np.dot(w * np.exp(-rho * t), m))


def martingale_check(model: IncomeModel, market: MarketParams, hist: HistorySegment,
                     cfg: SimConfig) -> MartingaleReport:
    """z-score of the mean accumulated volatility-against-increment
    integral under the risk-neutral measure (zero for a martingale).

    Runs to cfg.horizon (default: two delay windows).  No positivity
    requirement: the integral has zero mean for any finite horizon.
    """
    if hist.d != model.d:
        raise CoverageError(
            f"history covers a window of {hist.d} years, model delay window is {model.d}")
    cfg = replace(cfg, measure="risk_neutral")
    horizon = cfg.horizon if cfg.horizon is not None else 2.0 * model.d
    n_steps = _snap_steps(horizon, cfg.dt)
    wdisc = np.zeros(n_steps + 1)  # payoff unused here
    _, stoch, _, _ = _run_accumulate(model, market, hist, cfg, n_steps,
                                     wdisc, False, STREAM_MAIN)
    mean, se, n_units = _mean_and_se(stoch, cfg.antithetic)
    z = mean / se if se > 0 else 0.0
    return MartingaleReport(zscore=z, mean=mean, std_error=se,
                            n_paths=cfg.n_paths, horizon=n_steps * cfg.dt)
