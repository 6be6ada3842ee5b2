"""Pure-numpy simulation kernels (fallback backend).

Same entry points as the compiled extension `_kernels`; the two are
kept bit-for-bit interchangeable for the stochastic kernels.  To that
end every floating-point expression here is written in the exact
evaluation order of the C code (sequential stencil accumulation,
left-associated products), only libm-identical scalar calls are used on
the rare ziggurat wedge/tail paths, and uniform draws come from the
same counter-based Philox scheme.  The deterministic mean-path kernel
uses a dot product and matches the compiled backend to rounding
reassociation (~1e-15 relative), which is documented behaviour.
"""
from __future__ import annotations

import math

import numpy as np

from . import rng

__all__ = ["mean_path_kernel", "euler_accumulate", "euler_paths"]


def mean_path_kernel(hist: np.ndarray, a: float, lags: np.ndarray,
                     weights: np.ndarray, dt: float, n_steps: int) -> np.ndarray:
    """Explicit Euler for dM/dt = a M + sum_j w_j M(t - lag_j dt).

    hist holds M on the delay window (L+1 values); returns the full
    trajectory of length L+1+n_steps including the history prefix.
    """
    L = hist.size - 1
    full = np.empty(L + 1 + n_steps)
    full[: L + 1] = hist
    lags = np.asarray(lags, dtype=np.int64)
    weights = np.asarray(weights, dtype=float)
    for k in range(n_steps):
        cur = L + k
        delay = float(np.dot(weights, full[cur - lags])) if lags.size else 0.0
        full[cur + 1] = full[cur] + dt * (a * full[cur] + delay)
    return full


def _draw_normals(step: int, paths: np.ndarray, asset: int, seed: int, stream: int,
                  cache: dict) -> np.ndarray:
    """Gaussian increments for all paths at one step (vectorized accept
    path; rare wedge/tail draws fall back to the scalar reference)."""
    entry = cache.get(asset)
    if entry is None or entry[0] != step >> 2:
        entry = (step >> 2, rng.philox4x64_vec(0, step >> 2, paths, asset, seed, stream))
        cache[asset] = entry
    w = entry[1][step & 3]
    idx = (w & np.uint64(0xFF)).astype(np.intp)
    sign = (w >> np.uint64(8)) & np.uint64(1)
    rabs = w >> np.uint64(12)
    x = rabs.astype(np.float64) * rng.zig_wi[idx]
    out = np.where(sign.astype(bool), -x, x)
    rejected = np.nonzero(rabs >= rng.zig_ki[idx])[0]
    for j in rejected:
        out[j] = rng.normal_at(seed, stream, int(paths[j]), step, asset)
    return out


def euler_accumulate(hist, a_drift, drift_lags, drift_w, sigma0,
                     vol_lags, vol_w, vol_off, wdisc, dt, n_steps,
                     seed, stream, path_lo, path_hi, antithetic,
                     kappa, eta_drift, with_deflator, probe_step,
                     payoff_out, stoch_out, minx_out, probe_out):
    """Euler-Maruyama over paths [path_lo, path_hi), streaming reductions.

    Per path: payoff = sum_k wdisc[k] * scale_k * X_k with scale the
    exact-scheme deflator when with_deflator (else 1); stoch = the
    accumulated volatility-against-increment integral; minx = running
    minimum of X; probe = X after probe_step steps.  With antithetic,
    the mirrored paths (negated increments) fill the second half of the
    output arrays.
    """
    hist = np.asarray(hist, dtype=float)
    sigma0 = np.asarray(sigma0, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    n_assets = sigma0.size
    L = hist.size - 1
    m = path_hi - path_lo
    paths = np.arange(path_lo, path_hi, dtype=np.uint64)
    sqrt_dt = math.sqrt(dt)

    sides = 2 if antithetic else 1
    ring = np.empty((sides, L + 1, m))
    for s in range(sides):
        ring[s] = hist[:, None]
    x = np.full((sides, m), hist[L])
    eta = np.ones((sides, m))
    payoff = wdisc[0] * x  # deflator is exactly 1 at the anchor time
    stoch = np.zeros((sides, m))
    minx = x.copy()
    probe = x.copy() if probe_step == 0 else np.zeros((sides, m))

    dlags = np.asarray(drift_lags, dtype=np.int64)
    dw = np.asarray(drift_w, dtype=float)
    vlags = np.asarray(vol_lags, dtype=np.int64)
    vw = np.asarray(vol_w, dtype=float)
    voff = np.asarray(vol_off, dtype=np.int64)

    cache: dict = {}
    dz = np.empty((n_assets, m))
    for k in range(n_steps):
        for i in range(n_assets):
            n_i = _draw_normals(k, paths, i, seed, stream, cache)
            dz[i] = sqrt_dt * n_i
        for s in range(sides):
            sgn = 1.0 if s == 0 else -1.0
            xl = x[s]
            delay = np.zeros(m)
            for t in range(dlags.size):
                row = (L + k - int(dlags[t])) % (L + 1)
                delay += dw[t] * ring[s, row]
            vsum = np.zeros(m)
            kd = np.zeros(m)
            for i in range(n_assets):
                v = sigma0[i] * xl
                for t in range(int(voff[i]), int(voff[i + 1])):
                    row = (L + k - int(vlags[t])) % (L + 1)
                    v = v + vw[t] * ring[s, row]
                dzi = sgn * dz[i]
                vsum += v * dzi
                kd += kappa[i] * dzi
            xn = xl + (a_drift * xl + delay) * dt + vsum
            stoch[s] += vsum
            if with_deflator:
                eta[s] *= rng.exp_small_vec(eta_drift - kd)
                payoff[s] += wdisc[k + 1] * eta[s] * xn
            else:
                payoff[s] += wdisc[k + 1] * xn
            minx[s] = np.minimum(minx[s], xn)
            if k + 1 == probe_step:
                probe[s] = xn
            ring[s, (L + k + 1) % (L + 1)] = xn
            x[s] = xn

    n_out = sides * m
    payoff_out[:n_out] = payoff.reshape(-1)
    stoch_out[:n_out] = stoch.reshape(-1)
    minx_out[:n_out] = minx.reshape(-1)
    probe_out[:n_out] = probe.reshape(-1)


def euler_paths(hist, a_drift, drift_lags, drift_w, sigma0,
                vol_lags, vol_w, vol_off, dt, n_steps,
                seed, stream, path_lo, path_hi, antithetic,
                kappa, x_out, kz_out):
    """Full-trajectory variant: x_out[(side) path, :] holds the history
    prefix (L+1 values) followed by the n_steps simulated values;
    kz_out accumulates kappa . Z on the same grid (0 on the prefix)."""
    hist = np.asarray(hist, dtype=float)
    sigma0 = np.asarray(sigma0, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    n_assets = sigma0.size
    L = hist.size - 1
    m = path_hi - path_lo
    paths = np.arange(path_lo, path_hi, dtype=np.uint64)
    sqrt_dt = math.sqrt(dt)
    sides = 2 if antithetic else 1

    dlags = np.asarray(drift_lags, dtype=np.int64)
    dw = np.asarray(drift_w, dtype=float)
    vlags = np.asarray(vol_lags, dtype=np.int64)
    vw = np.asarray(vol_w, dtype=float)
    voff = np.asarray(vol_off, dtype=np.int64)

    x_out[:, : L + 1] = hist
    kz_out[:, : L + 1] = 0.0

    cache: dict = {}
    dz = np.empty((n_assets, m))
    for k in range(n_steps):
        for i in range(n_assets):
            n_i = _draw_normals(k, paths, i, seed, stream, cache)
            dz[i] = sqrt_dt * n_i
        for s in range(sides):
            sgn = 1.0 if s == 0 else -1.0
            lo, hi = s * m, (s + 1) * m
            cur = L + k
            xl = x_out[lo:hi, cur]
            delay = np.zeros(m)
            for t in range(dlags.size):
                delay += dw[t] * x_out[lo:hi, cur - int(dlags[t])]
            vsum = np.zeros(m)
            kd = np.zeros(m)
            for i in range(n_assets):
                v = sigma0[i] * xl
                for t in range(int(voff[i]), int(voff[i + 1])):
                    v = v + vw[t] * x_out[lo:hi, cur - int(vlags[t])]
                dzi = sgn * dz[i]
                vsum += v * dzi
                kd += kappa[i] * dzi
            x_out[lo:hi, cur + 1] = xl + (a_drift * xl + delay) * dt + vsum
            kz_out[lo:hi, cur + 1] = kz_out[lo:hi, cur] + kd
