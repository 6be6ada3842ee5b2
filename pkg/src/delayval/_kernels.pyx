# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels.

Bit-for-bit compatible with the numpy fallback `_kernels_py` for the
stochastic entry points: identical Philox word streams, identical
ziggurat acceptance logic (libm exp/log on the rare wedge/tail paths),
and identical floating-point evaluation order (the extension is built
with -ffp-contract=off so no FMA contraction reorders roundings).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, floor, ldexp, log, sqrt
from libc.stdint cimport int64_t, uint64_t

from . import rng as _rng

cdef extern from *:
    """
    #include <stdint.h>
    static inline void dv_mulhilo(uint64_t a, uint64_t b, uint64_t* hi, uint64_t* lo) {
        unsigned __int128 p = (unsigned __int128)a * (unsigned __int128)b;
        *hi = (uint64_t)(p >> 64);
        *lo = (uint64_t)p;
    }
    /* x * 2^k for |k| <= 1000: exact, same rounding as ldexp there */
    static inline double dv_scale2k(double x, long k) {
        union { double d; uint64_t u; } s;
        s.u = (uint64_t)(1023 + k) << 52;
        return x * s.d;
    }
    /* max_j |eta_drift - kd[j]| (for the reduction-free fast path test) */
    static double dv_absmax_arg(const double* restrict kd, ptrdiff_t m, double eta_drift) {
        double amax = 0.0;
        for (ptrdiff_t j = 0; j < m; j++) {
            double a = fabs(eta_drift - kd[j]);
            amax = fmax(amax, a);
        }
        return amax;
    }
    /* eta[j] *= exp(eta_drift - kd[j]); payoff[j] += (wk*eta[j])*xn[j],
       valid for |args| < ln2/2 where the Cody-Waite reduction of the
       reference exp is the identity (k = 0); a bare polynomial, so the
       loop SIMD-izes.  Caller guarantees the argument bound. */
    static void dv_eta_payoff_fast(double* restrict eta, const double* restrict kd,
                                   const double* restrict xn, double* restrict payoff,
                                   ptrdiff_t m, double eta_drift, double wk,
                                   const double* restrict c) {
        for (ptrdiff_t j = 0; j < m; j++) {
            double r = eta_drift - kd[j];
            double acc = c[0];
            acc = acc * r + c[1];  acc = acc * r + c[2];
            acc = acc * r + c[3];  acc = acc * r + c[4];
            acc = acc * r + c[5];  acc = acc * r + c[6];
            acc = acc * r + c[7];  acc = acc * r + c[8];
            acc = acc * r + c[9];  acc = acc * r + c[10];
            acc = acc * r + c[11];
            acc = acc * r * r + r + 1.0;
            double e = eta[j] * acc;
            eta[j] = e;
            payoff[j] += (wk * e) * xn[j];
        }
    }
    """
    void dv_mulhilo(uint64_t a, uint64_t b, uint64_t* hi, uint64_t* lo) nogil
    double dv_scale2k(double x, long k) nogil
    double dv_absmax_arg(const double* kd, Py_ssize_t m, double eta_drift) nogil
    void dv_eta_payoff_fast(double* eta, const double* kd, const double* xn,
                            double* payoff, Py_ssize_t m, double eta_drift,
                            double wk, const double* c) nogil


cdef uint64_t PHILOX_M0 = 0xD2E7470EE14C6C93u
cdef uint64_t PHILOX_M1 = 0xCA5A826395121157u
cdef uint64_t PHILOX_W0 = 0x9E3779B97F4A7C15u
cdef uint64_t PHILOX_W1 = 0xBB67AE8584CAA73Bu

# ziggurat tables and exp-poly coefficients copied from the python side
# at import so both backends share the exact same constants
cdef uint64_t ZIG_KI[256]
cdef double ZIG_WI[256]
cdef double ZIG_FI[256]
cdef double ZIG_R = 0.0
cdef double ZIG_INV_R = 0.0
cdef double EXP_C[12]
cdef double LN2_HI = 0.0
cdef double LN2_LO = 0.0
cdef double INV_LN2 = 0.0

def _init_tables():
    global ZIG_R, ZIG_INV_R, LN2_HI, LN2_LO, INV_LN2
    cdef int i
    ki = _rng.zig_ki
    wi = _rng.zig_wi
    fi = _rng.zig_fi
    for i in range(256):
        ZIG_KI[i] = <uint64_t> ki[i]
        ZIG_WI[i] = <double> wi[i]
        ZIG_FI[i] = <double> fi[i]
    poly = _rng.EXP_POLY
    for i in range(12):
        EXP_C[i] = <double> poly[i]
    ZIG_R = <double> _rng.ZIG_R
    ZIG_INV_R = 1.0 / ZIG_R
    LN2_HI = <double> _rng.LN2_HI
    LN2_LO = <double> _rng.LN2_LO
    INV_LN2 = <double> _rng.INV_LN2

_init_tables()

cdef double INV_TWO53 = 1.0 / 9007199254740992.0
cdef double SIGN_MUL[2]
SIGN_MUL[0] = 1.0
SIGN_MUL[1] = -1.0


cdef inline void philox4(uint64_t c0, uint64_t c1, uint64_t c2, uint64_t c3,
                         uint64_t k0, uint64_t k1, uint64_t* out) noexcept nogil:
    cdef uint64_t hi0, lo0, hi1, lo1, n0, n2
    cdef int r
    for r in range(10):
        dv_mulhilo(PHILOX_M0, c0, &hi0, &lo0)
        dv_mulhilo(PHILOX_M1, c2, &hi1, &lo1)
        n0 = hi1 ^ c1 ^ k0
        n2 = hi0 ^ c3 ^ k1
        c0 = n0
        c1 = lo1
        c2 = n2
        c3 = lo0
        k0 = k0 + PHILOX_W0
        k1 = k1 + PHILOX_W1
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3


cdef struct WordStream:
    uint64_t seed, stream, path, step, asset
    uint64_t buf[4]
    uint64_t jblk
    int pos


cdef inline uint64_t ws_next(WordStream* ws) noexcept nogil:
    cdef uint64_t w
    if ws.pos == 4:
        philox4(ws.jblk, ws.step, ws.path, ws.asset, ws.seed, ws.stream, ws.buf)
        ws.jblk += 1
        ws.pos = 0
    w = ws.buf[ws.pos]
    ws.pos += 1
    return w


cdef inline double normal_draw(uint64_t w, uint64_t seed, uint64_t stream,
                               uint64_t path, uint64_t step, uint64_t asset) noexcept nogil:
    """Full ziggurat state machine; first attempt uses the supplied word,
    everything after comes from the continuation blocks (j, step, path,
    asset), j = 1, 2, ...  Mirrors rng.normal_from_words exactly."""
    cdef WordStream ws
    ws.seed = seed; ws.stream = stream; ws.path = path
    ws.step = step; ws.asset = asset
    ws.jblk = 1
    ws.pos = 4
    cdef uint64_t idx, sign, rabs
    cdef double x, u, xx, yy
    while True:
        idx = w & 0xFFu
        sign = (w >> 8) & 1u
        rabs = w >> 12
        x = <double> rabs * ZIG_WI[idx]
        if rabs < ZIG_KI[idx]:
            return -x if sign else x
        if idx == 0:
            while True:
                xx = -log(1.0 - <double> (ws_next(&ws) >> 11) * INV_TWO53) * ZIG_INV_R
                yy = -log(1.0 - <double> (ws_next(&ws) >> 11) * INV_TWO53)
                if yy + yy > xx * xx:
                    x = ZIG_R + xx
                    return -x if sign else x
        else:
            u = <double> (ws_next(&ws) >> 11) * INV_TWO53
            if ZIG_FI[idx] + u * (ZIG_FI[idx - 1] - ZIG_FI[idx]) < exp(-0.5 * x * x):
                return -x if sign else x
        w = ws_next(&ws)


cdef inline double exp_small(double x) noexcept nogil:
    cdef double k = floor(x * INV_LN2 + 0.5)
    cdef double r = (x - k * LN2_HI) - k * LN2_LO
    cdef double acc = EXP_C[0]
    cdef int i
    for i in range(1, 12):
        acc = acc * r + EXP_C[i]
    acc = acc * r * r + r + 1.0
    cdef long ki = <long> k
    if -1000 <= ki <= 1000:
        return dv_scale2k(acc, ki)
    return ldexp(acc, <int> ki)


def mean_path_kernel(const double[::1] hist, double a, const int64_t[::1] lags,
                     const double[::1] weights, double dt, Py_ssize_t n_steps):
    """Explicit Euler for dM/dt = a M + sum_j w_j M(t - lag_j dt);
    returns history prefix plus n_steps new values."""
    cdef Py_ssize_t L = hist.shape[0] - 1
    out_arr = np.empty(L + 1 + n_steps)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k, t
    cdef Py_ssize_t nl = lags.shape[0]
    cdef double delay
    for i in range(L + 1):
        out[i] = hist[i]
    with nogil:
        for k in range(n_steps):
            delay = 0.0
            for t in range(nl):
                delay += weights[t] * out[L + k - lags[t]]
            out[L + k + 1] = out[L + k] + dt * (a * out[L + k] + delay)
    return out_arr


cdef void _fill_words(uint64_t* cache, Py_ssize_t m, uint64_t q, uint64_t path_lo,
                      uint64_t asset, uint64_t seed, uint64_t stream) noexcept nogil:
    # cache layout: word w of path j at cache[w * m + j]
    cdef Py_ssize_t j
    cdef uint64_t blk[4]
    for j in range(m):
        philox4(0, q, path_lo + <uint64_t> j, asset, seed, stream, blk)
        cache[j] = blk[0]
        cache[m + j] = blk[1]
        cache[2 * m + j] = blk[2]
        cache[3 * m + j] = blk[3]


def euler_accumulate(const double[::1] hist, double a_drift,
                     const int64_t[::1] drift_lags, const double[::1] drift_w,
                     const double[::1] sigma0,
                     const int64_t[::1] vol_lags, const double[::1] vol_w, const int64_t[::1] vol_off,
                     const double[::1] wdisc, double dt, Py_ssize_t n_steps,
                     uint64_t seed, uint64_t stream,
                     Py_ssize_t path_lo, Py_ssize_t path_hi, bint antithetic,
                     const double[::1] kappa, double eta_drift, bint with_deflator,
                     Py_ssize_t probe_step,
                     double[::1] payoff_out, double[::1] stoch_out,
                     double[::1] minx_out, double[::1] probe_out):
    """Streaming Euler-Maruyama; see _kernels_py.euler_accumulate."""
    cdef Py_ssize_t L = hist.shape[0] - 1
    cdef Py_ssize_t m = path_hi - path_lo
    cdef Py_ssize_t n_assets = sigma0.shape[0]
    cdef int sides = 2 if antithetic else 1
    cdef double sqrt_dt = sqrt(dt)

    ring_arr = np.empty((sides, L + 1, m))
    x_arr = np.empty((sides, m))
    eta_arr = np.ones((sides, m))
    dz_arr = np.empty((n_assets, m))
    cache_arr = np.empty((n_assets, 4, m), dtype=np.uint64)
    drow_arr = np.empty(max(drift_lags.shape[0], 1), dtype=np.int64)
    vrow_arr = np.empty(max(vol_lags.shape[0], 1), dtype=np.int64)
    kds_arr = np.empty(m)

    cdef double[:, :, ::1] ring = ring_arr
    cdef double[:, ::1] x = x_arr
    cdef double[:, ::1] eta = eta_arr
    cdef double[:, ::1] dz = dz_arr
    cdef uint64_t[:, :, ::1] wcache = cache_arr
    cdef int64_t[::1] drow = drow_arr
    cdef int64_t[::1] vrow = vrow_arr
    cdef double[::1] kds = kds_arr

    cdef Py_ssize_t s, i, j, k, t, base, rown
    cdef Py_ssize_t nd = drift_lags.shape[0]
    cdef Py_ssize_t nv = vol_lags.shape[0]
    cdef uint64_t w, rabs, idx
    cdef double xv, xl, xn, delay, v, vsum, kd, dzi, val, sgn, wk

    with nogil:
        for s in range(sides):
            for i in range(L + 1):
                xv = hist[i]
                for j in range(m):
                    ring[s, i, j] = xv
        xv = hist[L]
        for s in range(sides):
            base = s * m
            for j in range(m):
                x[s, j] = xv
                payoff_out[base + j] = wdisc[0] * xv
                stoch_out[base + j] = 0.0
                minx_out[base + j] = xv
                probe_out[base + j] = xv if probe_step == 0 else 0.0

        for k in range(n_steps):
            if (k & 3) == 0:
                for i in range(n_assets):
                    _fill_words(&wcache[i, 0, 0], m, <uint64_t> (k >> 2),
                                <uint64_t> path_lo, <uint64_t> i, seed, stream)
            for i in range(n_assets):
                for j in range(m):
                    w = wcache[i, k & 3, j]
                    idx = w & 0xFFu
                    rabs = w >> 12
                    if rabs < ZIG_KI[idx]:
                        val = (<double> rabs * ZIG_WI[idx]) * SIGN_MUL[(w >> 8) & 1u]
                    else:
                        val = normal_draw(w, seed, stream,
                                          <uint64_t> (path_lo + j),
                                          <uint64_t> k, <uint64_t> i)
                    dz[i, j] = sqrt_dt * val

            for t in range(nd):
                drow[t] = (L + k - drift_lags[t]) % (L + 1)
            for t in range(nv):
                vrow[t] = (L + k - vol_lags[t]) % (L + 1)
            rown = (L + k + 1) % (L + 1)

            for s in range(sides):
                sgn = 1.0 if s == 0 else -1.0
                base = s * m
                wk = wdisc[k + 1]
                for j in range(m):
                    xl = x[s, j]
                    delay = 0.0
                    for t in range(nd):
                        delay += drift_w[t] * ring[s, drow[t], j]
                    vsum = 0.0
                    kd = 0.0
                    for i in range(n_assets):
                        v = sigma0[i] * xl
                        for t in range(vol_off[i], vol_off[i + 1]):
                            v = v + vol_w[t] * ring[s, vrow[t], j]
                        dzi = sgn * dz[i, j]
                        vsum += v * dzi
                        kd += kappa[i] * dzi
                    xn = xl + (a_drift * xl + delay) * dt + vsum
                    stoch_out[base + j] += vsum
                    if with_deflator:
                        kds[j] = kd
                    else:
                        payoff_out[base + j] += wk * xn
                    if xn < minx_out[base + j]:
                        minx_out[base + j] = xn
                    ring[s, rown, j] = xn
                    x[s, j] = xn
                if with_deflator:
                    if dv_absmax_arg(&kds[0], m, eta_drift) < 0.34:
                        dv_eta_payoff_fast(&eta[s, 0], &kds[0], &ring[s, rown, 0],
                                           &payoff_out[base], m, eta_drift, wk,
                                           &EXP_C[0])
                    else:
                        for j in range(m):
                            val = eta[s, j] * exp_small(eta_drift - kds[j])
                            eta[s, j] = val
                            payoff_out[base + j] += (wk * val) * ring[s, rown, j]
                if k + 1 == probe_step:
                    for j in range(m):
                        probe_out[base + j] = x[s, j]


def euler_paths(const double[::1] hist, double a_drift,
                const int64_t[::1] drift_lags, const double[::1] drift_w,
                const double[::1] sigma0,
                const int64_t[::1] vol_lags, const double[::1] vol_w, const int64_t[::1] vol_off,
                double dt, Py_ssize_t n_steps,
                uint64_t seed, uint64_t stream,
                Py_ssize_t path_lo, Py_ssize_t path_hi, bint antithetic,
                const double[::1] kappa,
                double[:, ::1] x_out, double[:, ::1] kz_out):
    """Full-trajectory Euler-Maruyama; see _kernels_py.euler_paths."""
    cdef Py_ssize_t L = hist.shape[0] - 1
    cdef Py_ssize_t m = path_hi - path_lo
    cdef Py_ssize_t n_assets = sigma0.shape[0]
    cdef int sides = 2 if antithetic else 1
    cdef double sqrt_dt = sqrt(dt)

    dz_arr = np.empty((n_assets, m))
    cache_arr = np.empty((n_assets, 4, m), dtype=np.uint64)
    cdef double[:, ::1] dz = dz_arr
    cdef uint64_t[:, :, ::1] wcache = cache_arr

    cdef Py_ssize_t s, i, j, k, t, row, cur
    cdef Py_ssize_t nd = drift_lags.shape[0]
    cdef uint64_t w, rabs, idx
    cdef double xl, xn, delay, v, vsum, kd, dzi, val, sgn

    with nogil:
        for s in range(sides):
            for j in range(m):
                row = s * m + j
                for i in range(L + 1):
                    x_out[row, i] = hist[i]
                    kz_out[row, i] = 0.0

        for k in range(n_steps):
            if (k & 3) == 0:
                for i in range(n_assets):
                    _fill_words(&wcache[i, 0, 0], m, <uint64_t> (k >> 2),
                                <uint64_t> path_lo, <uint64_t> i, seed, stream)
            for i in range(n_assets):
                for j in range(m):
                    w = wcache[i, k & 3, j]
                    idx = w & 0xFFu
                    rabs = w >> 12
                    if rabs < ZIG_KI[idx]:
                        val = (<double> rabs * ZIG_WI[idx]) * SIGN_MUL[(w >> 8) & 1u]
                    else:
                        val = normal_draw(w, seed, stream,
                                          <uint64_t> (path_lo + j),
                                          <uint64_t> k, <uint64_t> i)
                    dz[i, j] = sqrt_dt * val

            cur = L + k
            for s in range(sides):
                sgn = 1.0 if s == 0 else -1.0
                for j in range(m):
                    row = s * m + j
                    xl = x_out[row, cur]
                    delay = 0.0
                    for t in range(nd):
                        delay += drift_w[t] * x_out[row, cur - drift_lags[t]]
                    vsum = 0.0
                    kd = 0.0
                    for i in range(n_assets):
                        v = sigma0[i] * xl
                        for t in range(vol_off[i], vol_off[i + 1]):
                            v = v + vol_w[t] * x_out[row, cur - vol_lags[t]]
                        dzi = sgn * dz[i, j]
                        vsum += v * dzi
                        kd += kappa[i] * dzi
                    xn = xl + (a_drift * xl + delay) * dt + vsum
                    x_out[row, cur + 1] = xn
                    kz_out[row, cur + 1] = kz_out[row, cur] + kd
