"""Counter-based random numbers for reproducible parallel simulation.

The generator is Philox-4x64 with 10 rounds.  Every Gaussian increment
of the simulation is addressed by (seed, stream, path, step, asset), so
draws are a pure function of those coordinates: results do not depend
on thread count, chunking, or evaluation order.

Word-stream convention (shared bit-for-bit by the compiled kernel and
the numpy fallback):

* key      = (seed, stream); stream 0 is the main simulation, stream 1
  the horizon-calibration pilot.
* primary word for (path p, step k, asset i):
      word (k mod 4) of the block with counter (0, k // 4, p, i)
  -- four consecutive steps share one block, so the common case costs a
  quarter of a Philox block per normal.
* if the ziggurat draw needs more randomness (wedge/tail, ~1-2% of
  draws), it continues with the words of blocks (j, k, p, i) for
  j = 1, 2, ...

Normals come from a 256-region ziggurat built at import from the frozen
layout constants below.  The accept path uses only integer compares and
one multiply, so the compiled kernel and the fallback produce identical
bits; the rare wedge/tail paths call libm exp/log in both backends.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "PHILOX_M0", "PHILOX_M1", "PHILOX_W0", "PHILOX_W1",
    "philox4x64", "philox4x64_vec",
    "ZIG_R", "ZIG_V", "zig_ki", "zig_wi", "zig_fi",
    "normal_from_words", "uniform53",
    "EXP_POLY", "LN2_HI", "LN2_LO", "INV_LN2", "exp_small", "exp_small_vec",
]

_M64 = (1 << 64) - 1

PHILOX_M0 = 0xD2E7470EE14C6C93
PHILOX_M1 = 0xCA5A826395121157
PHILOX_W0 = 0x9E3779B97F4A7C15
PHILOX_W1 = 0xBB67AE8584CAA73B


def philox4x64(c0: int, c1: int, c2: int, c3: int, k0: int, k1: int) -> tuple[int, int, int, int]:
    """One Philox-4x64-10 block (scalar, arbitrary-precision ints).

    Matches numpy's Philox bijection: numpy's stream for counter c
    starts at the block of c+1.
    """
    k0 &= _M64
    k1 &= _M64
    for _ in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        c0 = ((p1 >> 64) ^ c1 ^ k0) & _M64
        c1 = p1 & _M64
        c2 = ((p0 >> 64) ^ c3 ^ k1) & _M64
        c3 = p0 & _M64
        k0 = (k0 + PHILOX_W0) & _M64
        k1 = (k1 + PHILOX_W1) & _M64
    return c0, c1, c2, c3


def _mulhilo_vec(a: int, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(high, low) 64-bit halves of a * b for uint64 arrays."""
    a = np.uint64(a)
    mask = np.uint64(0xFFFFFFFF)
    ah, al = a >> np.uint64(32), a & mask
    bh, bl = b >> np.uint64(32), b & mask
    ll = al * bl
    t1 = ah * bl + (ll >> np.uint64(32))
    t2 = al * bh + (t1 & mask)
    hi = ah * bh + (t1 >> np.uint64(32)) + (t2 >> np.uint64(32))
    lo = a * b
    return hi, lo


def philox4x64_vec(c0, c1, c2, c3, k0: int, k1: int) -> tuple[np.ndarray, ...]:
    """Philox-4x64-10 blocks for arrays of counters (vectorized).

    Counter components may be scalars or uint64 arrays (broadcast).
    Returns the four output words as uint64 arrays.
    """
    c0, c1, c2, c3 = np.broadcast_arrays(
        np.asarray(c0, dtype=np.uint64), np.asarray(c1, dtype=np.uint64),
        np.asarray(c2, dtype=np.uint64), np.asarray(c3, dtype=np.uint64))
    c0, c1, c2, c3 = c0.copy(), c1.copy(), c2.copy(), c3.copy()
    k0 = np.uint64(k0 & _M64)
    k1 = np.uint64(k1 & _M64)
    w0 = np.uint64(PHILOX_W0)
    w1 = np.uint64(PHILOX_W1)
    with np.errstate(over="ignore"):  # uint64 arithmetic wraps by design
        for _ in range(10):
            hi0, lo0 = _mulhilo_vec(PHILOX_M0, c0)
            hi1, lo1 = _mulhilo_vec(PHILOX_M1, c2)
            c0 = hi1 ^ c1 ^ k0
            c1 = lo1
            c2 = hi0 ^ c3 ^ k1
            c3 = lo0
            k0 = k0 + w0
            k1 = k1 + w1
    return c0, c1, c2, c3


# -- ziggurat ---------------------------------------------------------------
#
# 256-region layout for f(x) = exp(-x^2/2): region 0 is the base strip
# carrying the tail beyond ZIG_R; regions 1..255 are rectangles of equal
# area ZIG_V.  The layout constants are frozen (solved once to machine
# precision); the tables are rebuilt deterministically at import.

ZIG_R = float.fromhex("0x1.d3bb48209ad34p+1")  # 3.6541528853610092
ZIG_V = float.fromhex("0x1.43016a5a4372ap-8")  # 0.004928673233974648

_TWO52 = float(1 << 52)
_INV_TWO53 = 1.0 / float(1 << 53)


def _build_tables() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    f = lambda x: math.exp(-0.5 * x * x)
    xs = np.empty(256)
    xs[255] = ZIG_R
    for i in range(255, 0, -1):
        xs[i - 1] = math.sqrt(-2.0 * math.log(f(xs[i]) + ZIG_V / xs[i]))
    ki = np.empty(256, dtype=np.uint64)
    wi = np.empty(256)
    fi = np.exp(-0.5 * xs * xs)
    base = ZIG_V / f(ZIG_R)
    ki[0] = np.uint64(int((ZIG_R / base) * _TWO52))
    wi[0] = base / _TWO52
    ki[1] = np.uint64(0)
    wi[1] = xs[1] / _TWO52
    for i in range(2, 256):
        ki[i] = np.uint64(int((xs[i - 1] / xs[i]) * _TWO52))
        wi[i] = xs[i] / _TWO52
    # region i rectangle is [0, xs[i]] x [fi[i], fi[i-1]]; fi[0] plays the
    # role of f at the innermost edge (x ~ 0, f = 1) for region 1's wedge.
    fi[0] = 1.0
    return ki, wi, fi


zig_ki, zig_wi, zig_fi = _build_tables()
_ZIG_INV_R = 1.0 / ZIG_R


def uniform53(word: int) -> float:
    """Uniform double in [0, 1) from the top 53 bits of a word."""
    return (word >> 11) * _INV_TWO53


def normal_from_words(words) -> float:
    """Standard normal from a word iterator (the scalar reference path).

    Consumes one word per attempt; the wedge test consumes one extra
    word, each tail iteration two.  The compiled kernel implements the
    identical consumption sequence.
    """
    ki, wi, fi = zig_ki, zig_wi, zig_fi
    while True:
        w = next(words)
        idx = w & 0xFF
        sign = (w >> 8) & 1
        rabs = w >> 12
        x = rabs * wi[idx]
        if rabs < int(ki[idx]):
            return -x if sign else x
        if idx == 0:
            while True:
                xx = -math.log(1.0 - uniform53(next(words))) * _ZIG_INV_R
                yy = -math.log(1.0 - uniform53(next(words)))
                if yy + yy > xx * xx:
                    out = ZIG_R + xx
                    return -out if sign else out
        else:
            u = uniform53(next(words))
            if fi[idx] + u * (fi[idx - 1] - fi[idx]) < math.exp(-0.5 * x * x):
                return -x if sign else x


def normal_word_stream(seed: int, stream: int, path: int, step: int, asset: int):
    """The word stream backing normal draws at (path, step, asset)."""
    blk = philox4x64(0, step >> 2, path, asset, seed, stream)
    yield blk[step & 3]
    j = 1
    while True:
        blk = philox4x64(j, step, path, asset, seed, stream)
        yield from blk
        j += 1


def normal_at(seed: int, stream: int, path: int, step: int, asset: int = 0) -> float:
    """The Gaussian increment for given coordinates (scalar reference)."""
    return normal_from_words(normal_word_stream(seed, stream, path, step, asset))


# -- exp for small arguments -------------------------------------------------
#
# exp via Cody-Waite reduction and a degree-13 Taylor polynomial; used
# for the per-step multiplicative deflator update so the compiled kernel
# and the fallback agree bit-for-bit (libm exp may differ across numpy's
# vectorized and C's scalar code paths; this one is plain IEEE ops).
# Max relative error ~2 ulp on |x| <= 700.

LN2_HI = float.fromhex("0x1.62e42fefa39efp-1")
LN2_LO = float.fromhex("0x1.abc9e3b39803fp-56")
INV_LN2 = float.fromhex("0x1.71547652b82fep+0")

EXP_POLY = tuple(1.0 / math.factorial(k) for k in range(13, 1, -1))  # 1/13! .. 1/2!


def exp_small(x: float) -> float:
    k = min(max(math.floor(x * INV_LN2 + 0.5), -1000.0), 1000.0)
    r = (x - k * LN2_HI) - k * LN2_LO
    acc = EXP_POLY[0]
    for c in EXP_POLY[1:]:
        acc = acc * r + c
    acc = acc * r * r + r + 1.0
    return math.ldexp(acc, int(k))


def exp_small_vec(x: np.ndarray) -> np.ndarray:
    k = np.clip(np.floor(x * INV_LN2 + 0.5), -1000.0, 1000.0)
    r = (x - k * LN2_HI) - k * LN2_LO
    acc = np.full_like(r, EXP_POLY[0])
    for c in EXP_POLY[1:]:
        acc = acc * r + c
    acc = acc * r * r + r + 1.0
    return np.ldexp(acc, k.astype(np.int64))
