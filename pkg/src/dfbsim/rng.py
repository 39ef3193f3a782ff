"""Counter-based Philox4x32-10 streams for the spontaneous-emission noise.

Each (seed, step, section) triple maps to one Philox block, so the draws do
not depend on evaluation order or on how sections are split between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import special

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)
_INV32 = 1.0 / 4294967296.0


@numba.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on a 128-bit counter; returns four uint32 words."""
    c0 = np.uint32(c0)
    c1 = np.uint32(c1)
    c2 = np.uint32(c2)
    c3 = np.uint32(c3)
    k0 = np.uint32(k0)
    k1 = np.uint32(k1)
    for r in range(10):
        if r > 0:
            k0 = np.uint32(k0 + _W0)
            k1 = np.uint32(k1 + _W1)
        p0 = np.uint64(c0) * _M0
        p1 = np.uint64(c2) * _M1
        h0 = np.uint32(p0 >> _SHIFT)
        l0 = np.uint32(p0 & _MASK)
        h1 = np.uint32(p1 >> _SHIFT)
        l1 = np.uint32(p1 & _MASK)
        c0 = np.uint32(h1 ^ c1 ^ k0)
        c1 = l1
        c2 = np.uint32(h0 ^ c3 ^ k1)
        c3 = l0
    return c0, c1, c2, c3


# Gaussian quantile table on a 2**16 grid of the top 16 bits of a word,
# linearly interpolated in the low 16 bits.  Where the quantile curves too
# fast for that (p < 1/64 or p > 63/64) a rational tail formula is used
# instead.  Absolute error is below 1e-7 everywhere.
_TABLE_BITS = 16
_NQ = 1 << _TABLE_BITS
_QUANTILES = special.ndtri(np.arange(_NQ + 1) / _NQ)
_QUANTILES[0] = _QUANTILES[1] - 1.0       # never read
_QUANTILES[-1] = _QUANTILES[-2] + 1.0     # never read
_LOW16 = np.uint32(0xFFFF)
_TAIL_CELLS = _NQ // 64

# Acklam's tail coefficients, relative error < 1.2e-9.
_TC = np.array([-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00])
_TD = np.array([7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                3.754408661907416e+00])


@numba.njit(cache=True, inline="always")
def _tail(p):
    q = math.sqrt(-2.0 * math.log(p))
    num = ((((_TC[0] * q + _TC[1]) * q + _TC[2]) * q + _TC[3]) * q + _TC[4]) * q + _TC[5]
    den = (((_TD[0] * q + _TD[1]) * q + _TD[2]) * q + _TD[3]) * q + 1.0
    return num / den


@numba.njit(cache=True, inline="always")
def word_to_normal(w):
    """Map a uniform 32-bit word to a standard normal by inverse CDF."""
    hi = w >> np.uint32(_TABLE_BITS)
    if hi < _TAIL_CELLS:
        return _tail((np.float64(w) + 0.5) * _INV32)
    if hi >= _NQ - _TAIL_CELLS:
        return -_tail((4294967296.0 - np.float64(w) - 0.5) * _INV32)
    frac = (np.float64(w & _LOW16) + 0.5) * (1.0 / _NQ)
    lo = _QUANTILES[hi]
    return lo + frac * (_QUANTILES[hi + 1] - lo)


@numba.njit(cache=True, inline="always")
def normal4(seed, step, section):
    """Four independent standard normals for one (step, section) cell."""
    w0, w1, w2, w3 = philox4x32(
        np.uint64(step) & _MASK, np.uint64(step) >> _SHIFT, section, 0,
        np.uint64(seed) & _MASK, np.uint64(seed) >> _SHIFT,
    )
    return word_to_normal(w0), word_to_normal(w1), word_to_normal(w2), word_to_normal(w3)


@numba.njit(cache=True)
def fill_words(words, seed, step, n_sections):
    """Philox words for sections 0..n_sections-1 of one step, 4 per section.

    Kept separate from the normal transform so the block cipher vectorises.
    """
    c0 = np.uint64(step) & _MASK
    c1 = np.uint64(step) >> _SHIFT
    k0 = np.uint64(seed) & _MASK
    k1 = np.uint64(seed) >> _SHIFT
    for j in range(n_sections):
        w0, w1, w2, w3 = philox4x32(c0, c1, j, 0, k0, k1)
        words[4 * j] = w0
        words[4 * j + 1] = w1
        words[4 * j + 2] = w2
        words[4 * j + 3] = w3


@numba.njit(cache=True)
def _fill_pairs(seed, steps, sections, out_r, out_s):
    for i in range(steps.size):
        a, b, c, d = normal4(seed, steps[i], sections[i])
        out_r[i] = complex(a, b)
        out_s[i] = complex(c, d)


@dataclass(frozen=True)
class NoiseSource:
    seed: int = 0
    enabled: bool = True

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def unit_pairs(self, steps, sections):
        """Circular complex normals (each quadrature N(0, 1)) for the forward
        and backward equations at each (step, section)."""
        steps, sections = np.broadcast_arrays(np.asarray(steps, np.int64),
                                              np.asarray(sections, np.int64))
        steps = np.ascontiguousarray(steps).ravel()
        sections = np.ascontiguousarray(sections).ravel()
        fwd = np.empty(steps.size, np.complex128)
        bwd = np.empty(steps.size, np.complex128)
        _fill_pairs(np.uint64(self.seed), steps, sections, fwd, bwd)
        return fwd, bwd
