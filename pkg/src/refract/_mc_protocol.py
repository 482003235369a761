"""Shared randomness protocol for the two Monte Carlo engines.

Both the compiled kernel and its pure-Python twin draw from per-path
Philox4x64-10 counter streams and convert bits to variates with the
exact same algorithms, in the exact same order, so a fixed seed gives
bit-identical estimates across engines, runs and thread counts.

Stream keying
-------------
path p uses two streams:  key = (seed, 2p)   -- diffusion increments
                          key = (seed, 2p+1) -- jump process (arrival
                                                gaps + jump sizes)

Conversions (u = next 64-bit word of the stream)
------------------------------------------------
uniform:      (u >> 11) * 2**-53                          in [0, 1)
exponential:  -log1p(-uniform)                            mean 1
normal:       256-layer ziggurat; one word on the common
              path (8 bits layer, 1 bit sign, 53 bits mantissa,
              bits 9-10 unused), extra words on wedge/tail rejection
phase-type:   initial state by one uniform against cumulative alpha
              (atom at zero when alpha is defective), then per state
              one exponential (holding time, scaled by 1/rate) and one
              uniform (transition/absorb against the cumulative row)
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

PHILOX_M0 = 0xD2E7470EE14C6C93
PHILOX_M1 = 0xCA5A826395121157
PHILOX_W0 = 0x9E3779B97F4A7C15
PHILOX_W1 = 0xBB67AE8584CAA73B
MASK64 = (1 << 64) - 1

ZIG_LAYERS = 256


def _zig_terminal_gap(r: float) -> float:
    """Mismatch at the top of the ziggurat for tail split point r."""
    f = math.exp(-0.5 * r * r)
    v = r * f + math.sqrt(math.pi / 2.0) * erfc(r / math.sqrt(2.0))
    x = r
    for _ in range(ZIG_LAYERS - 2):
        arg = math.exp(-0.5 * x * x) + v / x
        if arg >= 1.0:
            # r too small: layers hit the density's top before 256 steps
            return arg - 1.0
        x = math.sqrt(-2.0 * math.log(arg))
    return math.exp(-0.5 * x * x) + v / x - 1.0


def build_ziggurat_tables():
    """(x, ratio, f) arrays for the 256-layer standard-normal ziggurat.

    R is solved so the layer recursion terminates exactly at zero,
    which keeps all layer areas equal to double precision.
    """
    r = brentq(_zig_terminal_gap, 3.6, 3.7, xtol=1e-15)
    f_r = math.exp(-0.5 * r * r)
    v = r * f_r + math.sqrt(math.pi / 2.0) * erfc(r / math.sqrt(2.0))
    x = np.zeros(ZIG_LAYERS + 1)
    x[0] = v / f_r
    x[1] = r
    for i in range(2, ZIG_LAYERS):
        arg = math.exp(-0.5 * x[i - 1] ** 2) + v / x[i - 1]
        x[i] = math.sqrt(-2.0 * math.log(min(arg, 1.0)))
    x[ZIG_LAYERS] = 0.0
    fvals = np.exp(-0.5 * x * x)
    ratio = x[1:] / x[:-1]
    return x, ratio, fvals, r


ZIG_X, ZIG_RATIO, ZIG_F, ZIG_R = build_ziggurat_tables()


class PhiloxStream:
    """Pure-Python Philox4x64-10: the protocol's reference generator."""

    __slots__ = ("key0", "key1", "counter", "_buf", "_pos")

    def __init__(self, key0: int, key1: int):
        self.key0 = key0 & MASK64
        self.key1 = key1 & MASK64
        self.counter = 0
        self._buf = ()
        self._pos = 4

    def _block(self):
        c0, c1, c2, c3 = self.counter & MASK64, 0, 0, 0
        k0, k1 = self.key0, self.key1
        for _ in range(10):
            p0 = PHILOX_M0 * c0
            p1 = PHILOX_M1 * c2
            hi0, lo0 = (p0 >> 64) & MASK64, p0 & MASK64
            hi1, lo1 = (p1 >> 64) & MASK64, p1 & MASK64
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            k0 = (k0 + PHILOX_W0) & MASK64
            k1 = (k1 + PHILOX_W1) & MASK64
        self.counter += 1
        self._buf = (c0, c1, c2, c3)
        self._pos = 0

    def next_u64(self) -> int:
        if self._pos == 4:
            self._block()
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def exponential(self) -> float:
        return -math.log1p(-self.uniform())

    def normal(self) -> float:
        zx, zr, zf = ZIG_X, ZIG_RATIO, ZIG_F
        while True:
            u = self.next_u64()
            i = u & 0xFF
            big_u = (u >> 11) * 2.0**-53
            x = big_u * zx[i]
            if big_u < zr[i]:
                return -x if u & 0x100 else x
            if i == 0:
                while True:
                    xx = -math.log1p(-self.uniform()) / ZIG_R
                    yy = -math.log1p(-self.uniform())
                    if yy + yy > xx * xx:
                        return -(ZIG_R + xx) if u & 0x100 else ZIG_R + xx
            else:
                if zf[i] + self.uniform() * (zf[i + 1] - zf[i]) < math.exp(-0.5 * x * x):
                    return -x if u & 0x100 else x


def phase_type_tables(alpha: np.ndarray, T: np.ndarray):
    """Sampling tables: cumulative alpha, exit rates, cumulative rows.

    trans_cum[i, j] accumulates the probability of hopping i -> j
    (diagonal contributes zero); beyond trans_cum[i, m-1] lies
    absorption.  alpha_cum[m-1] < 1 encodes an atom at zero.
    """
    m = alpha.shape[0]
    alpha_cum = np.cumsum(alpha)
    rates = -np.diag(T)
    trans_cum = np.zeros((m, m))
    for i in range(m):
        acc = 0.0
        for j in range(m):
            if j != i:
                acc += T[i, j] / rates[i]
            trans_cum[i, j] = acc
    return alpha_cum, rates, trans_cum


def sample_phase_type_stream(stream: PhiloxStream, alpha_cum, rates, trans_cum) -> float:
    """One absorption time of the phase CTMC, per the shared protocol."""
    m = alpha_cum.shape[0]
    u = stream.uniform()
    state = -1
    for i in range(m):
        if u < alpha_cum[i]:
            state = i
            break
    if state < 0:
        return 0.0
    total = 0.0
    while True:
        total += stream.exponential() / rates[state]
        u = stream.uniform()
        nxt = -1
        for j in range(m):
            if u < trans_cum[state, j]:
                nxt = j
                break
        if nxt < 0:
            return total
        state = nxt
