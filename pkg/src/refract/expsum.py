"""Exact algebra on finite sums of terms c * x**p * exp(r*x).

Every scale function, kernel and value functional in this package is a
finite linear combination of such terms with complex coefficients and
rates (the exponent roots come in conjugate pairs, so evaluation on the
real line is real up to rounding).  Keeping the representation exact
turns every integral in the threshold equations into term bookkeeping.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_POWER = 8

# Rates closer than this are merged onto a common exponent, trading the
# unstable 1/(r - s) antiderivative formulas for polynomial corrections.
CONFLUENT_RATE_TOL = 1e-8
# Below this a rate is treated as exactly zero (pure polynomial term).
ZERO_RATE_TOL = 1e-12
# Term merge key: rate rounded to this resolution, plus the power.
MERGE_DECIMALS = 10
COEFF_PRUNE_REL = 1e-14
IMAG_RESIDUE_REL = 1e-10


class ExpSumError(Exception):
    """Base class for exponential-sum algebra failures."""


class PowerOverflow(ExpSumError):
    """A polynomial power exceeded MAX_POWER (runaway confluence guard)."""


class ImaginaryResidue(ExpSumError):
    """Evaluation at a real point produced a non-negligible imaginary part."""


@dataclass(frozen=True)
class ExpTerm:
    """One summand c * x**p * exp(r*x)."""

    coeff: complex
    rate: complex
    power: int

    def __post_init__(self):
        if not (0 <= self.power <= MAX_POWER):
            raise PowerOverflow(f"term power {self.power} outside [0, {MAX_POWER}]")


def _merge_key(rate: complex, power: int) -> tuple:
    return (round(rate.real, MERGE_DECIMALS), round(rate.imag, MERGE_DECIMALS), power)


def _intersect(d1, d2):
    if d1 is None:
        return d2
    if d2 is None:
        return d1
    lo = max(d1[0], d2[0])
    hi = min(d1[1], d2[1])
    return (lo, hi)


class ExpSum:
    """Immutable finite sum of ExpTerms, normalized on construction.

    Terms sharing (rate rounded to 1e-10, power) are merged and tiny
    coefficients (1e-14 relative to the largest) are pruned, so the term
    list is a canonical form.  ``domain`` is an optional, purely
    informational hint (lo, hi) for where evaluation is meaningful.
    """

    __slots__ = ("coeffs", "rates", "powers", "domain")

    def __init__(self, terms: Iterable[ExpTerm] | None = None, domain=None):
        merged: dict[tuple, list] = {}
        for t in terms or ():
            if t.power > MAX_POWER:
                raise PowerOverflow(f"power {t.power} > {MAX_POWER}")
            key = _merge_key(complex(t.rate), t.power)
            slot = merged.get(key)
            if slot is None:
                merged[key] = [complex(t.coeff), complex(t.rate), t.power, abs(complex(t.coeff))]
            else:
                slot[0] += complex(t.coeff)
                slot[3] = max(slot[3], abs(complex(t.coeff)))
        # Prune cancellation residue: a merged coefficient that is noise
        # relative to the summands that produced it.  (A globally tiny
        # coefficient may still matter -- with a large positive rate it
        # regrows along the domain -- so magnitudes are compared per key,
        # never across terms.)
        items = [
            s
            for s in merged.values()
            if abs(s[0]) > 0.0 and abs(s[0]) >= COEFF_PRUNE_REL * s[3]
        ]
        items.sort(key=lambda s: (s[1].real, s[1].imag, s[2]))
        coeffs = np.array([s[0] for s in items], dtype=complex)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "rates", np.array([s[1] for s in items], dtype=complex))
        object.__setattr__(self, "powers", np.array([s[2] for s in items], dtype=np.int64))
        for arr in (self.coeffs, self.rates, self.powers):
            arr.setflags(write=False)
        object.__setattr__(self, "domain", domain)

    def __setattr__(self, name, value):
        raise AttributeError("ExpSum is immutable")

    # ------------------------------------------------------------------
    # inspection
    # ------------------------------------------------------------------
    @property
    def terms(self) -> list[ExpTerm]:
        return [
            ExpTerm(complex(c), complex(r), int(p))
            for c, r, p in zip(self.coeffs, self.rates, self.powers)
        ]

    def __len__(self) -> int:
        return int(self.coeffs.size)

    def __repr__(self) -> str:
        inner = ", ".join(
            f"({c:.6g})x^{p}e^({r:.6g}x)" for c, r, p in zip(self.coeffs, self.rates, self.powers)
        )
        return f"ExpSum[{inner}]"

    def max_power(self) -> int:
        return int(self.powers.max()) if len(self) else 0

    # ------------------------------------------------------------------
    # algebra
    # ------------------------------------------------------------------
    def __add__(self, other: "ExpSum") -> "ExpSum":
        return ExpSum(self.terms + other.terms, domain=_intersect(self.domain, other.domain))

    def __sub__(self, other: "ExpSum") -> "ExpSum":
        return self + other.scaled(-1.0)

    def scaled(self, c: complex) -> "ExpSum":
        if c == 0:
            return ExpSum([], domain=self.domain)
        return ExpSum(
            [ExpTerm(c * t.coeff, t.rate, t.power) for t in self.terms], domain=self.domain
        )

    def __mul__(self, other):
        if isinstance(other, ExpSum):
            return multiply(self, other)
        return self.scaled(other)

    __rmul__ = __mul__

    def derivative(self) -> "ExpSum":
        out = []
        for t in self.terms:
            if t.power > 0:
                out.append(ExpTerm(t.coeff * t.power, t.rate, t.power - 1))
            out.append(ExpTerm(t.coeff * t.rate, t.rate, t.power))
        return ExpSum(out, domain=self.domain)

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------
    def _eval_complex(self, x, order: int = 0):
        f = self
        for _ in range(order):
            f = f.derivative()
        x = np.asarray(x, dtype=float)
        if len(f) == 0:
            return np.zeros(x.shape, dtype=complex) if x.ndim else 0j
        xx = x[..., None]
        vals = f.coeffs * np.power(xx, f.powers) * np.exp(f.rates * xx)
        return vals.sum(axis=-1)

    def eval(self, x, order: int = 0):
        """Real value of the sum (or its first/second derivative) at real x."""
        if order not in (0, 1, 2):
            raise ValueError("derivative_order must be 0, 1 or 2")
        val = self._eval_complex(x, order)
        _check_imag(val)
        return np.real(val) if np.ndim(val) else float(val.real)

    def __call__(self, x, order: int = 0):
        return self.eval(x, order)

    # ------------------------------------------------------------------
    # serialization for golden-file tests
    # ------------------------------------------------------------------
    def to_debug_text(self) -> str:
        lines = [
            f"{c.real!r} {c.imag!r} {r.real!r} {r.imag!r} {int(p)}"
            for c, r, p in zip(self.coeffs, self.rates, self.powers)
        ]
        return "\n".join(lines)

    @staticmethod
    def from_debug_text(text: str) -> "ExpSum":
        terms = []
        for line in text.strip().splitlines():
            if not line.strip():
                continue
            cr, ci, rr, ri, p = line.split()
            terms.append(ExpTerm(complex(float(cr), float(ci)), complex(float(rr), float(ri)), int(p)))
        return ExpSum(terms)


def _check_imag(val) -> None:
    re = np.abs(np.real(val))
    im = np.abs(np.imag(val))
    bad = im >= IMAG_RESIDUE_REL * (1.0 + re)
    if np.any(bad):
        worst = float(np.max(im / (1.0 + re)))
        raise ImaginaryResidue(
            f"imaginary residue {worst:.3e} exceeds {IMAG_RESIDUE_REL:.0e}; "
            "conjugate pairing violated"
        )


# ----------------------------------------------------------------------
# constructors
# ----------------------------------------------------------------------
def const(c: complex) -> ExpSum:
    return ExpSum([ExpTerm(c, 0.0, 0)])


def exponential(rate: complex, coeff: complex = 1.0) -> ExpSum:
    return ExpSum([ExpTerm(coeff, rate, 0)])


def zero() -> ExpSum:
    return ExpSum([])


# ----------------------------------------------------------------------
# operations
# ----------------------------------------------------------------------
def add(a: ExpSum, b: ExpSum) -> ExpSum:
    return a + b


def scale_shift(a: ExpSum, c: complex, s: float, reflect: bool = False) -> ExpSum:
    """ExpSum for x -> c * a(x - s), or c * a(s - x) when reflect is True.

    The shifted powers (x - s)**p are re-expanded binomially, so rates and
    the power bound are preserved (reflection negates rates).
    """
    if c == 0:
        return zero()
    sgn = -1.0 if reflect else 1.0
    out = []
    for t in a.terms:
        # argument u = sgn*x - sgn*s; u**p expanded in powers of x
        base = cmath.exp(-t.rate * sgn * s)
        for k in range(t.power + 1):
            coeff = (
                c
                * t.coeff
                * base
                * math.comb(t.power, k)
                * (sgn**k)
                * ((-sgn * s) ** (t.power - k))
            )
            out.append(ExpTerm(coeff, t.rate * sgn, k))
    dom = None
    if a.domain is not None:
        lo, hi = a.domain
        dom = (s - hi, s - lo) if reflect else (lo + s, hi + s)
    return ExpSum(out, domain=dom)


def multiply(a: ExpSum, b: ExpSum) -> ExpSum:
    """Termwise product; rates add, powers add (PowerOverflow if > 8)."""
    out = []
    for ta in a.terms:
        for tb in b.terms:
            p = ta.power + tb.power
            if p > MAX_POWER:
                raise PowerOverflow(f"product power {p} > {MAX_POWER}")
            out.append(ExpTerm(ta.coeff * tb.coeff, ta.rate + tb.rate, p))
    return ExpSum(out, domain=_intersect(a.domain, b.domain))


def _antiderivative_term(coeff: complex, rate: complex, power: int) -> list[ExpTerm]:
    if abs(rate) < ZERO_RATE_TOL:
        return [ExpTerm(coeff / (power + 1), 0.0, power + 1)]
    if abs(rate) < CONFLUENT_RATE_TOL:
        # Near-zero rate: the exact formula divides by r**(p+1), which
        # amplifies roundoff catastrophically.  Expand exp(r*x) instead;
        # with |r| < 1e-8 and moderate x the truncation is far below
        # double precision.
        out = []
        extra = min(3, MAX_POWER - power - 1)
        if extra < 0:
            raise PowerOverflow("confluent expansion exceeds power bound")
        rk = complex(1.0)
        for m in range(extra + 1):
            out.append(ExpTerm(coeff * rk / (power + m + 1), 0.0, power + m + 1))
            rk *= rate / (m + 1)
        return out
    # exact: int x^p e^{rx} dx = e^{rx} * sum_j (-1)^(p-j) p!/j! x^j / r^(p-j+1)
    out = []
    fact = math.factorial(power)
    for j in range(power + 1):
        c = coeff * ((-1.0) ** (power - j)) * fact / math.factorial(j) / rate ** (power - j + 1)
        out.append(ExpTerm(c, rate, j))
    return out


def antiderivative(a: ExpSum) -> ExpSum:
    """Exact antiderivative with integration constant 0.

    Rate-zero terms (|r| < 1e-12) integrate to polynomials; rates inside
    the confluence window (< 1e-8) use a short series with the exponent
    merged to zero rather than dividing by a tiny number.
    """
    out: list[ExpTerm] = []
    for t in a.terms:
        out.extend(_antiderivative_term(t.coeff, t.rate, t.power))
    return ExpSum(out, domain=a.domain)


def definite_integral(a: ExpSum, lo: float, hi: float) -> float:
    """Integral of a over [lo, hi]; real part with imaginary-residue check."""
    if lo > hi:
        raise ValueError(f"lo={lo} exceeds hi={hi}")
    anti = antiderivative(a)
    val = anti._eval_complex(hi) - anti._eval_complex(lo)
    _check_imag(val)
    return float(np.real(val))


# ----------------------------------------------------------------------
# convolution-type integrals with a variable endpoint
# ----------------------------------------------------------------------
def convolve_upper(p: ExpSum, r: ExpSum, upper: float) -> ExpSum:
    """ExpSum in x for H(x) = int_x^upper p(u - x) * r(u) du.

    This is the shape of every inner integral in the value functionals:
    a scale function of (u - x) against a fixed profile of u, integrated
    up to a threshold.  H is exact for x <= upper.
    """
    out: list[ExpTerm] = []
    for tp in p.terms:
        for tr in r.terms:
            rate_u = tp.rate + tr.rate
            cc = tp.coeff * tr.coeff
            for k in range(tp.power + 1):
                # (u-x)^pp -> C(pp,k) u^k (-x)^(pp-k)
                mono = math.comb(tp.power, k) * ((-1.0) ** (tp.power - k)) * cc
                xpow = tp.power - k
                g_terms = _antiderivative_term(1.0, rate_u, k + tr.power)
                ganti = ExpSum(g_terms)
                g_hi = ganti._eval_complex(upper)
                # mono * x^xpow e^{-rp x} * (G(upper) - G(x))
                out.append(ExpTerm(mono * g_hi, -tp.rate, xpow))
                for tg in ganti.terms:
                    pw = xpow + tg.power
                    if pw > MAX_POWER:
                        raise PowerOverflow(f"convolution power {pw} > {MAX_POWER}")
                    out.append(ExpTerm(-mono * tg.coeff, -tp.rate + tg.rate, pw))
    return ExpSum(out, domain=(None if p.domain is None else (upper - p.domain[1], upper)))


def convolve_lower(p: ExpSum, s: ExpSum, lower: float) -> ExpSum:
    """ExpSum in y for D(y) = int_lower^y p(y - z) * s(z) dz, y >= lower."""
    out: list[ExpTerm] = []
    for tp in p.terms:
        for ts in s.terms:
            rate_z = ts.rate - tp.rate
            cc = tp.coeff * ts.coeff
            for k in range(tp.power + 1):
                # (y-z)^pp -> C(pp,k) y^(pp-k) (-z)^k
                mono = math.comb(tp.power, k) * ((-1.0) ** k) * cc
                ypow = tp.power - k
                g_terms = _antiderivative_term(1.0, rate_z, k + ts.power)
                ganti = ExpSum(g_terms)
                g_lo = ganti._eval_complex(lower)
                for tg in ganti.terms:
                    pw = ypow + tg.power
                    if pw > MAX_POWER:
                        raise PowerOverflow(f"convolution power {pw} > {MAX_POWER}")
                    out.append(ExpTerm(mono * tg.coeff, tp.rate + tg.rate, pw))
                out.append(ExpTerm(-mono * g_lo, tp.rate, ypow))
    return ExpSum(out, domain=(None if p.domain is None else (lower, lower + p.domain[1])))
