"""Closed-form functionals of a threshold pair (a, b).

Everything the threshold equations and the value function need reduces
to three scale functions and one kernel,

    l(x; b) = int_x^b exp(-phi0 z) W1(z - x) dz = exp(-phi0 x) M(b - x),

where M is a model-level primitive.  The candidate value of the
strategy "inject below a, pay out above b" is

    v_{a,b}(x) = f_{a,b}(x) - (f_{a,b}(0) - rho) g_{a,b}(x) / g_{a,b}(0),

with f the expected discounted dividend/injection flows against ruin
and g the ruin-time Laplace transform kernel; both are piecewise
exponential sums split exactly at a and b.

The smooth-fit residuals are

    Gamma(a,b)      = (f_{a,b}(0) - rho) phi0 exp(-phi0 b) - g_{a,b}(0)
    gamma_tilde(a,b) = phi0 delta2 (beta exp(-phi0 b)
                       - exp(-phi0 a) - delta1 phi0 l(a;b))

and gamma(a,b) = W2(a) * gamma_tilde(a,b) is the a-derivative of Gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expsum as es
from .expsum import ExpSum
from .model import LevyModel
from .scale import ScaleFunction, build_scale_function


class FunctionalError(Exception):
    pass


class DegenerateNormalizer(FunctionalError):
    """g_{a,b}(0) vanished; the value normalization is undefined."""


@dataclass(frozen=True)
class PiecewiseValue:
    """A functional split exactly at the thresholds a <= b.

    pieces = (low, mid, top) valid on [0,a), [a,b), [b,inf).  Evaluation
    at a split point returns the right-limit piece; ``side='-'`` selects
    the left piece for one-sided derivative queries.
    """

    a: float
    b: float
    low: ExpSum
    mid: ExpSum
    top: ExpSum
    continuity_at_a: float = field(default=np.nan)
    continuity_at_b: float = field(default=np.nan)

    def _piece_for(self, x: float, side: str) -> ExpSum:
        if side == "-":
            if x <= self.a and self.a > 0:
                return self.low
            if x <= self.b:
                return self.mid if self.b > self.a else self.low
            return self.top
        if x < self.a:
            return self.low
        if x < self.b:
            return self.mid
        return self.top

    def eval(self, x, order: int = 0, side: str = "+"):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return self._piece_for(float(x), side).eval(float(x), order)
        conds = [x < self.a, (x >= self.a) & (x < self.b), x >= self.b]
        vals = [p.eval(x, order) for p in (self.low, self.mid, self.top)]
        return np.select(conds, vals)

    def __call__(self, x, order: int = 0):
        return self.eval(x, order)

    def combine(self, other: "PiecewiseValue", c1: float, c2: float) -> "PiecewiseValue":
        """c1 * self + c2 * other (same thresholds)."""
        if (self.a, self.b) != (other.a, other.b):
            raise FunctionalError("cannot combine piecewise values with different thresholds")
        low = self.low.scaled(c1) + other.low.scaled(c2)
        mid = self.mid.scaled(c1) + other.mid.scaled(c2)
        top = self.top.scaled(c1) + other.top.scaled(c2)
        return _with_continuity(self.a, self.b, low, mid, top)


def _with_continuity(a: float, b: float, low: ExpSum, mid: ExpSum, top: ExpSum) -> PiecewiseValue:
    cont_a = abs(low.eval(a) - mid.eval(a)) if a > 0 else 0.0
    cont_b = abs(mid.eval(b) - top.eval(b)) if b > a else 0.0
    return PiecewiseValue(a=a, b=b, low=low, mid=mid, top=top,
                          continuity_at_a=cont_a, continuity_at_b=cont_b)


@dataclass(frozen=True)
class PastingResiduals:
    """One-sided derivative jumps of v_{a,b}, by two independent routes."""

    dv1_a: float
    dv2_a: float
    dv1_b: float
    dv2_b: float
    dv1_a_closed: float
    dv2_a_closed: float
    dv1_b_closed: float
    dv2_b_closed: float

    def max_abs(self) -> float:
        return max(abs(self.dv1_a), abs(self.dv2_a), abs(self.dv1_b), abs(self.dv2_b))


class Engine:
    """Scale functions of one model plus the kernel primitives.

    Immutable after construction; every public method is a pure
    function of its arguments, so instances are safe to share.
    """

    def __init__(self, model: LevyModel):
        self.model = model
        q = model.q
        self.sf0: ScaleFunction = build_scale_function(model, 0, q)
        self.sf1: ScaleFunction = build_scale_function(model, 1, q)
        self.sf2: ScaleFunction = build_scale_function(model, 2, q)
        self.phi0: float = self.sf0.phi
        # M(y) = int_0^y exp(-phi0 u) W1(u) du; all b-dependence of the
        # kernel enters through evaluations of M.
        integrand = es.multiply(es.exponential(-self.phi0), self.sf1.W)
        anti = es.antiderivative(integrand)
        self._M = anti - es.const(anti.eval(0.0))
        self._exp0 = es.exponential(-self.phi0)
        self._section_cache: dict[float, "Section"] = {}

    # ------------------------------------------------------------------
    def kernel_l(self, b: float) -> ExpSum:
        """l(x; b) as an ExpSum in x, exact for x <= b."""
        m_refl = es.scale_shift(self._M, 1.0, b, reflect=True)
        out = es.multiply(self._exp0, m_refl)
        return ExpSum(out.terms, domain=(-np.inf, b))

    def l_at(self, x: float, b: float) -> float:
        """Pointwise l(x; b) with the W1 = 0 extension (0 for x >= b)."""
        if x >= b:
            return 0.0
        return math.exp(-self.phi0 * x) * self._M.eval(b - x)

    def section(self, b: float) -> "Section":
        sec = self._section_cache.get(b)
        if sec is None:
            sec = Section(self, b)
            if len(self._section_cache) > 32:
                self._section_cache.clear()
            self._section_cache[b] = sec
        return sec

    # ------------------------------------------------------------------
    # scalar smooth-fit functionals
    # ------------------------------------------------------------------
    def f_at_zero(self, a: float, b: float) -> float:
        return self.section(b).f_at_zero(a)

    def g_at_zero(self, a: float, b: float) -> float:
        return self.section(b).g_at_zero(a)

    def Gamma(self, a: float, b: float) -> float:
        return self.section(b).Gamma(a)

    def gamma_tilde(self, a: float, b: float) -> float:
        return self.section(b).gamma_tilde(a)

    def gamma_small(self, a: float, b: float) -> float:
        """gamma(a,b) = W2(a) * gamma_tilde(a,b) = dGamma/da."""
        return self.sf2.W_at(a) * self.gamma_tilde(a, b)

    # ------------------------------------------------------------------
    # piecewise functionals
    # ------------------------------------------------------------------
    def f_ab(self, a: float, b: float) -> PiecewiseValue:
        _check_thresholds(a, b)
        m, d1, d2 = self.model, self.model.delta1, self.model.delta2
        top = es.const(d1 / m.q)
        if b > 0:
            mid = es.scale_shift(self.sf1.Wbar, d1, b, reflect=True) + top
        else:
            mid = top
        if a > 0:
            conv = es.convolve_upper(
                self.sf2.W, es.scale_shift(self.sf1.W, 1.0, b, reflect=True), a
            )
            low = mid + conv.scaled(d1 * d2) + es.scale_shift(
                self.sf2.Wbar, m.beta * d2, a, reflect=True
            )
        else:
            low = mid
        return _with_continuity(a, b, low, mid, top)

    def g_ab(self, a: float, b: float) -> PiecewiseValue:
        _check_thresholds(a, b)
        m, d1, d2 = self.model, self.model.delta1, self.model.delta2
        top = self._exp0
        if b > 0:
            lb = self.kernel_l(b)
            mid = top + lb.scaled(self.phi0 * d1)
        else:
            lb = es.zero()
            mid = top
        if a > 0:
            profile = self._exp0 - lb.derivative().scaled(d1)
            conv = es.convolve_upper(self.sf2.W, profile, a)
            low = mid + conv.scaled(self.phi0 * d2)
        else:
            low = mid
        return _with_continuity(a, b, low, mid, top)

    def value_v_ab(self, a: float, b: float) -> PiecewiseValue:
        """Expected NPV of the (a, b) strategy; v(0) = rho by construction."""
        f = self.f_ab(a, b)
        g = self.g_ab(a, b)
        g0 = g.eval(0.0)
        if abs(g0) < 1e-12:
            raise DegenerateNormalizer(f"g(0) = {g0:g}")
        c = -(f.eval(0.0) - self.model.rho) / g0
        return f.combine(g, 1.0, c)

    # ------------------------------------------------------------------
    def pasting_residuals(self, a: float, b: float, v: PiecewiseValue | None = None) -> PastingResiduals:
        """Derivative jumps of v_{a,b} at a and b, one-sided vs closed form."""
        if not (0 <= a < b):
            raise FunctionalError("pasting residuals need 0 <= a < b")
        if v is None:
            v = self.value_v_ab(a, b)
        d1, d2, beta = self.model.delta1, self.model.delta2, self.model.beta
        f0 = self.f_at_zero(a, b)
        g0 = self.g_at_zero(a, b)
        gam = self.Gamma(a, b)
        gt = self.gamma_tilde(a, b)
        rho = self.model.rho

        dv1_b = v.eval(b, 1, "+") - v.eval(b, 1, "-")
        dv2_b = v.eval(b, 2, "+") - v.eval(b, 2, "-")
        if a > 0:
            dv1_a = v.eval(a, 1, "+") - v.eval(a, 1, "-")
            dv2_a = v.eval(a, 2, "+") - v.eval(a, 2, "-")
        else:
            dv1_a = dv2_a = 0.0

        w1_0 = self.sf1.W.eval(0.0)
        w1p_0 = self.sf1.W.eval(0.0, 1)
        w2_0 = self.sf2.W.eval(0.0)
        w2p_0 = self.sf2.W.eval(0.0, 1)
        bracket = (f0 - rho) * gt - d2 * (beta + d1 * self.sf1.W_at(b - a)) * gam
        closed = PastingResiduals(
            dv1_a=dv1_a,
            dv2_a=dv2_a,
            dv1_b=dv1_b,
            dv2_b=dv2_b,
            dv1_a_closed=(w2_0 / g0) * bracket if a > 0 else 0.0,
            dv2_a_closed=-(w2p_0 / g0) * bracket if a > 0 else 0.0,
            dv1_b_closed=-d1 * w1_0 * gam / g0,
            dv2_b_closed=d1 * w1p_0 * gam / g0,
        )
        return closed

    # ------------------------------------------------------------------
    # alternative construction from the first-passage building blocks
    # ------------------------------------------------------------------
    def upcross_u2(self, a: float, b: float) -> tuple[ExpSum, ExpSum]:
        """(u2 on [-a, 0], u1 on [-b, -a]) as ExpSums in y = -x.

        u1(y) = exp(phi0 y) + delta1 phi0 l(-y; b) and u2 adds the
        injection-region convolution; u2(-x)/u2(0) is the ruin-time
        Laplace transform of the controlled process.  Outside the stated
        windows the ExpSums are analytic continuations, not u2; use
        u2_at for piecewise-correct values.
        """
        d1, d2 = self.model.delta1, self.model.delta2
        m_shift = es.scale_shift(self._M, 1.0, -b, reflect=False)  # M(y + b)
        u1 = es.multiply(
            es.exponential(self.phi0), es.const(1.0) + m_shift.scaled(d1 * self.phi0)
        )
        if a > 0:
            conv = es.convolve_lower(self.sf2.W, u1.derivative(), -a)
            u2_inner = u1 + conv.scaled(d2)
        else:
            u2_inner = u1
        return u2_inner, u1

    def u2_at(self, a: float, b: float, x: float) -> float:
        """u2(-x) for x >= 0, honoring the kernel's zero extensions."""
        u2_inner, u1 = self.upcross_u2(a, b)
        if x < a:
            return u2_inner.eval(-x)
        if x < b:
            return u1.eval(-x)
        return math.exp(-self.phi0 * x)

    def _w1_profile(self, d: float) -> ExpSum:
        """w1(z; d) as an ExpSum in z, valid for z > d (0 below)."""
        d1 = self.model.delta1
        w0_shift = es.scale_shift(self.sf0.W, 1.0, d, reflect=False)  # W0(z-d)
        w0p_shift = es.scale_shift(self.sf0.W.derivative(), 1.0, d, reflect=False)
        conv = es.convolve_lower(self.sf1.W, w0p_shift, d)
        return w0_shift + conv.scaled(d1)

    def _w2_eval(self, a: float, d: float, z: float) -> float:
        """w2(z; d), honoring the zero extensions of its pieces.

        w2 vanishes for z <= d; the injection-region convolution only
        contributes for z above -a.
        """
        if z <= d:
            return 0.0
        w1 = self._w1_profile(d)
        val = w1.eval(z)
        lo = max(-a, d)
        if z > lo:
            conv = es.convolve_lower(self.sf2.W, w1.derivative(), lo)
            val += self.model.delta2 * conv.eval(z)
        return val

    def f_tilde_at(self, a: float, b: float, x: float, nodes: int = 24) -> float:
        """f from the first-passage route, evaluated at -x by quadrature in d."""
        m = self.model
        d1, d2, beta, q = m.delta1, m.delta2, m.beta, m.q
        denom1 = 1.0 - d1 * self.sf0.W.eval(0.0)
        denom2 = denom1 * (1.0 - d2 * self.sf1.W.eval(0.0))
        z = -x

        def w2_at(d: float) -> float:
            return self._w2_eval(a, d, z)

        gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)

        def integrate(lo: float, hi: float) -> float:
            if hi <= lo:
                return 0.0
            mid_, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
            return half * sum(w * w2_at(mid_ + half * t) for t, w in zip(gl_x, gl_w))

        def integrate_split(lo: float, hi: float) -> float:
            # w2(z; d) kinks (vanishes) at d = z; split panels there
            if lo < z < hi:
                return integrate(lo, z) + integrate(z, hi)
            return integrate(lo, hi)

        q1 = integrate_split(-b, -a)
        q2 = integrate_split(-a, 0.0)
        return d1 / q + d1 * q1 / denom1 + (d1 + beta * d2) * q2 / denom2

    def injection_identity_residual(self, a: float, x: float, nodes: int = 24) -> float:
        """|int_{-a}^0 w2(-x; d) dd / prod(1 - delta_j W_{j-1}(0)) - W2bar(a - x)|."""
        m = self.model
        denom = (1.0 - m.delta1 * self.sf0.W.eval(0.0)) * (1.0 - m.delta2 * self.sf1.W.eval(0.0))
        z = -x
        gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)

        def integrate(lo: float, hi: float) -> float:
            if hi <= lo:
                return 0.0
            mid_, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
            total = 0.0
            for t, w in zip(gl_x, gl_w):
                total += w * self._w2_eval(a, mid_ + half * t, z)
            return half * total

        val = integrate(-a, min(0.0, z)) + integrate(min(0.0, z), 0.0) if -a < z < 0 else integrate(-a, 0.0)
        return abs(val / denom - self.sf2.Wbar_at(a - x))

    def appendix_cross_check(self, a: float, b: float, xs) -> dict:
        """Agreement of the first-passage construction with f and g."""
        if not (0 <= a < b):
            raise FunctionalError("cross check needs 0 <= a < b")
        if self.model.sigma == 0.0:
            raise FunctionalError(
                "first-passage reconstruction requires sigma > 0 "
                "(W0(0) > 0 introduces atoms in the w-profiles)"
            )
        f = self.f_ab(a, b)
        g = self.g_ab(a, b)
        rows = []
        for x in np.atleast_1d(np.asarray(xs, dtype=float)):
            g_err = abs(self.u2_at(a, b, float(x)) - g.eval(float(x)))
            f_err = abs(self.f_tilde_at(a, b, float(x)) - f.eval(float(x)))
            iden1 = self.injection_identity_residual(a, float(x)) if a > 0 else 0.0
            rows.append({"x": float(x), "u2_vs_g": g_err, "ftilde_vs_f": f_err,
                         "injection_identity": iden1})
        return {
            "a": a,
            "b": b,
            "rows": rows,
            "max_u2_vs_g": max(r["u2_vs_g"] for r in rows),
            "max_ftilde_vs_f": max(r["ftilde_vs_f"] for r in rows),
            "max_injection_identity": max(r["injection_identity"] for r in rows),
        }


class Section:
    """Per-b cache of the scalars driving the threshold equations."""

    def __init__(self, engine: Engine, b: float):
        if b < 0:
            raise FunctionalError("b must be nonnegative")
        self.engine = engine
        self.b = b
        m = engine.model
        self._Mb = engine._M.eval(b) if b > 0 else 0.0
        self._w1bar_b = engine.sf1.Wbar_at(b)
        # integrand antiderivatives for the two a-integrals at x = 0
        if b > 0:
            w1_refl = es.scale_shift(engine.sf1.W, 1.0, b, reflect=True)
            lb = engine.kernel_l(b)
            profile = engine._exp0 - lb.derivative().scaled(m.delta1)
        else:
            w1_refl = es.zero()
            profile = engine._exp0
        self._antiI1 = es.antiderivative(es.multiply(engine.sf2.W, w1_refl))
        self._antiI2 = es.antiderivative(es.multiply(engine.sf2.W, profile))
        self._antiI1_0 = self._antiI1.eval(0.0)
        self._antiI2_0 = self._antiI2.eval(0.0)

    def f_at_zero(self, a: float) -> float:
        m = self.engine.model
        i1 = self._antiI1.eval(a) - self._antiI1_0 if a > 0 else 0.0
        return (
            m.delta1 * (self._w1bar_b + m.delta2 * i1)
            + m.beta * m.delta2 * self.engine.sf2.Wbar_at(a)
            + m.delta1 / m.q
        )

    def g_at_zero(self, a: float) -> float:
        m = self.engine.model
        i2 = self._antiI2.eval(a) - self._antiI2_0 if a > 0 else 0.0
        return 1.0 + self.engine.phi0 * (m.delta1 * self._Mb + m.delta2 * i2)

    def Gamma(self, a: float) -> float:
        m = self.engine.model
        phi0 = self.engine.phi0
        return (self.f_at_zero(a) - m.rho) * phi0 * math.exp(-phi0 * self.b) - self.g_at_zero(a)

    def gamma_tilde(self, a: float) -> float:
        m = self.engine.model
        phi0 = self.engine.phi0
        l_ab = self.engine.l_at(a, self.b)
        return phi0 * m.delta2 * (
            m.beta * math.exp(-phi0 * self.b)
            - (math.exp(-phi0 * a) + m.delta1 * phi0 * l_ab)
        )


def _check_thresholds(a: float, b: float) -> None:
    if not (0 <= a <= b):
        raise FunctionalError(f"need 0 <= a <= b, got a={a}, b={b}")
