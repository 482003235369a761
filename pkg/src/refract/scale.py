"""Scale functions of the driving processes as exact exponential sums.

psi_k(s) = q rationalizes (multiply through det(sI - T)) to a polynomial
of degree m+2 (sigma > 0) or m+1 (sigma = 0).  Its roots split into the
unique positive root Phi_k(q) and m+1 (resp. m) roots with negative real
part, and the scale function is the residue expansion

    W_k(x) = sum over roots r of exp(r x) / psi_k'(r),

with x^p corrections from higher-order poles when roots (nearly)
collide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expsum import ExpSum, ExpTerm, antiderivative, const
from .model import LevyModel, Variation

REPEATED_ROOT_TOL = 1e-7
ROOT_RESIDUAL_TOL = 1e-9


class ScaleError(Exception):
    pass


class RepeatedRoots(ScaleError):
    """Two exponent roots are closer than 1e-7; confluent handling needed."""


class RootCountMismatch(ScaleError):
    """Rationalized polynomial did not yield the expected root pattern."""


@dataclass(frozen=True)
class RootSet:
    """Roots of psi_k(s) = q with classification metadata."""

    k: int
    q: float
    phi: float
    negative_roots: np.ndarray
    min_gap: float
    psi_prime_at_phi: float

    @property
    def all_roots(self) -> np.ndarray:
        return np.concatenate(([complex(self.phi)], self.negative_roots))


def _char_poly_and_adjugate_numerator(model: LevyModel):
    """Coefficients (ascending) of det(sI-T) and of alpha adj(sI-T) t.

    Faddeev-LeVerrier: exact in rational arithmetic, stable enough in
    doubles for m <= 8.
    """
    T = model.jumps.T
    m = model.jumps.m
    alpha = model.jumps.alpha
    tvec = model.jumps.t
    # det(sI-T) = s^m + c[m-1] s^{m-1} + ... + c[0]
    # adj(sI-T) = sum_{j=0}^{m-1} B_j s^j
    c = np.zeros(m + 1)
    c[m] = 1.0
    B = np.eye(m)
    numer = np.zeros(m)  # coefficient of s^j in alpha adj t
    numer[m - 1] = float(alpha @ B @ tvec)
    M = B
    for i in range(1, m + 1):
        TM = T @ M
        c[m - i] = -np.trace(TM) / i
        if i < m:
            M = TM + c[m - i] * np.eye(m)
            numer[m - 1 - i] = float(alpha @ M @ tvec)
    return c, numer


def _rationalized_poly(model: LevyModel, k: int, q: float) -> np.ndarray:
    """Ascending coefficients of (psi_k(s) - q) * det(sI - T)."""
    chi, numer = _char_poly_and_adjugate_numerator(model)
    drift = model.c_Y + model.delta1 - sum((model.delta1, model.delta2)[:k])
    # (drift*s + sigma^2/2 s^2 - (kappa + q)) * chi(s) + kappa * numer(s)
    m = model.jumps.m
    deg = m + 2
    poly = np.zeros(deg + 1)
    poly[1 : m + 2] += drift * chi
    poly[2 : m + 3] += 0.5 * model.sigma**2 * chi
    poly[0 : m + 1] += -(model.kappa + q) * chi
    poly[0:m] += model.kappa * numer
    # trim trailing zeros (sigma = 0 drops the top degree)
    while poly.size > 1 and poly[-1] == 0.0:
        poly = poly[:-1]
    return poly


def solve_exponent_roots(model: LevyModel, k: int, q: float, *, allow_repeated: bool = False) -> RootSet:
    """All roots of psi_k(s) = q via companion eigenvalues + Newton polish.

    Raises RepeatedRoots when the smallest pairwise gap is below 1e-7
    unless allow_repeated is set (the confluent scale-function builder
    sets it and switches to higher-order-pole residues).
    """
    if model.kappa == 0.0:
        # no rationalization needed: drift*s + sigma^2/2 s^2 = q
        drift = model.c_Y + model.delta1 - sum((model.delta1, model.delta2)[:k])
        if model.sigma > 0:
            poly = np.array([-q, drift, 0.5 * model.sigma**2])
        else:
            poly = np.array([-q, drift])
        raw = np.roots(poly[::-1]).astype(complex)
        eigs = np.array([])
    else:
        poly = _rationalized_poly(model, k, q)
        raw = np.roots(poly[::-1]).astype(complex)
        eigs = model.jumps.eigenvalues()

    # Newton polish on psi_k directly (the rationalized coefficients can
    # be ill-conditioned for larger m)
    roots = []
    for r in raw:
        s = r
        for _ in range(5):
            h = model.laplace_exponent(k, s) - q
            hp = model.laplace_exponent_derivative(k, s)
            if hp == 0:
                break
            step = h / hp
            s = s - step
        roots.append(s)
    roots = np.array(roots, dtype=complex)

    # drop spurious roots sitting at eigenvalues of T or failing the residual
    keep = []
    for s in roots:
        if eigs.size and np.min(np.abs(s - eigs)) < 1e-8 * (1.0 + abs(s)):
            continue
        if abs(model.laplace_exponent(k, s) - q) < ROOT_RESIDUAL_TOL * (1.0 + q):
            keep.append(s)
    roots = np.array(keep, dtype=complex)

    expected = (model.jumps.m if model.kappa > 0 else 0) + (2 if model.sigma > 0 else 1)
    if roots.size != expected:
        raise RootCountMismatch(
            f"k={k}: found {roots.size} roots of psi_k(s)=q, expected {expected} "
            "(is the phase-type representation minimal?)"
        )

    # classify: one positive real root, the rest with negative real part
    pos_idx = [
        i for i, s in enumerate(roots)
        if s.real > 0 and abs(s.imag) < 1e-8 * (1 + abs(s.real))
    ]
    if len(pos_idx) != 1:
        raise RootCountMismatch(
            f"k={k}: expected exactly one positive real root, got {len(pos_idx)}"
        )
    phi = float(roots[pos_idx[0]].real)
    neg = np.delete(roots, pos_idx[0])
    if np.any(neg.real >= 0):
        raise RootCountMismatch(f"k={k}: a non-Phi root has nonnegative real part")
    # force exact conjugate pairing of complex roots for clean ExpSums
    neg = _pair_conjugates(neg)

    allr = np.concatenate(([complex(phi)], neg))
    gaps = [
        abs(allr[i] - allr[j]) for i in range(allr.size) for j in range(i + 1, allr.size)
    ]
    min_gap = float(min(gaps)) if gaps else np.inf
    if min_gap < REPEATED_ROOT_TOL and not allow_repeated:
        raise RepeatedRoots(
            f"k={k}: smallest root gap {min_gap:.3e} < {REPEATED_ROOT_TOL:.0e}"
        )
    # bracket sanity: psi(phi +/- eps) straddles q
    eps = 1e-6 * (1.0 + phi)
    lo = model.laplace_exponent(k, phi - eps).real - q
    hi = model.laplace_exponent(k, phi + eps).real - q
    if not (lo < 0 < hi):
        raise RootCountMismatch(f"k={k}: psi_k does not bracket q around phi={phi}")
    psip = model.laplace_exponent_derivative(k, phi).real
    return RootSet(k=k, q=q, phi=phi, negative_roots=neg, min_gap=min_gap, psi_prime_at_phi=psip)


def _pair_conjugates(roots: np.ndarray) -> np.ndarray:
    """Snap near-conjugate complex roots to exact conjugate pairs."""
    roots = list(roots)
    out = []
    used = [False] * len(roots)
    for i, r in enumerate(roots):
        if used[i]:
            continue
        if abs(r.imag) < 1e-10 * (1 + abs(r.real)):
            out.append(complex(r.real, 0.0))
            used[i] = True
            continue
        best, bd = None, np.inf
        for j in range(i + 1, len(roots)):
            if used[j]:
                continue
            d = abs(roots[j] - r.conjugate())
            if d < bd:
                best, bd = j, d
        if best is None or bd > 1e-6 * (1 + abs(r)):
            out.append(r)  # unpaired complex root; conjugacy check downstream
            used[i] = True
            continue
        avg = 0.5 * (r + roots[best].conjugate())
        out.append(avg)
        out.append(avg.conjugate())
        used[i] = used[best] = True
    return np.array(out, dtype=complex)


# ----------------------------------------------------------------------
# scale function construction
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ScaleFunction:
    """W_k^{(q)}, its primitive and Z as ExpSums valid on x >= 0.

    Evaluation helpers apply the canonical extension W = 0, Wbar = 0,
    Z = 1 on the negative half-line.
    """

    roots: RootSet
    W: ExpSum
    Wbar: ExpSum
    Z: ExpSum

    @property
    def phi(self) -> float:
        return self.roots.phi

    @property
    def psi_prime_at_phi(self) -> float:
        return self.roots.psi_prime_at_phi

    def W_at(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, self.W.eval(np.maximum(x, 0.0), order), 0.0)
        return float(out) if out.ndim == 0 else out

    def Wbar_at(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, self.Wbar.eval(np.maximum(x, 0.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def Z_at(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, self.Z.eval(np.maximum(x, 0.0)), 1.0)
        return float(out) if out.ndim == 0 else out


def _cluster_roots(roots: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group roots into clusters whose internal gaps are below tol."""
    order = np.argsort(roots.real + 1e-9 * roots.imag)
    roots = roots[order]
    clusters: list[list[complex]] = []
    for r in roots:
        placed = False
        for cl in clusters:
            if any(abs(r - s) < tol for s in cl):
                cl.append(r)
                placed = True
                break
        if not placed:
            clusters.append([r])
    return [np.array(cl, dtype=complex) for cl in clusters]


def _cluster_residue_terms(model: LevyModel, k: int, q: float, cluster: np.ndarray,
                           others: np.ndarray) -> list[ExpTerm]:
    """ExpTerms of the residue of e^{sx}/(psi_k(s)-q) at a root cluster.

    Treats the cluster as one pole of order n at its centroid and
    extracts the Laurent coefficients b_{-1-m} by a trapezoid contour
    integral (exponentially accurate for analytic integrands):

        residue = e^{cx} * sum_{m<n} b_{-1-m} x^m / m!
    """
    n = cluster.size
    center = complex(np.mean(cluster))
    spread = max((abs(r - center) for r in cluster), default=0.0)
    dist = min((abs(center - o) for o in others), default=np.inf)
    eigs = model.jumps.eigenvalues() if model.kappa > 0 else np.array([])
    if eigs.size:
        dist = min(dist, float(np.min(np.abs(center - eigs))))
    radius = 0.5 * dist if np.isfinite(dist) else max(10 * spread, 1e-3)
    radius = max(radius, 4.0 * spread)
    if radius <= 2.0 * spread:
        raise RepeatedRoots("cannot isolate root cluster from other singularities")
    nodes = 256
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    offs = radius * np.exp(1j * theta)
    invf = np.array([1.0 / (model.laplace_exponent(k, center + o) - q) for o in offs])
    terms = []
    fact = 1.0
    for mth in range(n):
        # b_{-1-m} = (1/2pi i) oint (s-c)^m / (psi(s)-q) ds; with
        # s = c + R e^{i theta} the trapezoid rule reduces to a mean.
        b = complex(np.mean(offs**mth * invf * offs))
        if mth >= 1:
            fact *= mth
        terms.append(ExpTerm(b / fact, center, mth))
    return terms


def build_scale_function(model: LevyModel, k: int, q: float) -> ScaleFunction:
    """W, Wbar, Z of X_k; switches to confluent residues on root collision."""
    try:
        roots = solve_exponent_roots(model, k, q)
        terms = [
            ExpTerm(1.0 / model.laplace_exponent_derivative(k, r), r, 0)
            for r in roots.all_roots
        ]
    except RepeatedRoots:
        roots = solve_exponent_roots(model, k, q, allow_repeated=True)
        clusters = _cluster_roots(roots.all_roots, REPEATED_ROOT_TOL)
        terms = []
        for i, cl in enumerate(clusters):
            if cl.size == 1:
                r = complex(cl[0])
                terms.append(ExpTerm(1.0 / model.laplace_exponent_derivative(k, r), r, 0))
            else:
                others = np.concatenate([c for j, c in enumerate(clusters) if j != i] or
                                        [np.array([], dtype=complex)])
                terms.extend(_cluster_residue_terms(model, k, q, cl, others))
    W = ExpSum(terms, domain=(0.0, np.inf))
    anti = antiderivative(W)
    Wbar = anti - const(anti.eval(0.0))
    Z = const(1.0) + Wbar.scaled(q)
    return ScaleFunction(roots=roots, W=W, Wbar=Wbar, Z=Z)


# ----------------------------------------------------------------------
# diagnostics
# ----------------------------------------------------------------------
def boundary_and_asymptotics(model: LevyModel, sf: ScaleFunction) -> dict:
    """Compare W(0), W'(0+) and the tail growth against analytic limits."""
    k = sf.roots.k
    w0 = sf.W.eval(0.0)
    w0p = sf.W.eval(0.0, order=1)
    if model.variation is Variation.UNBOUNDED:
        w0_expect = 0.0
        w0p_expect = 2.0 / model.sigma**2
    else:
        ck = model.drift_c(k)
        w0_expect = 1.0 / ck
        w0p_expect = (model.q + model.kappa) / ck**2
    tail = {}
    for x in (10.0, 20.0, 40.0):
        tail[x] = float(np.exp(-sf.phi * x) * sf.W.eval(x))
    limit = 1.0 / sf.psi_prime_at_phi
    report = {
        "k": k,
        "W0": w0,
        "W0_expected": w0_expect,
        "W0_error": abs(w0 - w0_expect),
        "Wprime0": w0p,
        "Wprime0_expected": w0p_expect,
        "Wprime0_rel_error": abs(w0p - w0p_expect) / (1.0 + abs(w0p_expect)),
        "tail_ratio": tail,
        "tail_limit": limit,
        "tail_rel_error_at_40": abs(tail[40.0] - limit) / abs(limit),
    }
    return report
