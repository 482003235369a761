"""Surplus model: phase-type jump diffusion with two control rates.

The uncontrolled surplus Y drifts down at rate c_Y, diffuses with
volatility sigma and receives upward phase-type jumps at Poisson rate
kappa.  Dividends may be paid at rate up to delta1 and capital injected
at rate up to delta2 (unit cost beta > 1); ruin pays/charges rho and
cash flows discount at rate q.

Three spectrally negative processes drive all the fluctuation theory:

    X0 = -Y + delta1*t,   X1 = -Y,   X2 = -Y - delta2*t,

with Laplace exponents psi_k(s) = psi_0(s) - (delta1 [+ delta2]) * s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import expm


class ModelError(Exception):
    """Base class for model validation failures."""


class SubordinatorViolation(ModelError):
    """Y + delta2*t would be a subordinator (or Y itself degenerate)."""


class InvalidPhaseType(ModelError):
    """Phase-type representation violates its structural constraints."""


class InvalidEconomics(ModelError):
    """beta <= 1 or q <= 0."""


class PoleAtEigenvalue(ModelError):
    """Laplace exponent requested at an eigenvalue of the subgenerator."""


class Variation(Enum):
    BOUNDED = "BoundedVariation"
    UNBOUNDED = "UnboundedVariation"


@dataclass(frozen=True)
class PhaseTypeRep:
    """Phase-type distribution (m, alpha, T); exit vector t = -T 1.

    alpha may sum to less than one, in which case the distribution has
    an atom at zero of mass 1 - sum(alpha).
    """

    alpha: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        T = np.atleast_2d(np.asarray(self.T, dtype=float))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "T", T)
        m = alpha.shape[0]
        if T.shape != (m, m):
            raise InvalidPhaseType(f"T shape {T.shape} incompatible with alpha length {m}")
        if np.any(alpha < -1e-15) or alpha.sum() > 1.0 + 1e-12:
            raise InvalidPhaseType("alpha must be a (sub)probability vector")
        if np.any(np.diag(T) >= 0):
            raise InvalidPhaseType("diagonal of T must be strictly negative")
        off = T - np.diag(np.diag(T))
        if np.any(off < -1e-12):
            raise InvalidPhaseType("off-diagonal of T must be nonnegative")
        if np.any(T.sum(axis=1) > 1e-12):
            raise InvalidPhaseType("row sums of T must be <= 0")
        alpha.setflags(write=False)
        T.setflags(write=False)

    @property
    def m(self) -> int:
        return self.alpha.shape[0]

    @property
    def t(self) -> np.ndarray:
        """Exit rate vector, recomputed as -T 1."""
        return -self.T.sum(axis=1)

    def mean(self) -> float:
        """E[Z] = -alpha T^{-1} 1."""
        return float(-self.alpha @ np.linalg.solve(self.T, np.ones(self.m)))

    def moment(self, n: int) -> float:
        """E[Z^n] = (-1)^n n! alpha T^{-n} 1."""
        v = np.ones(self.m)
        for _ in range(n):
            v = np.linalg.solve(self.T, v)
        return float(((-1.0) ** n) * math.factorial(n) * (self.alpha @ v))

    def density(self, z):
        """Density alpha e^{Tz} t at z > 0 (atom at 0 excluded)."""
        z = np.asarray(z, dtype=float)
        if z.ndim == 0:
            return float(self.alpha @ expm(self.T * float(z)) @ self.t)
        return np.array([float(self.alpha @ expm(self.T * zz) @ self.t) for zz in z])

    def laplace(self, s):
        """E[e^{-sZ}] = alpha (sI - T)^{-1} t (+ atom mass), s complex."""
        eye = np.eye(self.m)
        atom = 1.0 - float(self.alpha.sum())
        return self.alpha @ np.linalg.solve(s * eye - self.T, self.t) + atom

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.T)


@dataclass(frozen=True)
class LevyModel:
    """Validated surplus model; use build_model to construct."""

    sigma: float
    c_Y: float
    kappa: float
    jumps: PhaseTypeRep
    delta1: float
    delta2: float
    q: float
    beta: float
    rho: float
    variation: Variation = field(init=False)

    def __post_init__(self):
        if self.beta <= 1.0 or self.q <= 0.0:
            raise InvalidEconomics(f"need beta > 1 and q > 0, got beta={self.beta}, q={self.q}")
        if self.delta1 <= 0.0 or self.delta2 <= 0.0:
            raise InvalidEconomics("delta1 and delta2 must be positive")
        if self.sigma < 0.0 or self.kappa < 0.0:
            raise InvalidEconomics("sigma and kappa must be nonnegative")
        variation = Variation.UNBOUNDED if self.sigma > 0 else Variation.BOUNDED
        object.__setattr__(self, "variation", variation)
        if self.sigma == 0.0:
            if self.kappa == 0.0:
                raise SubordinatorViolation(
                    "sigma = 0 and kappa = 0 leaves Y a deterministic drift"
                )
            # bounded variation: the no-bailout-to-safety assumption is
            # c2 = c0 - delta1 - delta2 > 0
            if self.drift_c(2) <= 0.0:
                raise SubordinatorViolation(
                    f"c2 = c_Y - delta2 = {self.drift_c(2):g} must be positive when sigma = 0"
                )
            if self.drift_c(1) <= 0.0:
                raise SubordinatorViolation(
                    "c_Y must be positive when sigma = 0 (Y may not be a subordinator)"
                )

    # drifts of the spectrally negative processes X_k
    def drift_c(self, k: int) -> float:
        """Natural drift c_k = c_Y + delta1 - sum_{i<=k} delta_i."""
        return self.c_Y + self.delta1 - (self.delta1 if k >= 1 else 0.0) - (
            self.delta2 if k >= 2 else 0.0
        )

    def gamma_drift(self, k: int) -> float:
        """Levy-Khintchine drift gamma_k = c_k - int_0^1 z Pi(dz)."""
        return self.drift_c(k) - self.kappa * self._truncated_jump_mean()

    def _truncated_jump_mean(self) -> float:
        """E[Z 1_{Z<1}] via int_0^1 z alpha e^{Tz} t dz, closed form."""
        if self.kappa == 0.0:
            return 0.0
        T = self.jumps.T
        m = self.jumps.m
        eye = np.eye(m)
        Tinv = np.linalg.inv(T)
        eT = expm(T)
        block = Tinv @ (eT @ (T - eye) + eye) @ Tinv
        return float(self.jumps.alpha @ block @ self.jumps.t)

    def laplace_exponent(self, k: int, s) -> complex:
        """psi_k(s) for complex s away from the eigenvalues of T."""
        if k not in (0, 1, 2):
            raise ValueError("k must be 0, 1 or 2")
        s = complex(s)
        drift = self.c_Y + self.delta1 - sum((self.delta1, self.delta2)[:k])
        val = drift * s + 0.5 * self.sigma**2 * s * s
        if self.kappa > 0.0:
            eigs = self.jumps.eigenvalues()
            if np.min(np.abs(s - eigs)) < 1e-12 * (1.0 + abs(s)):
                raise PoleAtEigenvalue(f"s={s} is an eigenvalue of T")
            val += self.kappa * (self.jumps.laplace(s) - 1.0)
        return val

    def laplace_exponent_derivative(self, k: int, s) -> complex:
        """psi_k'(s) = drift + sigma^2 s + kappa * alpha (sI-T)^{-2} ... t."""
        s = complex(s)
        drift = self.c_Y + self.delta1 - sum((self.delta1, self.delta2)[:k])
        val = drift + self.sigma**2 * s
        if self.kappa > 0.0:
            eye = np.eye(self.jumps.m)
            A = s * eye - self.jumps.T
            v = np.linalg.solve(A, self.jumps.t)
            val += self.kappa * (-self.jumps.alpha @ np.linalg.solve(A, v))
        return val

    def levy_density(self, z):
        """Density of the Levy measure Pi: kappa * alpha e^{Tz} t, z > 0."""
        if np.any(np.asarray(z) <= 0):
            raise ValueError("levy_density requires z > 0")
        if self.kappa == 0.0:
            return 0.0 * np.asarray(z, dtype=float) if np.ndim(z) else 0.0
        return self.kappa * self.jumps.density(z)

    def variation_class(self) -> Variation:
        return self.variation

    def to_config_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "c_Y": self.c_Y,
            "kappa": self.kappa,
            "alpha": self.jumps.alpha.tolist(),
            "T": self.jumps.T.tolist(),
            "delta1": self.delta1,
            "delta2": self.delta2,
            "q": self.q,
            "beta": self.beta,
            "rho": self.rho,
        }


def build_model(
    *,
    sigma: float,
    c_Y: float,
    kappa: float,
    alpha,
    T,
    delta1: float,
    delta2: float,
    q: float,
    beta: float,
    rho: float,
) -> LevyModel:
    """Validate raw parameters and assemble a LevyModel."""
    for name, v in (
        ("sigma", sigma), ("c_Y", c_Y), ("kappa", kappa), ("delta1", delta1),
        ("delta2", delta2), ("q", q), ("beta", beta), ("rho", rho),
    ):
        if not np.isfinite(v):
            raise ModelError(f"parameter {name} is not finite: {v}")
    jumps = PhaseTypeRep(np.asarray(alpha, dtype=float), np.asarray(T, dtype=float))
    return LevyModel(
        sigma=float(sigma), c_Y=float(c_Y), kappa=float(kappa), jumps=jumps,
        delta1=float(delta1), delta2=float(delta2), q=float(q), beta=float(beta),
        rho=float(rho),
    )


def load_model(path) -> LevyModel:
    """Read a model config file (JSON with the documented field names)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    required = {"sigma", "c_Y", "kappa", "alpha", "T", "delta1", "delta2", "q", "beta", "rho"}
    missing = required - raw.keys()
    if missing:
        raise ModelError(f"model config missing fields: {sorted(missing)}")
    unknown = raw.keys() - required
    if unknown:
        raise ModelError(f"model config has unknown fields: {sorted(unknown)}")
    return build_model(**raw)


def save_model(model: LevyModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_config_dict(), fh, indent=2)
        fh.write("\n")
