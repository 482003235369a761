"""Optimal two-threshold dividend/capital-injection strategies.

Solves, for a spectrally positive Levy surplus process of phase-type
jump-diffusion form, the optimal pair of refraction thresholds
(a_star, b_star) -- inject capital at the maximal rate below a_star,
pay dividends at the maximal rate above b_star -- together with the
closed-form value function, an independent Monte Carlo oracle and the
sweep tooling for sensitivity studies.
"""

from .expsum import ExpSum, ExpTerm, ExpSumError, ImaginaryResidue, PowerOverflow
from .model import (
    InvalidEconomics,
    InvalidPhaseType,
    LevyModel,
    ModelError,
    PhaseTypeRep,
    PoleAtEigenvalue,
    SubordinatorViolation,
    Variation,
    build_model,
    load_model,
    save_model,
)
from .scale import (
    RepeatedRoots,
    RootCountMismatch,
    RootSet,
    ScaleFunction,
    boundary_and_asymptotics,
    build_scale_function,
    solve_exponent_roots,
)

__all__ = [
    "ExpSum",
    "ExpTerm",
    "ExpSumError",
    "ImaginaryResidue",
    "PowerOverflow",
    "InvalidEconomics",
    "InvalidPhaseType",
    "LevyModel",
    "ModelError",
    "PhaseTypeRep",
    "PoleAtEigenvalue",
    "SubordinatorViolation",
    "Variation",
    "build_model",
    "load_model",
    "save_model",
    "RepeatedRoots",
    "RootCountMismatch",
    "RootSet",
    "ScaleFunction",
    "boundary_and_asymptotics",
    "build_scale_function",
    "solve_exponent_roots",
]

__version__ = "0.1.0"
