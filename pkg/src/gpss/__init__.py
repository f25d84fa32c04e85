"""Singular and oscillating ground states of a trapped radial equation.

The package shoots positive decaying solutions of

    u'' + (d-1)/r u' - (r^2 - lambda) u + u^q + u^p = 0

for the eigenvalue ``lambda``, computes the singular solution and the
Emden-Fowler backbone, and checks the asymptotic laws relating them.
"""

from .core import CANONICAL, DerivedConstants, ProblemParams, derive_constants, joseph_lundgren, validate
from .errors import (
    ConvergenceFailure,
    CurveMonotone,
    DomainError,
    ExtrapolationError,
    GPSSError,
    NoPlateau,
    NoSignChange,
    SweepDegenerate,
    ValidationError,
    WindowTooShort,
)
from .integrator import Profile, RadialState, classify_tail, integrate, origin_init_singular, origin_init_smooth
from .profiles import ShootResult, find_lambda_star, scale_emden, shoot_lambda, solve_emden_fowler

__version__ = "0.1.0"

__all__ = [
    "CANONICAL",
    "DerivedConstants",
    "ProblemParams",
    "derive_constants",
    "joseph_lundgren",
    "validate",
    "Profile",
    "RadialState",
    "classify_tail",
    "integrate",
    "origin_init_singular",
    "origin_init_smooth",
    "ShootResult",
    "find_lambda_star",
    "scale_emden",
    "shoot_lambda",
    "solve_emden_fowler",
    "ConvergenceFailure",
    "CurveMonotone",
    "DomainError",
    "ExtrapolationError",
    "GPSSError",
    "NoPlateau",
    "NoSignChange",
    "SweepDegenerate",
    "ValidationError",
    "WindowTooShort",
]
