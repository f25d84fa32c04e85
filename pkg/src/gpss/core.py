"""Problem parameters, closed-form constants and hypothesis checks.

The equation treated throughout the package is the radial reduction

    u'' + (d-1)/r u' - (r^2 - lambda) u + |u|^{q-1} u + |u|^{p-1} u = 0,

with the q-term optional. ``linear_mode`` drops both nonlinear terms, which
turns the problem into the harmonic oscillator with ground state
``exp(-r^2/2)`` at ``lambda = d``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

from .errors import ValidationError

__all__ = [
    "ProblemParams",
    "DerivedConstants",
    "joseph_lundgren",
    "derive_constants",
    "validate",
    "CANONICAL",
]


@dataclass(frozen=True)
class ProblemParams:
    d: int
    p: float
    q: Optional[float] = None
    lam: Optional[float] = None
    linear_mode: bool = False

    @property
    def has_q(self) -> bool:
        return self.q is not None

    def with_lambda(self, lam: Optional[float]) -> "ProblemParams":
        return replace(self, lam=lam)

    def to_dict(self) -> dict:
        out = {"d": self.d, "p": self.p}
        if self.q is not None:
            out["q"] = self.q
        if self.lam is not None:
            out["lambda"] = self.lam
        out["linear_mode"] = self.linear_mode
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemParams":
        unknown = set(data) - {"d", "p", "q", "lambda", "linear_mode"}
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        return cls(
            d=int(data["d"]),
            p=float(data["p"]),
            q=None if data.get("q") is None else float(data["q"]),
            lam=None if data.get("lambda") is None else float(data["lambda"]),
            linear_mode=bool(data.get("linear_mode", False)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProblemParams":
        return cls.from_dict(json.loads(text))


CANONICAL = ProblemParams(d=5, p=3.0, q=1.5)


@dataclass(frozen=True)
class DerivedConstants:
    """Every closed-form constant attached to ``(d, p, q)``.

    ``discriminant`` is ``(d-2)^2 - 4 p A^{p-1}``; it is negative exactly in
    the oscillatory regime ``p < p_JL`` and ``omega`` is the square root of
    its absolute value.
    """

    d: int
    p: float
    q: Optional[float]
    A: float
    alpha: float
    sigma: float
    beta: float
    omega: float
    discriminant: float
    p_JL: float
    lambda1: float
    m: float
    mu: float
    origin_correction_exponent: float

    @property
    def oscillatory(self) -> bool:
        return self.discriminant < 0.0

    @property
    def sobolev_exponent(self) -> float:
        return (self.d + 2) / (self.d - 2)

    @property
    def log_frequency(self) -> float:
        """Frequency in ``log r`` of the Euler modes ``r^s``, ``s(s+d-2) + p A^{p-1} = 0``.

        The imaginary part of ``s`` is ``omega / 2``; ``omega`` itself is kept
        as the square root of the full discriminant.
        """
        return 0.5 * self.omega

    @property
    def theta_frequency(self) -> float:
        """Frequency in ``log theta`` of ``lambda(theta)`` implied by the interior scaling."""
        return self.log_frequency * (self.p - 1.0) / 2.0

    @property
    def theta_frequency_stated(self) -> float:
        """The ``alpha * omega`` form of the same frequency."""
        return self.alpha * self.omega

    def to_dict(self) -> dict:
        out = asdict(self)
        out["log_frequency"] = self.log_frequency
        out["theta_frequency"] = self.theta_frequency
        if math.isinf(out["p_JL"]):
            out["p_JL"] = "inf"
        return out


def joseph_lundgren(d: int) -> float:
    """Return the Joseph-Lundgren exponent, ``inf`` for ``d <= 10``."""
    if d < 3:
        raise ValidationError("dimension", f"d ≥ 3 required (d={d})")
    if d <= 10:
        return math.inf
    return 1.0 + 4.0 / (d - 4 - 2.0 * math.sqrt(d - 1))


def _basic_checks(params: ProblemParams) -> None:
    if params.d < 3:
        raise ValidationError("dimension", f"d ≥ 3 required (d={params.d})")
    if not params.p > 1:
        raise ValidationError("p_not_superlinear", f"p > 1 required (p={params.p})")
    if params.q is not None and not params.q > 1:
        raise ValidationError("q_not_superlinear", f"q > 1 required (q={params.q})")


def derive_constants(params: ProblemParams) -> DerivedConstants:
    _basic_checks(params)
    d, p, q = params.d, params.p, params.q
    alpha = 2.0 / (p - 1.0)
    gap = d - 2.0 - alpha
    if gap <= 0:
        raise ValidationError("A undefined", f"d - 2 - 2/(p-1) > 0 required (got {gap:g})")
    a_pow = alpha * gap  # A^{p-1}
    A = a_pow ** (1.0 / (p - 1.0))
    disc = (d - 2.0) ** 2 - 4.0 * p * a_pow
    m = a_pow ** -0.5
    if q is None:
        # pure power: first correction comes from the lambda term, O(r^2)
        kappa = 2.0
    else:
        kappa = 2.0 * (p - q) / (p - 1.0)
    return DerivedConstants(
        d=d,
        p=p,
        q=q,
        A=A,
        alpha=alpha,
        sigma=d / 2.0 - alpha,
        beta=(p + 1.0) / 2.0,
        omega=math.sqrt(abs(disc)),
        discriminant=disc,
        p_JL=joseph_lundgren(d),
        lambda1=float(d),
        m=m,
        mu=m * (d - 2.0 - 2.0 * alpha),
        origin_correction_exponent=kappa,
    )


def validate(params: ProblemParams, mode: str = "basic") -> ProblemParams:
    """Check ``params`` and return it unchanged.

    ``basic`` only enforces ``d >= 3``, ``p > 1`` and ``q > 1``. ``theorem``
    additionally enforces the hypotheses under which the oscillating
    eigenvalue branch exists, plus ``0 < lambda < d`` when lambda is set.
    """
    if mode not in ("basic", "theorem"):
        raise ValueError(f"unknown validation mode {mode!r}")
    _basic_checks(params)
    if mode == "basic":
        return params

    d, p, q = params.d, params.p, params.q
    crit = (d + 2) / (d - 2)
    if not p > crit:
        raise ValidationError("p subcritical", f"p > (d+2)/(d-2) = {crit:g} required (p={p:g})")
    pjl = joseph_lundgren(d)
    if not p < pjl:
        raise ValidationError("p ≥ p_JL", f"p < p_JL = {pjl:g} required (p={p:g})")
    if q is not None:
        if not q < (p + 1) / 2:
            raise ValidationError("q ≥ (p+1)/2", f"q < (p+1)/2 = {(p + 1) / 2:g} required (q={q:g})")
        if not q < p:
            raise ValidationError("q ≥ p", f"q < p required (q={q:g}, p={p:g})")
    if params.lam is not None:
        if not params.lam > 0:
            raise ValidationError("lambda ≤ 0", f"lambda > 0 required (lambda={params.lam:g})")
        if not params.lam < d:
            raise ValidationError("lambda ≥ d", f"lambda < d = {d} required (lambda={params.lam:g})")
    return params
