"""Shooting for the eigenvalue, the singular solution and the Emden-Fowler profile."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import io
from .core import ProblemParams, derive_constants
from .errors import ConvergenceFailure, DomainError, ExtrapolationError, NoSignChange, ValidationError
from .integrator import (
    BLOWS_UP,
    CROSSES_ZERO,
    DECAYING,
    UNDETERMINED,
    Classification,
    EventSet,
    Profile,
    RadialState,
    classify_tail,
    default_r_end,
    emden_coefficients,
    integrate,
    origin_init_singular,
    origin_init_smooth,
    run_kernel,
)

log = logging.getLogger(__name__)

__all__ = [
    "ShootResult",
    "Shooter",
    "smooth_r0",
    "shoot_lambda",
    "find_lambda_star",
    "solve_emden_fowler",
    "scale_emden",
    "ScaledEmden",
    "interior_remainder",
    "Remainder",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
]

DEFAULT_RTOL = 1e-11
DEFAULT_ATOL = 1e-14
PRESCAN_POINTS = 64
RESOLUTION_LIMIT = 1e-9


@dataclass
class ShootResult:
    theta: Optional[float]
    lam: float
    bracket_history: list
    iterations: int
    achieved_tol: float
    profile: Profile
    sign_changes: int = 1
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "lambda": self.lam,
            "iterations": self.iterations,
            "achieved_tol": self.achieved_tol,
            "bracket_history": [
                {"lambda_lo": lo, "lambda_hi": hi, "class_lo": clo, "class_hi": chi}
                for lo, hi, clo, chi in self.bracket_history
            ],
            "sign_changes": self.sign_changes,
        }


def smooth_r0(theta: float, params: ProblemParams) -> float:
    """Start radius for a regular shoot: a fixed fraction of the interior length scale."""
    if params.linear_mode or theta <= 0:
        return 1e-3
    scale = theta ** (-(params.p - 1.0) / 2.0)
    return min(1e-2, max(1e-6, 1e-3 * scale))


@dataclass
class Shooter:
    """Classify trajectories launched at a given eigenvalue.

    ``launch(lam)`` returns the initial state. Every trajectory is integrated
    to ``r_end`` (default ``min(sqrt(lam) + 4, 8)``) with the shooting events.
    """

    params: ProblemParams
    launch: Callable[[float], RadialState]
    scale: float
    kind: str = "Smooth"
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    r_end: Optional[float] = None
    theta: Optional[float] = None
    calls: int = 0

    def profile(self, lam: float) -> Profile:
        self.calls += 1
        init = self.launch(lam)
        r_end = self.r_end if self.r_end is not None else default_r_end(lam)
        events = EventSet.shooting(self.params, lam, self.scale, self.atol)
        return integrate(init, r_end, self.params, lam, (self.rtol, self.atol), events, self.kind, theta=self.scale)

    def classify(self, lam: float) -> tuple[Classification, Profile]:
        prof = self.profile(lam)
        return classify_tail(prof, self.params, lam), prof


def _prescan(shooter: Shooter, lo: float, hi: float, points: int, target: Optional[float]):
    grid = np.linspace(lo, hi, points)
    kinds = [shooter.classify(float(x))[0].kind for x in grid]
    changes = [
        i for i in range(points - 1)
        if kinds[i] != kinds[i + 1] and UNDETERMINED not in (kinds[i], kinds[i + 1])
    ]
    if not changes:
        raise NoSignChange(
            f"no classification change on [{lo:g}, {hi:g}] ({points} points)",
            {"classes": sorted(set(kinds))},
        )
    if target is None:
        pick = changes[0]
    else:
        pick = min(changes, key=lambda i: abs(0.5 * (grid[i] + grid[i + 1]) - target))
    return float(grid[pick]), float(grid[pick + 1]), kinds[pick], kinds[pick + 1], len(changes)


def _bisect(shooter: Shooter, lo, hi, clo, chi, tol, history, max_iter=200):
    iterations = 0
    exact = None
    while hi - lo > tol:
        if iterations >= max_iter:
            raise ConvergenceFailure("bisection iteration limit", {"history": history[-5:]})
        iterations += 1
        mid = 0.5 * (lo + hi)
        cmid = shooter.classify(mid)[0].kind
        if cmid not in (clo, chi, DECAYING):
            # undecidable point: probe nearby before giving up
            for shift in (0.1, -0.1, 0.3, -0.3):
                mid = 0.5 * (lo + hi) + shift * (hi - lo)
                cmid = shooter.classify(mid)[0].kind
                if cmid in (clo, chi, DECAYING):
                    break
            else:
                if hi - lo < RESOLUTION_LIMIT * max(1.0, abs(lo)):
                    # trajectories track the separatrix to r_end: the bracket
                    # is already as narrow as the integration can resolve
                    history.append((lo, hi, clo, chi))
                    break
                raise ConvergenceFailure(
                    f"classification {cmid} repeatedly inside bracket [{lo:.15g}, {hi:.15g}]",
                    {"history": history[-5:], "class": cmid},
                )
        if cmid == clo:
            lo = mid
        elif cmid == chi:
            hi = mid
        else:
            # decayed below the floor: the separatrix sits inside the resolution
            exact = mid
            history.append((lo, hi, clo, chi))
            break
        history.append((lo, hi, clo, chi))
    return lo, hi, iterations, exact


def _finish(shooter: Shooter, lam: float) -> Profile:
    """Profile at ``lam`` restricted to its positive part."""
    prof = shooter.profile(lam)
    if np.all(prof.u > 0):
        return prof
    stop = int(np.argmax(prof.u <= 0))
    if stop < 2:
        raise ConvergenceFailure("converged profile is not positive near the origin")
    meta = dict(prof.meta, truncated_at=float(prof.r[stop]))
    return Profile(
        prof.params, lam, prof.kind, prof.r[:stop], prof.u[:stop], prof.du[:stop],
        prof.ddu[:stop], prof.event, meta,
    )


def run_shoot(
    shooter: Shooter,
    bracket: tuple[float, float],
    tol: float,
    prescan: bool = True,
    target: Optional[float] = None,
    expand: bool = False,
) -> ShootResult:
    """Bisection on the tail classification over ``bracket``."""
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError(f"bracket must satisfy lo < hi (got {bracket})")
    d = shooter.params.d
    sign_changes = 1
    clo = shooter.classify(lo)[0].kind
    chi = shooter.classify(hi)[0].kind
    if expand and (clo == chi or UNDETERMINED in (clo, chi)):
        lo, hi, clo, chi = _expand(shooter, lo, hi, d)
    elif prescan or clo == chi or UNDETERMINED in (clo, chi):
        lo, hi, clo, chi, sign_changes = _prescan(shooter, lo, hi, PRESCAN_POINTS, target)
    history = [(lo, hi, clo, chi)]
    lo, hi, iterations, exact = _bisect(shooter, lo, hi, clo, chi, tol, history)
    lam = exact if exact is not None else 0.5 * (lo + hi)
    achieved = 0.0 if exact is not None else hi - lo
    prof = _finish(shooter, lam)
    return ShootResult(
        theta=shooter.theta,
        lam=lam,
        bracket_history=history,
        iterations=iterations,
        achieved_tol=achieved,
        profile=prof,
        sign_changes=sign_changes,
        meta={"integrations": shooter.calls, "rtol": shooter.rtol, "atol": shooter.atol},
    )


def _expand(shooter: Shooter, lo, hi, d, grow=3.0, max_tries=12):
    """Widen a warm-start bracket until its ends classify differently."""
    # eigenvalues stay below d except in linear mode, where lambda = d is the answer
    floor_, ceil_ = 1e-3, (2.0 * d if shooter.params.linear_mode else d - 1e-3)
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    for _ in range(max_tries):
        clo = shooter.classify(lo)[0].kind
        chi = shooter.classify(hi)[0].kind
        if clo != chi and UNDETERMINED not in (clo, chi):
            return lo, hi, clo, chi
        half *= grow
        lo = max(floor_, center - half)
        hi = min(ceil_, center + half)
    raise NoSignChange(f"bracket expansion around {center:g} found no sign change")


def shoot_lambda(
    theta: float,
    bracket: Optional[tuple[float, float]] = None,
    tol: float = 1e-10,
    params: ProblemParams = None,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    r0: Optional[float] = None,
    prescan: bool = True,
    target: Optional[float] = None,
    expand: bool = False,
) -> ShootResult:
    """Eigenvalue ``lambda(theta)`` of the positive decaying solution with ``u(0) = theta``."""
    if params is None:
        raise ValueError("params is required")
    if not theta > 0:
        raise DomainError(f"theta must be positive (theta={theta})")
    d = params.d
    if bracket is None:
        bracket = (0.05, d - 0.05)
    if not (0 < bracket[0] < bracket[1] < d) and not params.linear_mode:
        raise ValidationError("bracket", f"0 < lambda_lo < lambda_hi < d required (got {bracket})")
    r0 = smooth_r0(theta, params) if r0 is None else r0
    shooter = Shooter(
        params,
        lambda lam: origin_init_smooth(theta, r0, params, lam),
        scale=theta,
        kind="Smooth",
        rtol=rtol,
        atol=atol,
        theta=theta,
    )
    return run_shoot(shooter, bracket, tol, prescan=prescan, target=target, expand=expand)


def _singular_shooter(params, r0, order, rtol, atol):
    k = derive_constants(params)
    return Shooter(
        params,
        lambda lam: origin_init_singular(r0, params, order, lam),
        scale=k.A * r0**-k.alpha,
        kind="Singular",
        rtol=rtol,
        atol=atol,
    )


def find_lambda_star(
    bracket: Optional[tuple[float, float]] = None,
    tol: float = 1e-11,
    r0: float = 1e-4,
    params: ProblemParams = None,
    *,
    order: str = "corrected",
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    use_cache: bool = True,
) -> tuple[float, Profile]:
    """Eigenvalue ``lambda_*`` carrying the singular solution, and ``Phi`` itself.

    The eigenvalue is cached on disk keyed by every input that affects it.
    ``Phi.meta`` carries ``cache_hit``, the bracket history and the number of
    sign changes seen by the pre-scan (more than one would contradict
    uniqueness and is reported rather than hidden).
    """
    if params is None:
        raise ValueError("params is required")
    if params.linear_mode:
        raise DomainError("no singular solution in linear mode")
    if not 1e-6 <= r0 <= 1e-3:
        raise DomainError(f"singular start radius must lie in [1e-6, 1e-3] (r0={r0})")
    d = params.d
    bracket = (0.05, d - 0.05) if bracket is None else tuple(bracket)
    key = io.cache_key(
        d=d, p=params.p, q=params.q, r0=r0, lambda_tol=tol, rtol=rtol, atol=atol,
        order=order, bracket=list(bracket),
    )
    shooter = _singular_shooter(params, r0, order, rtol, atol)
    cached = io.cache_load(key) if use_cache else None
    if cached is not None:
        lam = float(cached["lambda_star"])
        prof = _finish(shooter, lam)
        prof.kind = "Singular"
        prof.meta.update(cache_hit=True, cache_key=key, sign_changes=cached.get("sign_changes", 1),
                         bracket_history=cached.get("bracket_history", []), achieved_tol=cached.get("achieved_tol"))
        return lam, prof
    res = run_shoot(shooter, bracket, tol, prescan=True)
    if res.sign_changes > 1:
        log.warning("singular shoot found %d sign changes; lambda_* may not be unique", res.sign_changes)
    prof = res.profile
    prof.meta.update(
        cache_hit=False, cache_key=key, sign_changes=res.sign_changes,
        bracket_history=res.to_dict()["bracket_history"], achieved_tol=res.achieved_tol,
        iterations=res.iterations,
    )
    if use_cache:
        try:
            io.cache_store(key, {
                "lambda_star": res.lam, "achieved_tol": res.achieved_tol,
                "sign_changes": res.sign_changes, "bracket_history": res.to_dict()["bracket_history"],
                "inputs": {"d": d, "p": params.p, "q": params.q, "r0": r0, "tol": tol, "rtol": rtol},
            })
        except OSError as exc:  # cache is an optimisation only
            log.warning("could not write lambda_* cache: %s", exc)
    return res.lam, prof


def solve_emden_fowler(
    r_max: float = 1e4,
    tol: float = 1e-12,
    params: ProblemParams = None,
    r0: float = 1e-3,
) -> Profile:
    """Profile ``Q`` of ``Delta Q + Q^p = 0`` with ``Q(0) = 1``, ``Q'(0) = 0``."""
    if params is None:
        raise ValueError("params is required")
    d, p = params.d, params.p
    if not p > (d + 2) / (d - 2):
        raise ValidationError("p subcritical", f"p > (d+2)/(d-2) required for a positive Q (p={p:g})")
    c2 = -1.0 / (2.0 * d)
    c4 = p / (8.0 * d * (d + 2.0))
    init = RadialState(r0, 1.0 + c2 * r0**2 + c4 * r0**4, 2.0 * c2 * r0 + 4.0 * c4 * r0**3)
    events = EventSet(zero=True, escape=False)
    R, U, DU, DDU, status, n_rej, _ = run_kernel(
        init, r_max, emden_coefficients(params), events, tol, tol * 1e-6
    )
    if np.any(U <= 0):
        raise ConvergenceFailure(
            "subcritical-like oscillation: Q crossed zero", {"r": float(R[int(np.argmax(U <= 0))])}
        )
    if R[-1] < r_max * (1 - 1e-12):
        raise ConvergenceFailure(f"Emden-Fowler integration stopped at r={R[-1]:.6g}", {"status": status})
    meta = {"rtol": tol, "theta": 1.0, "series": (c2, c4)}
    return Profile(params, 0.0, "EmdenFowler", R, U, DU, DDU, None, meta)


class ScaledEmden:
    """Evaluator of ``theta Q(theta^{(p-1)/2} r)`` built on the dense output of ``Q``."""

    def __init__(self, theta: float, Q: Profile):
        if not theta > 0:
            raise DomainError(f"theta must be positive (theta={theta})")
        self.theta = float(theta)
        self.Q = Q
        self.stretch = theta ** ((Q.params.p - 1.0) / 2.0)
        self._series = Q.meta.get("series", (-1.0 / (2.0 * Q.params.d), 0.0))

    def _q(self, tau, derivative):
        tau = np.asarray(tau, dtype=float)
        inner = tau < self.Q.r_min
        out = np.empty_like(tau)
        if np.any(~inner):
            out[~inner] = self.Q.evaluate(tau[~inner], derivative)
        if np.any(inner):
            c2, c4 = self._series
            t = tau[inner]
            if derivative == 0:
                out[inner] = 1.0 + c2 * t**2 + c4 * t**4
            elif derivative == 1:
                out[inner] = 2 * c2 * t + 4 * c4 * t**3
            else:
                out[inner] = 2 * c2 + 12 * c4 * t**2
        return out

    def evaluate(self, r, derivative: int = 0):
        scalar = np.ndim(r) == 0
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0):
            raise DomainError("radius must be non-negative")
        tau = self.stretch * r
        if np.any(tau > self.Q.r_max * (1 + 1e-12)):
            raise ExtrapolationError(
                f"theta-scaled radius exceeds the Q grid (tau max {self.Q.r_max:.6g})"
            )
        out = self.theta * self.stretch**derivative * self._q(tau, derivative)
        return float(out[0]) if scalar else out

    def __call__(self, r):
        return self.evaluate(r, 0)

    def derivative(self, r):
        return self.evaluate(r, 1)


def scale_emden(theta: float, Q: Profile) -> ScaledEmden:
    return ScaledEmden(theta, Q)


@dataclass
class Remainder:
    tau: np.ndarray
    T: np.ndarray
    dT: np.ndarray
    norm: float
    tau1: float
    theta: float
    lam: float


def interior_remainder(
    theta: float,
    r_star: float,
    lam: Optional[float],
    params: ProblemParams,
    Q: Profile,
    *,
    rtol: float = 1e-12,
    atol: float = 1e-30,
    tol: float = 1e-10,
) -> Remainder:
    """Rescaled deviation ``T`` of the interior solution from ``theta Q``.

    ``T(tau) = theta^{p-1} (u(theta^{-(p-1)/2} tau) / theta - Q(tau))`` on
    ``[0, tau_1]`` with ``tau_1 = theta^{(p-1)/2} r_star``, together with its
    weighted sup norm ``sup (1+tau)^{alpha-2} (|T| + tau |T'|)`` over the grid.
    When ``lam`` is None the eigenvalue is found by shooting first.
    """
    p = params.p
    alpha = 2.0 / (p - 1.0)
    if not theta > r_star ** (-alpha):
        raise ValidationError(
            "theta too small", f"theta > r_star^(-2/(p-1)) = {r_star ** -alpha:.6g} required (theta={theta:g})"
        )
    if lam is None:
        lam = shoot_lambda(theta, tol=tol, params=params).lam
    stretch = theta ** ((p - 1.0) / 2.0)
    tau1 = stretch * r_star
    if tau1 > Q.r_max:
        raise ExtrapolationError(f"tau_1 = {tau1:.6g} beyond the Q grid")
    r0 = smooth_r0(theta, params)
    init = origin_init_smooth(theta, r0, params, lam)
    R, U, DU, DDU, status, _, _ = run_kernel(
        init, r_star, _coeffs(params, lam), EventSet.none(), rtol, atol
    )
    u = Profile(params, lam, "Smooth", R, U, DU, DDU)
    tau = Q.r[(Q.r >= stretch * u.r_min) & (Q.r <= tau1)]
    tau = np.union1d(tau, [tau1])
    r = np.minimum(tau / stretch, u.r_max)
    big = theta ** (p - 1.0)
    T = big * (u(r) / theta - Q(tau))
    dT = big * (u.derivative(r) / (theta * stretch) - Q.derivative(tau))
    tau = np.concatenate([[0.0], tau])
    T = np.concatenate([[0.0], T])
    dT = np.concatenate([[0.0], dT])
    weight = (1.0 + tau) ** (alpha - 2.0)
    norm = float(np.max(weight * (np.abs(T) + tau * np.abs(dT))))
    return Remainder(tau, T, dT, norm, tau1, theta, lam)


def _coeffs(params, lam):
    from .integrator import coefficients

    return coefficients(params, lam)
