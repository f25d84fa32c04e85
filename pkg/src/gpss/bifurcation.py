"""Sweeps of the eigenvalue curve lambda(theta) and its oscillation law."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analysis import PowerFit, SinFit, fit_log_sinusoid, fit_power_law
from .core import DerivedConstants, ProblemParams
from .errors import ConvergenceFailure, CurveMonotone, SweepDegenerate
from .integrator import Profile
from .profiles import DEFAULT_ATOL, DEFAULT_RTOL, ShootResult, shoot_lambda

log = logging.getLogger(__name__)

__all__ = [
    "BranchPoint",
    "BifurcationCurve",
    "TheoryReport",
    "MatchingResult",
    "sweep",
    "extract_branch_points",
    "compare_theory",
    "matching_residual",
    "DEFAULT_TOLERANCES",
]

WARM_HALF_WIDTH = 0.05
MAX_FAILURE_FRACTION = 0.1
NOISE_FACTOR = 1e3

DEFAULT_TOLERANCES = {"frequency_tol": 0.05, "envelope_tol": 0.1, "center_tol": 1e-3, "affine_tol": 0.02}


@dataclass(frozen=True)
class BranchPoint:
    n: int
    theta: float
    lam: float
    offset: float  # lam - lambda_star

    def as_row(self):
        return (self.n, self.theta, self.lam)


@dataclass
class BifurcationCurve:
    params: ProblemParams
    samples: list
    lambda_star_ref: Optional[float] = None
    branch_points: list = field(default_factory=list)
    period_fit: Optional[SinFit] = None
    envelope_fit: Optional[PowerFit] = None
    failures: list = field(default_factory=list)
    mode: str = "warm-start"

    @property
    def thetas(self) -> np.ndarray:
        return np.array([s.theta for s in self.samples])

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s.lam for s in self.samples])

    @property
    def achieved_tol(self) -> float:
        return max((s.achieved_tol for s in self.samples), default=0.0)

    def rows(self):
        """Curve rows ``theta, lambda, iterations, achieved_tol``."""
        return [(s.theta, s.lam, s.iterations, s.achieved_tol) for s in self.samples]


def _shoot_point(theta, bracket, tol, params, rtol, atol, target, expand, prescan):
    return shoot_lambda(theta, bracket, tol, params, rtol=rtol, atol=atol, target=target,
                        expand=expand, prescan=prescan)


def _light(res: ShootResult) -> ShootResult:
    # keep sweeps small in memory: profiles are recomputed when needed
    res.profile = None
    return res


def sweep(
    theta_grid: Sequence[float],
    bracket: Optional[tuple[float, float]] = None,
    tol: float = 1e-10,
    params: ProblemParams = None,
    *,
    lambda_star: Optional[float] = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    parallel: int = 0,
    keep_profiles: bool = False,
) -> BifurcationCurve:
    """Shoot ``lambda(theta)`` at every grid height, in the order given.

    Sequentially, each bracket is a window around the previous eigenvalue,
    widened until it changes classification. With ``parallel > 1`` the points
    are independent full pre-scans (targeting ``lambda_star`` when given), so
    the result does not depend on the order. Failed points are recorded; more
    than 10% failures raise :class:`SweepDegenerate`.
    """
    if params is None:
        raise ValueError("params is required")
    grid = [float(t) for t in theta_grid]
    if len(grid) < 2:
        raise ValueError("sweep needs at least two heights")
    d = params.d
    full = (0.05, d - 0.05) if bracket is None else tuple(bracket)
    results: dict[float, ShootResult] = {}
    failures = []

    if parallel and parallel > 1:
        mode = f"prescan-parallel[{parallel}]"
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futs = {
                t: pool.submit(_shoot_point, t, full, tol, params, rtol, atol, lambda_star, False, True)
                for t in grid
            }
            for t, fut in futs.items():
                try:
                    res = fut.result()
                    results[t] = res if keep_profiles else _light(res)
                except ConvergenceFailure as exc:
                    failures.append({"theta": t, "error": type(exc).__name__, "message": str(exc)})
    else:
        mode = "warm-start"
        prev = None
        for t in grid:
            try:
                if prev is None:
                    res = _shoot_point(t, full, tol, params, rtol, atol, lambda_star, False, True)
                else:
                    lo = max(1e-3, prev - WARM_HALF_WIDTH)
                    hi = min(2.0 * d if params.linear_mode else d - 1e-3, prev + WARM_HALF_WIDTH)
                    res = _shoot_point(t, (lo, hi), tol, params, rtol, atol, None, True, False)
            except ConvergenceFailure as exc:
                failures.append({"theta": t, "error": type(exc).__name__, "message": str(exc)})
                continue
            prev = res.lam
            results[t] = res if keep_profiles else _light(res)

    if len(failures) > MAX_FAILURE_FRACTION * len(grid):
        raise SweepDegenerate(
            f"{len(failures)} of {len(grid)} sweep points failed", {"failures": failures}
        )
    if failures:
        log.warning("%d sweep points failed and were skipped", len(failures))
    samples = [results[t] for t in sorted(results)]
    return BifurcationCurve(params, samples, lambda_star_ref=lambda_star, failures=failures, mode=mode)


def extract_branch_points(curve: BifurcationCurve, lambda_star: Optional[float] = None) -> list[BranchPoint]:
    """Local extrema of ``lambda - lambda_star`` along ``log theta``.

    Each extremum is refined by a parabola through the sample and its two
    neighbours; consecutive extrema of the same sign are merged, keeping the
    larger one. Numbering starts at 1 for the smallest height.
    """
    lam_star = curve.lambda_star_ref if lambda_star is None else lambda_star
    if lam_star is None:
        raise ValueError("lambda_star is required")
    x = np.log(curve.thetas)
    y = curve.lambdas - lam_star
    if x.size < 3:
        raise CurveMonotone("fewer than three samples")
    found = []
    for i in range(1, x.size - 1):
        left, mid, right = y[i - 1], y[i], y[i + 1]
        if not ((mid > left and mid >= right) or (mid < left and mid <= right)):
            continue
        xs, ys = x[i - 1 : i + 2], y[i - 1 : i + 2]
        a, b, c = np.polyfit(xs - xs[1], ys, 2)
        shift = -b / (2 * a) if a != 0 else 0.0
        shift = min(max(shift, xs[0] - xs[1]), xs[2] - xs[1])
        xe, ye = xs[1] + shift, a * shift * shift + b * shift + c
        if ye == 0:
            continue
        if found and np.sign(found[-1][1]) == np.sign(ye):
            if abs(ye) > abs(found[-1][1]):
                found[-1] = (xe, ye)
            continue
        found.append((xe, ye))
    if not found:
        raise CurveMonotone("no extrema of lambda(theta) - lambda_star on the sampled range")
    curve.lambda_star_ref = lam_star
    curve.branch_points = [
        BranchPoint(n + 1, float(math.exp(xe)), float(lam_star + ye), float(ye)) for n, (xe, ye) in enumerate(found)
    ]
    return curve.branch_points


@dataclass
class TheoryReport:
    frequency_fit: float
    frequency_theory: float
    frequency_corrected: float
    envelope_exponent_fit: float
    envelope_exponent_theory: float
    center: float
    lambda_star: float
    slope_n_fit: float
    slope_residual: float
    slope_candidates: dict
    slope_match: str
    alternates: bool
    n_branch_points: int
    envelope_points: int
    tolerances: dict
    passes: dict

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["slope_candidates"] = dict(self.slope_candidates)
        out["passes"] = dict(self.passes)
        out["tolerances"] = dict(self.tolerances)
        return out


def compare_theory(
    curve: BifurcationCurve,
    derived: DerivedConstants,
    lambda_star: Optional[float] = None,
    tolerances: Optional[dict] = None,
) -> TheoryReport:
    """Confront the sampled curve with the damped log-periodic law.

    The curve is fitted with ``c + a theta^e sin(f log theta + phi)``; the
    frequency ``f`` is compared with ``alpha * omega`` and with the frequency
    implied by the Euler modes, ``e`` with ``(1 - sigma)/alpha`` (also
    checked on the branch-point envelope) and ``c`` with ``lambda_star``.
    """
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    lam_star = curve.lambda_star_ref if lambda_star is None else lambda_star
    if lam_star is None:
        raise ValueError("lambda_star is required")
    points = curve.branch_points or extract_branch_points(curve, lam_star)
    if len(points) < 4:
        raise CurveMonotone(f"need at least 4 branch points, found {len(points)}")

    theory_f = derived.theta_frequency_stated
    fit = fit_log_sinusoid(curve.thetas, curve.lambdas, frequency_hint=theory_f, envelope=True,
                           min_periods=1.0)
    curve.period_fit = fit

    floor = NOISE_FACTOR * max(curve.achieved_tol, 1e-16)
    usable = [b for b in points if abs(b.offset) > floor]
    env = fit_power_law([b.theta for b in usable], [b.offset for b in usable])
    curve.envelope_fit = env
    env_theory = (1.0 - derived.sigma) / derived.alpha

    n = np.array([b.n for b in points], dtype=float)
    lt = np.log([b.theta for b in points])
    slope, icpt = np.polyfit(n, lt, 1)
    resid = float(np.max(np.abs(lt - (slope * n + icpt))) / abs(slope))
    cand = {
        "half_period_alpha_omega": math.pi / theory_f,
        "full_period_alpha_omega": 2.0 * math.pi / theory_f,
        "theta_tilde_law": (derived.p - 1.0) / derived.omega,
        "half_period_euler": math.pi / derived.theta_frequency,
    }
    match = min(cand, key=lambda k: abs(cand[k] - slope))
    signs = np.sign([b.offset for b in points])
    alternates = bool(np.all(signs[1:] == -signs[:-1]))

    passes = {
        "frequency": abs(fit.frequency - theory_f) / theory_f < tol["frequency_tol"],
        "frequency_corrected": abs(fit.frequency - derived.theta_frequency) / derived.theta_frequency
        < tol["frequency_tol"],
        "envelope": abs(env.exponent - env_theory) < tol["envelope_tol"],
        "center": abs(fit.offset - lam_star) < tol["center_tol"],
        "alternation": alternates,
        "affine_n": resid < tol["affine_tol"],
    }
    return TheoryReport(
        frequency_fit=fit.frequency,
        frequency_theory=theory_f,
        frequency_corrected=derived.theta_frequency,
        envelope_exponent_fit=env.exponent,
        envelope_exponent_theory=env_theory,
        center=fit.offset,
        lambda_star=lam_star,
        slope_n_fit=float(slope),
        slope_residual=resid,
        slope_candidates=cand,
        slope_match=match,
        alternates=alternates,
        n_branch_points=len(points),
        envelope_points=len(usable),
        tolerances=tol,
        passes={k: bool(v) for k, v in passes.items()},
    )


@dataclass
class MatchingResult:
    n: np.ndarray
    theta: np.ndarray
    lam: np.ndarray
    D: np.ndarray
    r_window: tuple[float, float]

    def decreasing_from(self, n0: int) -> bool:
        D = self.D[self.n >= n0]
        return bool(np.all(np.diff(D) < 0))


def matching_residual(
    curve: BifurcationCurve,
    Phi: Profile,
    r_star: float = 0.3,
    r_hi: float = 3.0,
    *,
    tol: float = 1e-12,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> MatchingResult:
    """``D_n = max_{[r_star, r_hi]} |u(.; theta_n) - Phi|`` along the branch points.

    Each ``u`` is re-shot at ``theta_n`` with tolerance ``tol`` around the
    branch-point eigenvalue.
    """
    if Phi.r_max < r_hi or Phi.r_min > r_star:
        raise ValueError(f"Phi must cover [{r_star}, {r_hi}]")
    points = curve.branch_points
    if not points:
        raise CurveMonotone("no branch points on the curve")
    r = np.union1d(Phi.r[(Phi.r >= r_star) & (Phi.r <= r_hi)], np.geomspace(r_star, r_hi, 400))
    ref = Phi(r)
    D = []
    lams = []
    for b in points:
        res = shoot_lambda(b.theta, (b.lam - 0.02, b.lam + 0.02), tol, curve.params, rtol=rtol, atol=atol,
                           prescan=False, expand=True)
        u = res.profile
        inside = r[r <= u.r_max]
        D.append(float(np.max(np.abs(u(inside) - ref[: inside.size]))))
        lams.append(res.lam)
    return MatchingResult(
        np.array([b.n for b in points]), np.array([b.theta for b in points]), np.array(lams),
        np.array(D), (r_star, r_hi),
    )
