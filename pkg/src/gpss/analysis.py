"""Asymptotic-law extraction and operator identities.

Fits of oscillations in ``log r``, power-law envelopes, far-field plateaus,
the kernel of the operator linearized about the singular solution, Wronskians
and the exterior change of variables.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import lombscargle

from . import _rk
from .core import ProblemParams, derive_constants
from .errors import DomainError, NoPlateau, WindowTooShort
from .integrator import EventSet, Profile, RadialState, run_kernel

__all__ = [
    "SinFit",
    "PowerFit",
    "FarField",
    "KEstimate",
    "WronskianResult",
    "LambdaQResidual",
    "fit_log_sinusoid",
    "fit_power_law",
    "far_field_diagnostics",
    "extract_K",
    "kernel_psi1",
    "kernel_psi2",
    "wronskian",
    "euler_modes",
    "euler_mode_profiles",
    "lambda_Q_residual",
    "exterior_transform_residual",
    "transform_residual_series",
]

TWO_PI = 2.0 * math.pi
# growing-mode contamination ~ exp(r^2 - r_end^2); keep it below exp(-TAIL_MARGIN)
TAIL_MARGIN = 18.0


# -- fits -------------------------------------------------------------------


@dataclass
class SinFit:
    """``y = amplitude * r^envelope_exponent * sin(frequency log r + phase) + offset``."""

    amplitude: float
    frequency: float
    phase: float
    offset: float
    residual_rms: float
    window: tuple[float, float]
    envelope_exponent: float = 0.0
    periods: float = 0.0
    n_samples: int = 0

    def predict(self, r):
        L = np.log(np.asarray(r, dtype=float))
        env = np.exp(self.envelope_exponent * L)
        return self.amplitude * env * np.sin(self.frequency * L + self.phase) + self.offset

    def to_dict(self) -> dict:
        out = asdict(self)
        out["window"] = list(self.window)
        return out


@dataclass
class PowerFit:
    """``|y| = coefficient * x^exponent`` fitted in log-log coordinates."""

    exponent: float
    coefficient: float
    residual_rms: float
    n_points: int
    r2: float

    def to_dict(self) -> dict:
        return asdict(self)


def _dominant_frequency(L, y, f_lo, f_hi):
    freqs = np.linspace(f_lo, f_hi, 4000)
    power = lombscargle(L, y - y.mean(), freqs)
    return float(freqs[int(np.argmax(power))])


def fit_log_sinusoid(
    r,
    y,
    frequency_hint: Optional[float] = None,
    *,
    envelope: bool = False,
    min_periods: float = 2.5,
    min_samples: int = 32,
) -> SinFit:
    """Least-squares fit of an oscillation in ``log r``.

    The frequency is a free parameter; ``frequency_hint`` only seeds it and
    sets the period count used to reject short windows. Without a hint the
    seed is the Lomb-Scargle peak. ``envelope=True`` adds a free power-law
    envelope ``r^e``.
    """
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    if r.shape != y.shape or r.ndim != 1:
        raise ValueError("r and y must be 1-d arrays of equal length")
    if r.size < min_samples:
        raise WindowTooShort(f"need at least {min_samples} samples (got {r.size})")
    if np.any(r <= 0) or not np.all(np.isfinite(y)):
        raise DomainError("fit requires r > 0 and finite samples")
    L = np.log(r)
    span = float(L.max() - L.min())
    if span <= 0:
        raise WindowTooShort("window has zero width in log r")
    nyq = math.pi * (r.size - 1) / span
    f_scan = _dominant_frequency(L, y, 0.5 * TWO_PI / span, min(nyq, 200.0 * TWO_PI / span))
    f0 = f_scan if frequency_hint is None else float(frequency_hint)
    periods = span * f0 / TWO_PI
    if periods < min_periods:
        raise WindowTooShort(f"window spans {periods:.2f} periods, {min_periods} required")

    Lc = 0.5 * (L.min() + L.max())

    if envelope:
        def model(x):
            return x[0] * np.exp(x[4] * (L - Lc)) * np.sin(x[1] * L + x[2]) + x[3]
    else:
        def model(x):
            return x[0] * np.sin(x[1] * L + x[2]) + x[3]

    # the hint and the periodogram peak are both tried as seeds, so a poor
    # hint cannot trap the fit in a side minimum
    sol = None
    for seed in sorted({f0, f_scan}):
        X = np.column_stack([np.sin(seed * L), np.cos(seed * L), np.ones_like(L)])
        s, c, b = np.linalg.lstsq(X, y, rcond=None)[0]
        start = [math.hypot(s, c), seed, math.atan2(c, s), b] + ([0.0] if envelope else [])
        trial = least_squares(lambda x: model(x) - y, start, x_scale="jac", xtol=1e-15, ftol=1e-15,
                              gtol=1e-15, max_nfev=20000)
        if sol is None or trial.cost < sol.cost:
            sol = trial
    x = sol.x
    amp, freq, phase, offset = float(x[0]), float(x[1]), float(x[2]), float(x[3])
    expo = float(x[4]) if envelope else 0.0
    if freq < 0:
        freq, phase, amp = -freq, -phase, -amp
    if amp < 0:
        amp, phase = -amp, phase + math.pi
    amp *= math.exp(-expo * Lc)
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    return SinFit(
        amplitude=amp,
        frequency=freq,
        phase=float(phase % TWO_PI),
        offset=offset,
        residual_rms=rms,
        window=(float(r.min()), float(r.max())),
        envelope_exponent=expo,
        periods=span * freq / TWO_PI,
        n_samples=int(r.size),
    )


def fit_power_law(x, y) -> PowerFit:
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if x.size < 3:
        raise ValueError(f"power-law fit needs at least 3 points (got {x.size})")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("power-law fit needs positive x and nonzero y")
    lx, ly = np.log(x), np.log(y)
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerFit(float(slope), float(math.exp(icpt)), float(np.sqrt(np.mean(resid**2))), int(x.size), r2)


# -- far field --------------------------------------------------------------


def _far_series(lam, d):
    """Exponent and first two coefficients of ``w = r^a (1 + b/r^2 + c/r^4)``."""
    a = 0.5 * (lam - d)
    b = -a * (a + d - 2.0) / 4.0
    c = -b * (a - 2.0) * (a + d - 4.0) / 8.0
    return a, b, c


def _tail_window(profile: Profile, lam: float, window):
    if window is not None:
        return float(window[0]), float(window[1])
    # beyond r_hi the growing mode left by the finite eigenvalue tolerance
    # is no longer below ~1e-8 of the decaying one
    r_end = profile.r_max
    r_hi = math.sqrt(max(r_end**2 - TAIL_MARGIN, 0.0))
    r_lo = max(math.sqrt(max(lam, 0.0)) + 1.0, r_hi / math.sqrt(10.0))
    return r_lo, r_hi


def _drift(series) -> float:
    # relative spread; near-zero plateaus are measured against 1e-3
    med = float(np.median(series))
    return float(np.ptp(series) / max(abs(med), 1e-3))


def _potential_columns(profile: Profile, u):
    """Slowest nonlinear potentials ``|u|^{e-1}``; they perturb the tail like ``V/2``."""
    params = profile.params
    if params.linear_mode:
        return []
    cols = [np.abs(u) ** (params.p - 1.0)]
    if params.q is not None:
        cols.append(np.abs(u) ** (params.q - 1.0))
    return cols


@dataclass
class FarField:
    r: np.ndarray
    ratio: np.ndarray
    scaled: np.ndarray
    plateau1: float
    plateau2: float
    target1: float
    target2: float
    drift1: float
    drift2: float
    window: tuple[float, float]
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "plateau1": self.plateau1,
            "plateau2": self.plateau2,
            "target1": self.target1,
            "target2": self.target2,
            "drift1": self.drift1,
            "drift2": self.drift2,
            "window": list(self.window),
            "warnings": list(self.warnings),
        }


def far_field_diagnostics(profile: Profile, lam: Optional[float] = None, window=None) -> FarField:
    """``E/Psi`` and ``r^2 (E/Psi - (lam-d)/2)`` on the tail, with plateau estimates.

    With ``u = e^{-r^2/2} w`` one has ``E/Psi = r w'/w = r u'/u + r^2``. The
    plateaus are the ``1/r^2 -> 0`` limits of least-squares fits in
    ``x = 1/r^2`` that also absorb the response to the nonlinear potential,
    which for small ``q - 1`` decays only like ``u^{q-1}``.
    """
    lam = profile.lam if lam is None else float(lam)
    d = profile.params.d
    r_lo, r_hi = _tail_window(profile, lam, window)
    mask = (profile.r >= r_lo) & (profile.r <= r_hi) & (profile.u > 0)
    found = []
    a, b, _ = _far_series(lam, d)
    target1, target2 = a, -2.0 * b
    if mask.sum() < 8:
        found.append("NoPlateau: fewer than 8 tail nodes before the resolution limit")
        warnings.warn(found[-1], NoPlateau, stacklevel=2)
        nan = float("nan")
        return FarField(profile.r[mask], np.array([]), np.array([]), nan, nan, target1, target2,
                        nan, nan, (r_lo, r_hi), found)
    r = profile.r[mask]
    u = profile.u[mask]
    ratio = r * profile.du[mask] / u + r * r
    scaled = r * r * (ratio - a)
    x = 1.0 / (r * r)
    pots = _potential_columns(profile, u)

    # each potential V shifts the ratio by a multiple of V plus a V/r^2 correction
    X1 = np.column_stack([np.ones_like(x), x, x * x] + pots + [v * x for v in pots])
    c1, *_ = np.linalg.lstsq(X1, ratio, rcond=None)
    X2 = np.column_stack([np.ones_like(x), x, x * x] + [v * r * r for v in pots] + pots)
    c2, *_ = np.linalg.lstsq(X2, scaled, rcond=None)

    # drift of the series once the fitted decaying terms are removed
    flat1 = ratio - X1[:, 1:] @ c1[1:]
    flat2 = scaled - X2[:, 1:] @ c2[1:]
    drift1, drift2 = _drift(flat1), _drift(flat2)
    for name, dr in (("E/Psi", drift1), ("r^2(E/Psi - (lambda-d)/2)", drift2)):
        if dr > 0.1:
            found.append(f"NoPlateau: {name} drifts by {dr:.2%} over the tail window")
            warnings.warn(found[-1], NoPlateau, stacklevel=2)
    return FarField(r, ratio, scaled, float(c1[0]), float(c2[0]), target1, target2, drift1, drift2,
                    (r_lo, r_hi), found)


@dataclass
class KEstimate:
    K: float
    drift: float
    window: tuple[float, float]
    r: np.ndarray
    series: np.ndarray
    warnings: list = field(default_factory=list)


def extract_K(profile: Profile, lam: Optional[float] = None, window=None) -> KEstimate:
    """Far-field constant ``K`` in ``u ~ K e^{-r^2/2} r^{(lam-d)/2}``.

    The series ``u e^{r^2/2} r^{-a} / (1 + b/r^2 + c/r^4)`` is summarised by
    its median over the tail window; ``drift`` is its relative spread there.
    """
    lam = profile.lam if lam is None else float(lam)
    a, b, c = _far_series(lam, profile.params.d)
    r_lo, r_hi = _tail_window(profile, lam, window)
    mask = (profile.r >= r_lo) & (profile.r <= r_hi) & (profile.u > 0)
    found = []
    if mask.sum() < 4:
        found.append("NoPlateau: fewer than 4 tail nodes before the resolution limit")
        warnings.warn(found[-1], NoPlateau, stacklevel=2)
        return KEstimate(float("nan"), float("nan"), (r_lo, r_hi), profile.r[mask], np.array([]), found)
    r = profile.r[mask]
    x = 1.0 / (r * r)
    series = profile.u[mask] * np.exp(0.5 * r * r - a * np.log(r)) / (1.0 + b * x + c * x * x)
    drift = _drift(series)
    if drift > 0.1:
        found.append(f"NoPlateau: K series drifts by {drift:.2%}")
        warnings.warn(found[-1], NoPlateau, stacklevel=2)
    return KEstimate(float(np.median(series)), drift, (r_lo, r_hi), r, series, found)


# -- kernel of the linearized operator ---------------------------------------


def _kernel_coefficients(params: ProblemParams, lam: float) -> np.ndarray:
    c = np.zeros(_rk.N_COEF)
    c[_rk.K_D] = params.d
    c[_rk.K_LAM] = lam
    c[_rk.K_A2] = 1.0
    c[_rk.K_P] = params.p
    c[_rk.K_Q] = params.q if params.q is not None else 1.0
    if not params.linear_mode:
        c[_rk.K_KP] = params.p
        c[_rk.K_KQ] = params.q if params.q is not None else 0.0
    return c


def _table(Phi: Optional[Profile]):
    if Phi is None:
        return None
    return (Phi.r.copy(), Phi.u.copy(), Phi.du.copy(), Phi.ddu.copy())


def _kernel_profile(params, lam, R, U, DU, DDU, status, n_resc, meta):
    meta = dict(meta, rescales=n_resc, status=int(status))
    return Profile(params, lam, "Kernel", R, U, DU, DDU, None, meta)


def kernel_psi1(
    lambda_star: float,
    Phi: Optional[Profile],
    R_start: Optional[float] = None,
    params: Optional[ProblemParams] = None,
    *,
    r_stop: Optional[float] = None,
    rtol: float = 1e-12,
) -> Profile:
    """Decaying kernel element of ``-Delta + r^2 - lambda - p Phi^{p-1} - q Phi^{q-1}``.

    Launched at ``R_start`` from ``e^{-r^2/2} r^a (1 + b/r^2 + c/r^4)`` (so
    ``K = 1``) and integrated inward to ``r_stop`` (default: the start of
    ``Phi``). Growth is absorbed by rescaling; the count is in ``meta``.
    In linear mode ``Phi`` may be ``None`` and the potential terms vanish.
    """
    params = Phi.params if params is None else params
    if Phi is None and not params.linear_mode:
        raise DomainError("the singular profile is required outside linear mode")
    d = params.d
    if R_start is None:
        R_start = math.sqrt(max(lambda_star, 0.0)) + 2.0
        if Phi is not None:
            R_start = min(R_start, Phi.r_max)
    if r_stop is None:
        r_stop = Phi.r_min if Phi is not None else 1e-3
    if Phi is not None and (R_start > Phi.r_max * (1 + 1e-12) or r_stop < Phi.r_min * (1 - 1e-12)):
        raise DomainError(f"Phi covers [{Phi.r_min:.3g}, {Phi.r_max:.3g}], need [{r_stop:.3g}, {R_start:.3g}]")
    if not 0 < r_stop < R_start:
        raise DomainError("need 0 < r_stop < R_start")
    a, b, c = _far_series(lambda_star, d)
    R = float(R_start)
    x = 1.0 / (R * R)
    poly = 1.0 + b * x + c * x * x
    dpoly = (-2.0 * b * x - 4.0 * c * x * x) / R
    psi = math.exp(-0.5 * R * R + a * math.log(R)) * poly
    dpsi = psi * (-R + a / R + dpoly / poly)
    events = EventSet(zero=False, escape=False, rescale=True)
    out = run_kernel(
        RadialState(R, psi, dpsi), r_stop, _kernel_coefficients(params, lambda_star), events,
        rtol, abs(psi) * rtol * 1e-6, table=_table(Phi),
    )
    meta = {"R_start": R, "normalization": "K=1 at R_start", "rtol": rtol}
    return _kernel_profile(params, lambda_star, *out[:5], out[6], meta)


def kernel_psi2(
    lambda_star: float,
    Phi: Optional[Profile],
    r_end: float = 1.0,
    params: Optional[ProblemParams] = None,
    *,
    r_start: Optional[float] = None,
    rtol: float = 1e-12,
) -> Profile:
    """A second kernel solution, launched outward from near the origin.

    The start data are those of the cosine Euler mode, so the solution is
    independent of the decaying one; the Wronskian certifies it.
    """
    params = Phi.params if params is None else params
    if Phi is None and not params.linear_mode:
        raise DomainError("the singular profile is required outside linear mode")
    if r_start is None:
        r_start = Phi.r_min if Phi is not None else 1e-3
    if Phi is not None and r_end > Phi.r_max:
        raise DomainError(f"Phi ends at {Phi.r_max:.3g} < r_end={r_end:.3g}")
    phi, dphi = euler_modes(r_start, params, derivative=1, which=2)
    events = EventSet(zero=False, escape=False, rescale=True)
    out = run_kernel(
        RadialState(float(r_start), float(phi), float(dphi)), float(r_end),
        _kernel_coefficients(params, lambda_star), events, rtol, abs(phi) * rtol * 1e-6,
        table=_table(Phi),
    )
    meta = {"r_start": float(r_start), "normalization": "cosine Euler mode at r_start", "rtol": rtol}
    return _kernel_profile(params, lambda_star, *out[:5], out[6], meta)


# -- Euler modes and Wronskians -----------------------------------------------


def euler_modes(r, params: ProblemParams, frequency: Optional[float] = None, *, derivative: int = 0,
                which: Optional[int] = None):
    """``phi_1 = sin(f log r) r^{-(d-2)/2}`` and ``phi_2 = cos(f log r) r^{-(d-2)/2}``.

    ``frequency`` defaults to the log-frequency that makes both modes solve
    ``phi'' + (d-1)/r phi' + p A^{p-1} phi / r^2 = 0``. With ``derivative=1``
    (or 2) the derivatives up to that order are returned as well.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("Euler modes are defined for r > 0")
    k = derive_constants(params)
    f = k.log_frequency if frequency is None else float(frequency)
    g = 0.5 * (params.d - 2.0)
    L = np.log(r)
    base = r**-g
    s, c = np.sin(f * L), np.cos(f * L)
    modes = []
    for trig, dtrig in ((s, f * c), (c, -f * s)):
        val = base * trig
        # d/dr [r^-g T(log r)] = r^{-g-1} (T' - g T)
        d1 = base / r * (dtrig - g * trig)
        # second derivative: r^{-g-2} (T'' - (2g+1) T' + g(g+1) T), T'' = -f^2 T
        d2 = base / (r * r) * (-f * f * trig - (2 * g + 1) * dtrig + g * (g + 1) * trig)
        modes.append((val, d1, d2)[: derivative + 1])
    if which is not None:
        m = modes[which - 1]
        return m[0] if derivative == 0 else m
    if derivative == 0:
        return modes[0][0], modes[1][0]
    return tuple(modes)


def euler_mode_profiles(params: ProblemParams, r_lo: float, r_hi: float, n: int = 2000,
                        frequency: Optional[float] = None) -> tuple[Profile, Profile]:
    """Both Euler modes sampled exactly on a log grid, as profiles."""
    r = np.geomspace(r_lo, r_hi, n)
    out = []
    for which in (1, 2):
        v, d1, d2 = euler_modes(r, params, frequency, derivative=2, which=which)
        out.append(Profile(params, 0.0, "Kernel", r, v, d1, d2, None, {"euler_mode": which}))
    return out[0], out[1]


@dataclass
class WronskianResult:
    r: np.ndarray
    W: np.ndarray
    scaled: np.ndarray
    median: float
    deviation: float


def wronskian(f: Profile, g: Profile, r=None) -> WronskianResult:
    """``W = f' g - g' f`` on the common grid and the spread of ``W r^{d-1}``.

    ``deviation`` is the maximal deviation of ``W r^{d-1}`` from its median,
    relative to the median (absolute when the median vanishes).
    """
    lo, hi = max(f.r_min, g.r_min), min(f.r_max, g.r_max)
    if not lo < hi:
        raise DomainError("profiles have disjoint grids")
    if r is None:
        r = np.union1d(f.r, g.r)
        r = r[(r >= lo) & (r <= hi)]
    else:
        r = np.asarray(r, dtype=float)
    W = f.derivative(r) * g(r) - g.derivative(r) * f(r)
    scaled = W * r ** (f.params.d - 1)
    med = float(np.median(scaled))
    spread = np.max(np.abs(scaled - med))
    dev = float(spread / abs(med)) if med != 0 else float(spread)
    return WronskianResult(r, W, scaled, med, dev)


# -- operator identities -------------------------------------------------------


@dataclass
class LambdaQResidual:
    tau: np.ndarray
    LQ: np.ndarray
    dLQ: np.ndarray
    residual: np.ndarray
    max_relative: float


def _central4(fun, x, h):
    return (-fun(x + 2 * h) + 8 * fun(x + h) - 8 * fun(x - h) + fun(x - 2 * h)) / (12.0 * h)


def lambda_Q_residual(Q: Profile, params: Optional[ProblemParams] = None, window=(0.1, 10.0), n: int = 2000,
                      alpha: Optional[float] = None) -> LambdaQResidual:
    """Residual of ``H(Lambda Q) = 0``, ``H = -Delta - p Q^{p-1}``, ``Lambda = alpha + tau d/dtau``.

    ``Lambda Q`` and its first derivative come from the dense output of
    ``Q``; the second derivative is a 4th-order central difference of the
    first with relative step ``1e-2``. ``alpha`` can be overridden to build negative controls.
    """
    params = Q.params if params is None else params
    d, p = params.d, params.p
    alpha = 2.0 / (p - 1.0) if alpha is None else float(alpha)
    tau = np.geomspace(window[0], window[1], n)

    def dLQ(t):
        return (alpha + 1.0) * Q.evaluate(t, 1) + t * Q.evaluate(t, 2)

    LQ = alpha * Q(tau) + tau * Q.derivative(tau)
    d1 = dLQ(tau)
    # a step spanning several integrator steps averages out the interpolation error of Q''
    d2 = _central4(dLQ, tau, 1e-2 * tau)
    pot = p * np.abs(Q(tau)) ** (p - 1.0) * LQ
    terms = np.abs(d2) + np.abs((d - 1.0) / tau * d1) + np.abs(pot)
    res = -(d2 + (d - 1.0) / tau * d1) - pot
    return LambdaQResidual(tau, LQ, d1, res, float(np.max(np.abs(res) / terms)))


def transform_residual_series(u: Profile, epsilon: float, params: Optional[ProblemParams] = None,
                              r_star: Optional[float] = None, r_end: Optional[float] = None, *,
                              exponent_sign: float = -1.0, inverse_square_sign: float = 1.0):
    """Pointwise relative residual of the equation for ``v = r^{-eps/2} u``.

    In dimension ``d + eps`` the transformed equation reads

        v'' + (d+eps-1)/r v' - (r^2 - lam) v + r^{eps(p-1)/2} |v|^{p-1} v
            + r^{eps(q-1)/2} |v|^{q-1} v + (eps/2)(eps/2 + d - 2) v / r^2 = 0.

    ``exponent_sign=+1`` uses ``v = r^{+eps/2} u`` and ``inverse_square_sign=-1``
    moves the inverse-square term to the other side with its sign kept; both
    are wrong and serve as controls.
    """
    params = u.params if params is None else params
    d, p, q, lam = params.d, params.p, params.q, u.lam
    lo = u.r_min if r_star is None else r_star
    hi = u.r_max if r_end is None else r_end
    m = (u.r >= lo) & (u.r <= hi)
    r, U, DU, DDU = u.r[m], u.u[m], u.du[m], u.ddu[m]
    e = exponent_sign * 0.5 * epsilon
    scale = r**e
    v = scale * U
    dv = scale * (DU + e * U / r)
    ddv = scale * (DDU + 2 * e * DU / r + e * (e - 1) * U / (r * r))
    h = 0.5 * epsilon
    terms = [ddv, (d + epsilon - 1.0) / r * dv, -(r * r - lam) * v]
    if not params.linear_mode:
        terms.append(r ** (epsilon * (p - 1.0) / 2.0) * np.abs(v) ** (p - 1.0) * v)
        if q is not None:
            terms.append(r ** (epsilon * (q - 1.0) / 2.0) * np.abs(v) ** (q - 1.0) * v)
    terms.append(inverse_square_sign * h * (h + d - 2.0) * v / (r * r))
    total = np.sum(terms, axis=0)
    size = np.sum(np.abs(terms), axis=0)
    return r, total / size


def exterior_transform_residual(u: Profile, epsilon: float, params: Optional[ProblemParams] = None,
                                r_star: Optional[float] = None, r_end: Optional[float] = None, **kw) -> float:
    """Max relative residual of the exterior change of variables on ``[r_star, r_end]``."""
    _, rel = transform_residual_series(u, epsilon, params, r_star, r_end, **kw)
    return float(np.max(np.abs(rel)))
