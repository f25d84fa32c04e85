"""Adaptive integration of the radial equation and tail classification.

Integration is done by the compiled Dormand-Prince 5(4) kernel in
:mod:`gpss._rk`. Each accepted node stores ``(r, u, u', u'')`` so profiles
can be evaluated between nodes with a quintic Hermite interpolant, which is
the dense output used everywhere else in the package.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _rk
from .core import ProblemParams, derive_constants
from .errors import DomainError, ExtrapolationError

__all__ = [
    "RadialState",
    "Profile",
    "EventSet",
    "Classification",
    "coefficients",
    "rhs",
    "origin_init_smooth",
    "origin_init_singular",
    "integrate",
    "classify_tail",
    "default_r_end",
    "DECAYING",
    "CROSSES_ZERO",
    "BLOWS_UP",
    "UNDETERMINED",
]

DECAYING = "Decaying"
CROSSES_ZERO = "CrossesZero"
BLOWS_UP = "BlowsUpPositive"
UNDETERMINED = "Undetermined"

_STATUS_NAMES = {
    _rk.ST_END: None,
    _rk.ST_ZERO: "zero_crossing",
    _rk.ST_CAP: "cap",
    _rk.ST_FLOOR: "decay_floor",
    _rk.ST_ESCAPE: "escape",
    _rk.ST_NONFINITE: "overflow",
    _rk.ST_UNDERFLOW: "underflow",
    _rk.ST_MAXSTEPS: "max_steps",
}

_EMPTY = np.zeros(2)


@dataclass(frozen=True)
class RadialState:
    r: float
    u: float
    du: float


def coefficients(params: ProblemParams, lam: float) -> np.ndarray:
    """Coefficient vector of the compiled right-hand side for the GP equation."""
    c = np.zeros(_rk.N_COEF)
    c[_rk.K_D] = params.d
    c[_rk.K_LAM] = lam
    c[_rk.K_A2] = 1.0
    c[_rk.K_P] = params.p
    c[_rk.K_Q] = params.q if params.q is not None else 1.0
    if not params.linear_mode:
        c[_rk.K_NP] = 1.0
        c[_rk.K_NQ] = 1.0 if params.q is not None else 0.0
    return c


def emden_coefficients(params: ProblemParams) -> np.ndarray:
    """Coefficients for ``u'' + (d-1)/r u' + |u|^{p-1} u = 0``."""
    c = np.zeros(_rk.N_COEF)
    c[_rk.K_D] = params.d
    c[_rk.K_P] = params.p
    c[_rk.K_Q] = 1.0
    c[_rk.K_NP] = 1.0
    return c


def rhs(r: float, s: RadialState, params: ProblemParams, lam: float) -> tuple[float, float]:
    """First-order form ``(u', u'')`` of the radial equation at ``r > 0``."""
    if not r > 0:
        raise DomainError("rhs is singular at r = 0; start from an origin series")
    c = coefficients(params, lam)
    ddu = _rk.rhs2(float(r), float(s.u), float(s.du), c, _EMPTY, _EMPTY, _EMPTY, _EMPTY)
    return s.du, ddu


def default_r_end(lam: float) -> float:
    return min(math.sqrt(max(lam, 0.0)) + 4.0, 8.0)


def _nonlin(u: float, params: ProblemParams) -> float:
    if params.linear_mode:
        return 0.0
    out = u ** params.p
    if params.q is not None:
        out += u ** params.q
    return out


def _nonlin_slope(u: float, params: ProblemParams) -> float:
    if params.linear_mode:
        return 0.0
    out = params.p * u ** (params.p - 1)
    if params.q is not None:
        out += params.q * u ** (params.q - 1)
    return out


def origin_init_smooth(
    theta: float, r0: float, params: ProblemParams, lam: float, order: int = 4
) -> RadialState:
    """Regular start ``u(0) = theta`` evaluated at ``r0`` by its Taylor series.

    ``order=2`` keeps ``theta + c2 r^2`` (error O(r0^4)); the default adds the
    ``r^4`` coefficient so the truncation error is O(r0^6).
    """
    if not r0 > 0:
        raise DomainError(f"r0 must be positive (r0={r0})")
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    if theta == 0:
        return RadialState(r0, 0.0, 0.0)
    d = params.d
    g0 = -lam * theta - _nonlin(theta, params)
    c2 = g0 / (2.0 * d)
    u = theta + c2 * r0 * r0
    du = 2.0 * c2 * r0
    if order == 4:
        c4 = (theta - (lam + _nonlin_slope(theta, params)) * c2) / (4.0 * (d + 2.0))
        u += c4 * r0**4
        du += 4.0 * c4 * r0**3
    return RadialState(r0, u, du)


def singular_series_terms(params: ProblemParams, lam: float) -> list[tuple[float, float]]:
    """Relative correction terms ``(exponent, coefficient)`` of the singular solution.

    These are the exponential-forcing particular solutions produced by one
    Picard step from ``eta = 0``: ``Phi = A r^{-alpha} (1 + sum b r^e)``.
    """
    k = derive_constants(params)
    d, p, alpha, A = params.d, params.p, k.alpha, k.A
    a_pow = A ** (p - 1.0)

    def denom(s):
        return s * (s + d - 2.0) + p * a_pow

    terms = []
    if params.q is not None:
        e = k.origin_correction_exponent
        terms.append((e, -(A ** (params.q - 1.0)) / denom(e - alpha)))
    terms.append((2.0, -lam / denom(2.0 - alpha)))
    terms.append((4.0, 1.0 / denom(4.0 - alpha)))
    return terms


def origin_init_singular(
    r0: float, params: ProblemParams, order: str = "corrected", lam: Optional[float] = None
) -> RadialState:
    """Start on the singular branch ``A r^{-alpha}`` at a small radius."""
    if not r0 > 0:
        raise DomainError(f"r0 must be positive (r0={r0})")
    if r0 >= 1:
        raise DomainError(f"origin asymptotics need r0 < 1 (r0={r0})")
    if params.linear_mode:
        raise DomainError("no singular solution in linear mode")
    if order not in ("leading", "corrected"):
        raise ValueError("order must be 'leading' or 'corrected'")
    k = derive_constants(params)
    A, alpha = k.A, k.alpha
    base = A * r0**-alpha
    if order == "leading":
        return RadialState(r0, base, -alpha * base / r0)
    if lam is None:
        lam = params.lam if params.lam is not None else 0.0
    eta = 0.0
    slope = -alpha
    for e, b in singular_series_terms(params, lam):
        eta += b * r0**e
        slope += b * (e - alpha) * r0**e
    return RadialState(r0, base * (1.0 + eta), A * r0 ** (-alpha - 1.0) * slope)


@dataclass
class EventSet:
    """Terminal events checked after every accepted step.

    ``cap`` and ``floor`` are absolute magnitudes (``None`` disables them).
    ``escape`` stops once ``u > 0``, ``u' > 0`` beyond the turning point with a
    positive effective potential; from there ``r^{d-1} u'`` can only grow.
    """

    zero: bool = True
    cap: Optional[float] = None
    floor: Optional[float] = None
    floor_rmin: float = 0.0
    escape: bool = True
    turning_r: float = 0.0
    rescale: bool = False

    def as_array(self) -> np.ndarray:
        ev = np.zeros(_rk.N_EVENT)
        ev[_rk.E_ZERO] = 1.0 if self.zero else 0.0
        ev[_rk.E_CAP] = self.cap or 0.0
        ev[_rk.E_FLOOR] = self.floor or 0.0
        ev[_rk.E_FLOOR_RMIN] = self.floor_rmin
        ev[_rk.E_ESCAPE] = 1.0 if self.escape else 0.0
        ev[_rk.E_TURN] = self.turning_r
        ev[_rk.E_RESCALE] = 1.0 if self.rescale else 0.0
        return ev

    @classmethod
    def none(cls) -> "EventSet":
        return cls(zero=False, escape=False)

    @classmethod
    def shooting(cls, params: ProblemParams, lam: float, scale: float, atol: float) -> "EventSet":
        k_scale = max(scale, 1.0)
        return cls(
            zero=True,
            cap=1e3 * k_scale,
            floor=atol * k_scale,
            floor_rmin=math.sqrt(max(lam, 0.0)) + 1.0,
            escape=True,
            turning_r=math.sqrt(max(lam, 0.0)),
        )


@dataclass
class Profile:
    """A trajectory on a strictly increasing grid with quintic Hermite dense output."""

    params: ProblemParams
    lam: float
    kind: str
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    ddu: np.ndarray
    event: Optional[dict] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.du = np.asarray(self.du, dtype=float)
        self.ddu = np.asarray(self.ddu, dtype=float)
        n = self.r.shape[0]
        if n < 2 or not (self.u.shape[0] == self.du.shape[0] == self.ddu.shape[0] == n):
            raise ValueError("profile arrays must share a length of at least 2")
        if np.any(np.diff(self.r) <= 0):
            raise ValueError("profile grid must be strictly increasing")

    # aliases matching the documented field names
    @property
    def grid(self) -> np.ndarray:
        return self.r

    @property
    def values(self) -> np.ndarray:
        return self.u

    @property
    def derivatives(self) -> np.ndarray:
        return self.du

    @property
    def r_min(self) -> float:
        return float(self.r[0])

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def _locate(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.r[0], self.r[-1]
        span = hi - lo
        slack = 1e-12 * max(abs(hi), 1.0)
        if np.any(x < lo - slack) or np.any(x > hi + slack) or not np.all(np.isfinite(x)):
            raise ExtrapolationError(
                f"evaluation outside profile grid [{lo:.6g}, {hi:.6g}] (span {span:.3g})"
            )
        i = np.clip(np.searchsorted(self.r, x) - 1, 0, self.r.shape[0] - 2)
        return x, i

    @property
    def dddu(self) -> Optional[np.ndarray]:
        """Third derivative at the nodes from the differentiated equation (None for kernels)."""
        if "_dddu" not in self.__dict__:
            self.__dict__["_dddu"] = _third_derivative(
                self.params, self.lam, self.kind, self.r, self.u, self.du, self.ddu
            )
        return self.__dict__["_dddu"]

    def evaluate(self, x, derivative: int = 0):
        """Dense-output value (``derivative=0``), slope (1) or curvature (2).

        Slope and curvature come from a separate quintic through the slope, the
        curvature and the third derivative when the latter is available, since
        differentiating the quintic of ``u`` twice loses two orders and
        amplifies rounding by ``1/h^2``.
        """
        scalar = np.ndim(x) == 0
        x, i = self._locate(x)
        x0, x1 = self.r[i], self.r[i + 1]
        h = x1 - x0
        t = (x - x0) / h
        if derivative in (1, 2) and self.dddu is not None:
            b = _hermite5(
                t, h, derivative - 1, self.du[i], self.ddu[i], self.dddu[i],
                self.du[i + 1], self.ddu[i + 1], self.dddu[i + 1],
            )
            return float(b[0]) if scalar else b
        y0, y1 = self.u[i], self.u[i + 1]
        m0, m1 = self.du[i] * h, self.du[i + 1] * h
        a0, a1 = self.ddu[i] * h * h, self.ddu[i + 1] * h * h
        t2, t3, t4, t5 = t * t, t**3, t**4, t**5
        if derivative == 0:
            b = (
                (1 - 10 * t3 + 15 * t4 - 6 * t5) * y0
                + (t - 6 * t3 + 8 * t4 - 3 * t5) * m0
                + 0.5 * (t2 - 3 * t3 + 3 * t4 - t5) * a0
                + 0.5 * (t3 - 2 * t4 + t5) * a1
                + (-4 * t3 + 7 * t4 - 3 * t5) * m1
                + (10 * t3 - 15 * t4 + 6 * t5) * y1
            )
        elif derivative == 1:
            b = (
                (-30 * t2 + 60 * t3 - 30 * t4) * y0
                + (1 - 18 * t2 + 32 * t3 - 15 * t4) * m0
                + 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4) * a0
                + 0.5 * (3 * t2 - 8 * t3 + 5 * t4) * a1
                + (-12 * t2 + 28 * t3 - 15 * t4) * m1
                + (30 * t2 - 60 * t3 + 30 * t4) * y1
            ) / h
        elif derivative == 2:
            b = (
                (-60 * t + 180 * t2 - 120 * t3) * y0
                + (-36 * t + 96 * t2 - 60 * t3) * m0
                + 0.5 * (2 - 18 * t + 36 * t2 - 20 * t3) * a0
                + 0.5 * (6 * t - 24 * t2 + 20 * t3) * a1
                + (-24 * t + 84 * t2 - 60 * t3) * m1
                + (60 * t - 180 * t2 + 120 * t3) * y1
            ) / (h * h)
        else:
            raise ValueError("derivative must be 0, 1 or 2")
        return float(b[0]) if scalar else b

    def __call__(self, x):
        return self.evaluate(x, 0)

    def derivative(self, x):
        return self.evaluate(x, 1)

    def restrict(self, lo: float, hi: float) -> "Profile":
        """Sub-profile on the nodes inside ``[lo, hi]``."""
        mask = (self.r >= lo) & (self.r <= hi)
        return Profile(
            self.params, self.lam, self.kind, self.r[mask], self.u[mask],
            self.du[mask], self.ddu[mask], None, dict(self.meta),
        )

    def positive(self) -> bool:
        return bool(np.all(self.u > 0))

    # -- serialization -------------------------------------------------
    def sidecar(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "lambda": self.lam,
            "kind": self.kind,
            "event": self.event,
            "meta": _jsonable(self.meta),
        }

    def to_csv(self, path) -> None:
        from .io import atomic_write_text, format_float

        lines = ["r,u,du"]
        for a, b, c in zip(self.r, self.u, self.du):
            lines.append(f"{format_float(a)},{format_float(b)},{format_float(c)}")
        atomic_write_text(Path(path), "\n".join(lines) + "\n")
        atomic_write_text(Path(path).with_suffix(".json"), json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Profile":
        path = Path(path)
        side = json.loads(path.with_suffix(".json").read_text())
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        r = np.array([float(x["r"]) for x in rows])
        u = np.array([float(x["u"]) for x in rows])
        du = np.array([float(x["du"]) for x in rows])
        params = ProblemParams.from_dict(side["params"])
        meta = side.get("meta", {})
        ddu = _second_derivative(params, side["lambda"], side["kind"], r, u, du, meta)
        return cls(params, side["lambda"], side["kind"], r, u, du, ddu, side.get("event"), meta)


def _hermite5(t, h, derivative, y0, m0, a0, y1, m1, a1):
    """Quintic Hermite interpolant (or its first derivative) on one step."""
    m0, m1 = m0 * h, m1 * h
    a0, a1 = a0 * h * h, a1 * h * h
    t2, t3, t4, t5 = t * t, t**3, t**4, t**5
    if derivative == 0:
        return (
            (1 - 10 * t3 + 15 * t4 - 6 * t5) * y0
            + (t - 6 * t3 + 8 * t4 - 3 * t5) * m0
            + 0.5 * (t2 - 3 * t3 + 3 * t4 - t5) * a0
            + 0.5 * (t3 - 2 * t4 + t5) * a1
            + (-4 * t3 + 7 * t4 - 3 * t5) * m1
            + (10 * t3 - 15 * t4 + 6 * t5) * y1
        )
    return (
        (-30 * t2 + 60 * t3 - 30 * t4) * (y0 - y1)
        + (1 - 18 * t2 + 32 * t3 - 15 * t4) * m0
        + 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4) * a0
        + 0.5 * (3 * t2 - 8 * t3 + 5 * t4) * a1
        + (-12 * t2 + 28 * t3 - 15 * t4) * m1
    ) / h


def _profile_coefficients(params, lam, kind):
    if kind == "EmdenFowler":
        return emden_coefficients(params)
    if kind in ("Smooth", "Singular"):
        return coefficients(params, lam)
    return None


def _third_derivative(params, lam, kind, r, u, du, ddu):
    c = _profile_coefficients(params, lam, kind)
    if c is None:
        return None
    d1 = c[_rk.K_D] - 1.0
    au = np.abs(u)
    f_r = d1 / r**2 * du + 2.0 * c[_rk.K_A2] * r * u + 2.0 * c[_rk.K_CINV2] * u / r**3
    f_u = c[_rk.K_A2] * r * r - c[_rk.K_LAM] - c[_rk.K_CINV2] / r**2
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if c[_rk.K_NP] != 0.0:
            f_u = f_u - c[_rk.K_NP] * c[_rk.K_P] * au ** (c[_rk.K_P] - 1.0)
        if c[_rk.K_NQ] != 0.0:
            f_u = f_u - c[_rk.K_NQ] * c[_rk.K_Q] * au ** (c[_rk.K_Q] - 1.0)
        out = f_r + f_u * du - d1 / r * ddu
    return out if np.all(np.isfinite(out)) else None


def _second_derivative(params, lam, kind, r, u, du, meta):
    if kind == "EmdenFowler":
        c = emden_coefficients(params)
    elif kind == "Kernel":
        # not reconstructible without the background table
        return np.gradient(du, r)
    else:
        c = coefficients(params, lam)
    return np.array([_rk.rhs2(a, b, s, c, _EMPTY, _EMPTY, _EMPTY, _EMPTY) for a, b, s in zip(r, u, du)])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def run_kernel(
    init: RadialState,
    r_end: float,
    c: np.ndarray,
    events: EventSet,
    rtol: float,
    atol: float,
    table: Optional[tuple] = None,
    h0: float = 0.0,
    max_steps: int = 2_000_000,
):
    """Call the compiled integrator and return arrays sorted by increasing r."""
    if rtol < 1e-13:
        raise ValueError(f"rtol must be at least 1e-13 (got {rtol})")
    tr, tu, tdu, tddu = table if table is not None else (_EMPTY, _EMPTY, _EMPTY, _EMPTY)
    n, R, U, DU, DDU, status, n_rej, n_resc = _rk.dopri5(
        float(init.r), float(init.u), float(init.du), float(r_end), float(rtol), float(atol),
        float(h0), int(max_steps), c, events.as_array(), tr, tu, tdu, tddu,
    )
    R, U, DU, DDU = R[:n].copy(), U[:n].copy(), DU[:n].copy(), DDU[:n].copy()
    if r_end < init.r:
        R, U, DU, DDU = R[::-1], U[::-1], DU[::-1], DDU[::-1]
    return R, U, DU, DDU, int(status), int(n_rej), int(n_resc)


def integrate(
    init: RadialState,
    r_end: float,
    params: ProblemParams,
    lam: float,
    tol: tuple[float, float] = (1e-11, 1e-14),
    events: Optional[EventSet] = None,
    kind: str = "Smooth",
    theta: Optional[float] = None,
) -> Profile:
    """Integrate the radial equation from ``init`` outward to ``r_end``.

    Never fails on numerical trouble: step underflow and overflow end up in
    ``profile.event`` and are turned into a classification later.
    """
    rtol, atol = tol
    if not init.r < r_end:
        raise DomainError(f"need init.r < r_end (got {init.r} >= {r_end})")
    if not init.r > 0:
        raise DomainError("integration must start at r0 > 0")
    scale = abs(theta) if theta is not None else abs(init.u)
    if events is None:
        events = EventSet.shooting(params, lam, scale, atol)
    c = coefficients(params, lam)
    R, U, DU, DDU, status, n_rej, _ = run_kernel(init, r_end, c, events, rtol, atol)
    if R.shape[0] < 2:
        # zero-length trajectory, e.g. an immediate overflow
        R = np.array([init.r, init.r * (1 + 1e-12)])
        U = np.array([init.u, init.u])
        DU = np.array([init.du, init.du])
        DDU = np.zeros(2)
    name = _STATUS_NAMES[status]
    event = None if name is None else {"type": name, "location": float(R[-1])}
    meta = {
        "theta": theta,
        "rtol": rtol,
        "atol": atol,
        "rejected_steps": n_rej,
        "decay_floor": events.floor,
        "cap": events.cap,
        "r_end": r_end,
    }
    return Profile(params, lam, kind, R, U, DU, DDU, event, meta)


@dataclass(frozen=True)
class Classification:
    kind: str
    radius: float
    flag: Optional[str] = None

    def __str__(self):
        return self.kind if self.flag is None else f"{self.kind}({self.flag})"


def classify_tail(
    profile: Profile,
    params: Optional[ProblemParams] = None,
    lam: Optional[float] = None,
    decay_floor: Optional[float] = None,
    cap: Optional[float] = None,
) -> Classification:
    """Decide which side of the decaying separatrix a trajectory lies on."""
    lam = profile.lam if lam is None else lam
    params = profile.params if params is None else params
    turn = math.sqrt(max(lam, 0.0))
    r_last = float(profile.r[-1])
    u_last = float(profile.u[-1])
    du_last = float(profile.du[-1])
    if decay_floor is None:
        decay_floor = profile.meta.get("decay_floor")
    if decay_floor is None:
        decay_floor = 1e-12 * max(abs(float(profile.u[0])), 1.0)
    if cap is None:
        cap = profile.meta.get("cap")
    ev = (profile.event or {}).get("type")

    if not np.any(profile.u) and not np.any(profile.du):
        # the zero solution decays trivially
        return Classification(DECAYING, r_last)
    if ev == "zero_crossing" or np.any(profile.u < 0):
        idx = int(np.argmax(profile.u <= 0))
        return Classification(CROSSES_ZERO, float(profile.r[idx]))
    if ev == "overflow":
        return Classification(BLOWS_UP, r_last, "overflow")
    if ev in ("underflow", "max_steps"):
        return Classification(UNDETERMINED, r_last, ev)
    if u_last > 0 and du_last > 0 and r_last > turn:
        if cap is not None and u_last > cap:
            return Classification(BLOWS_UP, r_last, "cap")
        v = r_last**2 - lam - _nonlin(u_last, params)
        if v > 0:
            return Classification(BLOWS_UP, r_last, "escape")
    if ev == "decay_floor" or (
        0 < u_last < decay_floor and r_last > turn + 1.0 and np.all(profile.u > 0)
    ):
        return Classification(DECAYING, r_last)
    return Classification(UNDETERMINED, r_last)
