"""Command-line front end: ``gpss <command> --config <path>``.

Exit codes: 0 success, 2 invalid input, 3 convergence failure or a failed
acceptance check, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, bifurcation, io
from .core import ProblemParams, derive_constants, joseph_lundgren, validate
from .errors import ConvergenceFailure, DomainError, GPSSError, ValidationError
from .profiles import find_lambda_star, shoot_lambda, solve_emden_fowler

log = logging.getLogger("gpss")

COMMANDS = ("constants", "emden", "singular", "shoot", "sweep", "kernel", "verify")
EXIT_OK, EXIT_INVALID, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4


@dataclass
class RunConfig:
    params: ProblemParams = field(default_factory=lambda: ProblemParams(5, 3.0, 1.5))
    theta_min: float = 10.0
    theta_max: float = 1e4
    points: int = 400
    theta: float = 100.0
    rtol: float = 1e-11
    atol: float = 1e-14
    lambda_tol: float = 1e-10
    r_star: float = 0.3
    r0: float = 1e-4
    r_max: float = 1e4
    output_dir: str = "gpss-out"
    frequency_tol: float = 0.05
    envelope_tol: float = 0.1
    center_tol: float = 1e-3
    pure_p_regression: bool = True

    def __post_init__(self):
        if isinstance(self.params, dict):
            self.params = ProblemParams.from_dict(self.params)
        self.check()

    def check(self) -> None:
        if not self.theta_min < self.theta_max:
            raise ValidationError("theta range", f"theta_min < theta_max required ({self.theta_min}, {self.theta_max})")
        if self.points < 2:
            raise ValidationError("points", f"points >= 2 required (got {self.points})")
        for name in ("rtol", "atol", "lambda_tol", "frequency_tol", "envelope_tol", "center_tol", "theta"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, f"{name} > 0 required (got {getattr(self, name)})")
        if not self.r0 < self.r_star < 1 < self.r_max:
            raise ValidationError(
                "radii", f"r0 < r_star < 1 < r_max required ({self.r0}, {self.r_star}, {self.r_max})"
            )

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["params"] = self.params.to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError("config", f"unknown keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def tolerances(self) -> dict:
        return {"frequency_tol": self.frequency_tol, "envelope_tol": self.envelope_tol, "center_tol": self.center_tol}


@dataclass
class Criterion:
    name: str
    measured: object
    target: object
    tolerance: object
    passed: bool

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: measured={_short(self.measured)} target={_short(self.target)} tol={_short(self.tolerance)}"


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


@dataclass
class RunSummary:
    command: str
    constants: dict
    lambda_star: Optional[float] = None
    fits: dict = field(default_factory=dict)
    criteria: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    manifest: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


class Writer:
    """Single funnel for artifact writes; every file lands atomically in ``root``."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.manifest: list[str] = []

    def _path(self, name: str) -> Path:
        self.manifest.append(name)
        return self.root / name

    def json(self, name: str, obj) -> None:
        io.write_json(self._path(name), _clean(obj))

    def csv(self, name: str, header, rows) -> None:
        io.write_csv(self._path(name), header, rows)

    def series(self, name: str, r, values) -> None:
        self.csv(name, ["r", "value"], zip(np.asarray(r, float), np.asarray(values, float)))

    def profile(self, name: str, prof) -> None:
        path = self._path(name)
        self.manifest.append(Path(name).with_suffix(".json").name)
        prof.to_csv(path)

    def text(self, name: str, text: str) -> None:
        io.atomic_write_text(self._path(name), text)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


PLOT_TEMPLATE = '''"""Plot {title}. Needs matplotlib; run from this directory."""
import csv

import matplotlib.pyplot as plt


def load(name):
    with open(name, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    return head, [[float(v) for v in row] for row in body]


head, rows = load("{csv}")
x = [row[{xi}] for row in rows]
y = [row[{yi}] for row in rows]
fig, ax = plt.subplots()
ax.plot(x, y, ".-", ms=2)
ax.set_xscale("{xscale}")
ax.set_xlabel(head[{xi}])
ax.set_ylabel(head[{yi}])
ax.set_title("{title}")
fig.savefig("{png}", dpi=150)
'''


def _plot_script(writer: Writer, name: str, csv_name: str, title: str, xi=0, yi=1, xscale="log"):
    writer.text(name, PLOT_TEMPLATE.format(title=title, csv=csv_name, xi=xi, yi=yi, xscale=xscale,
                                           png=Path(name).with_suffix(".png").name))


# -- commands ------------------------------------------------------------------


def cmd_constants(cfg: RunConfig, writer: Writer, args) -> RunSummary:
    k = derive_constants(cfg.params)
    data = k.to_dict()
    print(json.dumps(_clean(data), indent=2, sort_keys=True))
    writer.json("constants.json", data)
    return RunSummary("constants", data)


def _emden(cfg: RunConfig, writer: Optional[Writer]):
    params = cfg.params
    k = derive_constants(params)
    Q = solve_emden_fowler(cfg.r_max, 1e-12, params)
    m = Q.r >= 1e2
    r = Q.r[m]
    y = r ** ((params.d - 2) / 2.0) * (Q.u[m] - k.A * r**-k.alpha)
    fit = analysis.fit_log_sinusoid(r, y, frequency_hint=k.omega)
    if writer is not None:
        writer.profile("emden_Q.csv", Q)
        writer.series("emden_tail.csv", r, y)
        writer.json("emden_fit.json", fit.to_dict())
        _plot_script(writer, "plot_emden_tail.py", "emden_tail.csv", "Emden-Fowler tail")
    return Q, fit


def cmd_emden(cfg, writer, args) -> RunSummary:
    k = derive_constants(cfg.params)
    _, fit = _emden(cfg, writer)
    print(json.dumps(_clean(fit.to_dict()), indent=2, sort_keys=True))
    return RunSummary("emden", k.to_dict(), fits={"emden_tail": fit.to_dict()})


def _singular(cfg: RunConfig, writer: Optional[Writer]):
    lam, Phi = find_lambda_star(None, cfg.lambda_tol, cfg.r0, cfg.params, rtol=cfg.rtol, atol=cfg.atol)
    ff = analysis.far_field_diagnostics(Phi)
    K = analysis.extract_K(Phi)
    info = {
        "lambda_star": lam,
        "cache_hit": bool(Phi.meta.get("cache_hit")),
        "sign_changes": Phi.meta.get("sign_changes"),
        "far_field": ff.to_dict(),
        "K": K.K,
        "K_drift": K.drift,
    }
    if writer is not None:
        writer.profile("singular_Phi.csv", Phi)
        writer.series("far_field_ratio.csv", ff.r, ff.ratio)
        writer.series("far_field_scaled.csv", ff.r, ff.scaled)
        writer.json("singular.json", info)
        _plot_script(writer, "plot_far_field.py", "far_field_scaled.csv", "r^2 (E/Psi - (lambda-d)/2)", xscale="linear")
    return lam, Phi, ff, K, info


def cmd_singular(cfg, writer, args) -> RunSummary:
    lam, Phi, ff, K, info = _singular(cfg, writer)
    print(json.dumps(_clean(info), indent=2, sort_keys=True))
    return RunSummary("singular", derive_constants(cfg.params).to_dict(), lambda_star=lam, fits={"far_field": info})


def cmd_shoot(cfg, writer, args) -> RunSummary:
    params = cfg.params
    bracket = (0.05, params.d - 0.05) if not params.linear_mode else (params.d - 1.0, params.d + 1.0)
    res = shoot_lambda(cfg.theta, bracket, cfg.lambda_tol, params, rtol=cfg.rtol, atol=cfg.atol,
                       prescan=not params.linear_mode)
    data = res.to_dict()
    writer.json("shoot.json", data)
    writer.profile("shoot_profile.csv", res.profile)
    print(json.dumps(_clean({"theta": res.theta, "lambda": res.lam, "iterations": res.iterations,
                             "achieved_tol": res.achieved_tol}), indent=2, sort_keys=True))
    summary = RunSummary("shoot", derive_constants(params).to_dict() if not params.linear_mode else {})
    summary.fits["shoot"] = data
    return summary


def _sweep(cfg: RunConfig, lam: float, parallel: int, writer: Optional[Writer]):
    grid = np.geomspace(cfg.theta_min, cfg.theta_max, cfg.points)
    curve = bifurcation.sweep(grid, None, cfg.lambda_tol, cfg.params, lambda_star=lam, rtol=cfg.rtol,
                              atol=cfg.atol, parallel=parallel)
    bifurcation.extract_branch_points(curve, lam)
    report = bifurcation.compare_theory(curve, derive_constants(cfg.params), lam, cfg.tolerances())
    if writer is not None:
        writer.csv("curve.csv", ["theta", "lambda", "iterations", "achieved_tol"], curve.rows())
        writer.csv("branch_points.csv", ["n", "theta_n", "lambda_n"], [b.as_row() for b in curve.branch_points])
        writer.json("theory_report.json", dict(report.to_dict(), sweep_mode=curve.mode, failures=curve.failures))
        _plot_script(writer, "plot_sweep.py", "curve.csv", "lambda(theta)")
    return curve, report


def cmd_sweep(cfg, writer, args) -> RunSummary:
    lam, *_ = _singular(cfg, None)
    curve, report = _sweep(cfg, lam, args.parallel, writer)
    print(json.dumps(_clean(report.to_dict()), indent=2, sort_keys=True))
    return RunSummary("sweep", derive_constants(cfg.params).to_dict(), lambda_star=lam,
                      fits={"theory": report.to_dict()})


def _kernel(cfg: RunConfig, writer: Optional[Writer]):
    params = cfg.params
    k = derive_constants(params)
    # the near-origin window needs Phi from deep inside the origin layer
    lam, Phi = find_lambda_star(None, cfg.lambda_tol, 1e-6, params, rtol=cfg.rtol, atol=cfg.atol)
    psi1 = analysis.kernel_psi1(lam, Phi)
    psi2 = analysis.kernel_psi2(lam, Phi, 1.0)
    m = psi1.r <= 1e-2
    r = psi1.r[m]
    y = r ** ((params.d - 2) / 2.0) * psi1.u[m]
    fit = analysis.fit_log_sinusoid(r, y, frequency_hint=k.omega)
    w = analysis.wronskian(psi1, psi2, np.geomspace(0.01, 1.0, 400))
    info = {"lambda_star": lam, "near_origin_fit": fit.to_dict(), "wronskian_median": w.median,
            "wronskian_deviation": w.deviation, "psi1_meta": psi1.meta}
    if writer is not None:
        writer.profile("kernel_psi1.csv", psi1)
        writer.series("kernel_near_origin.csv", r, y)
        writer.json("kernel.json", info)
        _plot_script(writer, "plot_kernel.py", "kernel_near_origin.csv", "r^{(d-2)/2} psi_1 near the origin")
    return psi1, psi2, fit, w, info


def cmd_kernel(cfg, writer, args) -> RunSummary:
    *_, info = _kernel(cfg, writer)
    print(json.dumps(_clean(info), indent=2, sort_keys=True))
    return RunSummary("kernel", derive_constants(cfg.params).to_dict(), lambda_star=info["lambda_star"],
                      fits={"kernel": info})


def _check(out: list, name, measured, target, tol, passed):
    out.append(Criterion(name, measured, target, tol, bool(passed)))


def acceptance_checks(cfg: RunConfig, parallel: int = 0, prefix: str = "") -> tuple[list, dict, dict]:
    """Measure every acceptance quantity for ``cfg.params``; return criteria, fits and timings."""
    params = cfg.params
    k = derive_constants(params)
    crit: list[Criterion] = []
    fits: dict = {}
    times: dict = {}

    t = time.perf_counter()
    ident = abs(k.A ** (k.p - 1) - k.alpha * (k.d - 2 - k.alpha)) / (k.alpha * (k.d - 2 - k.alpha))
    _check(crit, prefix + "constants.A_identity", ident, 0.0, 1e-12, ident < 1e-12)
    om = abs(k.omega**2 - abs((k.d - 2) ** 2 - 4 * k.p * k.A ** (k.p - 1))) / k.omega**2
    _check(crit, prefix + "constants.omega_identity", om, 0.0, 1e-12, om < 1e-12)
    if (params.d, params.p) == (5, 3.0):
        closed = {"A": math.sqrt(2.0), "omega": math.sqrt(15.0), "sigma": 1.5, "beta": 2.0,
                  "m": 2.0**-0.5, "lambda1": 5.0}
        worst = max(abs(getattr(k, name) / v - 1.0) for name, v in closed.items())
        _check(crit, prefix + "constants.closed_forms", worst, 0.0, 1e-12, worst < 1e-12)
    pjl = joseph_lundgren(11)
    _check(crit, prefix + "constants.p_JL_11", pjl, 6.92203, 1e-4, abs(pjl - 6.92203) < 1e-4)
    times["constants"] = time.perf_counter() - t

    t = time.perf_counter()
    lin = ProblemParams(params.d, params.p, linear_mode=True)
    res = shoot_lambda(1.0, (params.d - 1.0, params.d + 1.0), 1e-12, lin, prescan=False)
    _check(crit, prefix + "linear.lambda", res.lam, float(params.d), 1e-9, abs(res.lam - params.d) < 1e-9)
    K = analysis.extract_K(res.profile).K
    _check(crit, prefix + "linear.K", K, 1.0, 1e-6, abs(K - 1.0) < 1e-6)
    times["linear"] = time.perf_counter() - t

    t = time.perf_counter()
    _, efit = _emden(cfg, None)
    fits["emden_tail"] = efit.to_dict()
    rel = abs(efit.frequency - k.omega) / k.omega
    _check(crit, prefix + "emden.tail_frequency_vs_omega", efit.frequency, k.omega, 0.01, rel < 0.01)
    rel = abs(efit.frequency - k.log_frequency) / k.log_frequency
    _check(crit, prefix + "emden.tail_frequency_vs_omega_half", efit.frequency, k.log_frequency, 0.01, rel < 0.01)
    times["emden"] = time.perf_counter() - t

    t = time.perf_counter()
    lam, Phi, ff, Kest, info = _singular(cfg, None)
    fits["singular"] = info
    _check(crit, prefix + "singular.lambda_star_in_range", lam, [0.0, float(params.d)], None, 0 < lam < params.d)
    m = Phi.r <= 1e-2
    dev = np.abs(Phi.u[m] * Phi.r[m] ** k.alpha / k.A - 1.0)
    pf = analysis.fit_power_law(Phi.r[m], dev)
    kappa = k.origin_correction_exponent
    _check(crit, prefix + "singular.origin_exponent", pf.exponent, kappa, 0.25, abs(pf.exponent - kappa) < 0.25)
    _check(crit, prefix + "singular.plateau1", ff.plateau1, ff.target1, 1e-3, abs(ff.plateau1 - ff.target1) < 1e-3)
    _check(crit, prefix + "singular.plateau2", ff.plateau2, ff.target2, 1e-2, abs(ff.plateau2 - ff.target2) < 1e-2)
    times["singular"] = time.perf_counter() - t

    t = time.perf_counter()
    Q = solve_emden_fowler(1e4, 1e-12, params)
    lq = analysis.lambda_Q_residual(Q)
    _check(crit, prefix + "kernel.H_LambdaQ_residual", lq.max_relative, 0.0, 1e-6, lq.max_relative < 1e-6)
    psi1, psi2, kfit, w, kinfo = _kernel(cfg, None)
    fits["kernel"] = kinfo
    rel = abs(kfit.frequency - k.omega) / k.omega
    _check(crit, prefix + "kernel.psi1_frequency_vs_omega", kfit.frequency, k.omega, 0.02, rel < 0.02)
    rel = abs(kfit.frequency - k.log_frequency) / k.log_frequency
    _check(crit, prefix + "kernel.psi1_frequency_vs_omega_half", kfit.frequency, k.log_frequency, 0.02, rel < 0.02)
    e1, e2 = analysis.euler_mode_profiles(params, 0.01, 10.0)
    we = analysis.wronskian(e1, e2)
    _check(crit, prefix + "kernel.euler_wronskian", we.deviation, 0.0, 1e-10, we.deviation < 1e-10)
    _check(crit, prefix + "kernel.numeric_wronskian", w.deviation, 0.0, 1e-4, w.deviation < 1e-4)
    times["kernel"] = time.perf_counter() - t

    t = time.perf_counter()
    curve, report = _sweep(cfg, lam, parallel, None)
    fits["theory"] = report.to_dict()
    _check(crit, prefix + "law.frequency_vs_alpha_omega", report.frequency_fit, report.frequency_theory,
           cfg.frequency_tol, report.passes["frequency"])
    _check(crit, prefix + "law.frequency_vs_euler", report.frequency_fit, report.frequency_corrected,
           cfg.frequency_tol, report.passes["frequency_corrected"])
    _check(crit, prefix + "law.envelope_exponent", report.envelope_exponent_fit, report.envelope_exponent_theory,
           cfg.envelope_tol, report.passes["envelope"])
    _check(crit, prefix + "law.center", report.center, lam, cfg.center_tol, report.passes["center"])
    _check(crit, prefix + "law.alternation", report.alternates, True, None, report.alternates)
    _check(crit, prefix + "law.affine_n", report.slope_residual, 0.0, 0.02, report.passes["affine_n"])
    times["sweep"] = time.perf_counter() - t

    t = time.perf_counter()
    mr = bifurcation.matching_residual(curve, Phi, cfg.r_star, 3.0)
    fits["matching"] = {"n": mr.n, "D": mr.D}
    _check(crit, prefix + "convergence.D_n_decreasing", [float(x) for x in mr.D], "decreasing for n>=3", None, mr.decreasing_from(3))
    times["matching"] = time.perf_counter() - t

    t = time.perf_counter()
    sh = shoot_lambda(cfg.theta, None, cfg.lambda_tol, params, rtol=cfg.rtol, atol=cfg.atol, target=lam)
    eps = sh.lam - lam
    tr = analysis.exterior_transform_residual(sh.profile, eps, r_star=cfg.r_star)
    _check(crit, prefix + "transform.residual", tr, 0.0, 1e-8, tr < 1e-8)
    bad = analysis.exterior_transform_residual(sh.profile, eps, r_star=cfg.r_star, exponent_sign=1.0)
    _check(crit, prefix + "transform.flipped_control_fails", bad, "> 1e-8", None, bad > 1e-8)
    times["transform"] = time.perf_counter() - t
    return crit, fits, times


def cmd_verify(cfg, writer, args) -> RunSummary:
    k = derive_constants(cfg.params)
    crit, fits, times = acceptance_checks(cfg, args.parallel)
    if cfg.pure_p_regression and cfg.params.q is not None:
        pure = RunConfig.from_dict(dict(cfg.to_dict(), params=dict(cfg.params.to_dict(), q=None)))
        c2, f2, t2 = acceptance_checks(pure, args.parallel, prefix="pure_p.")
        crit += c2
        fits["pure_p"] = f2
        times.update({f"pure_p.{a}": b for a, b in t2.items()})
    for c in crit:
        print(c.line())
    summary = RunSummary("verify", k.to_dict(), lambda_star=fits["singular"]["lambda_star"], fits=fits,
                         criteria=crit, timings=times, notes={"seed_free": bool(args.seed_free)})
    return summary


HANDLERS = {
    "constants": cmd_constants,
    "emden": cmd_emden,
    "singular": cmd_singular,
    "shoot": cmd_shoot,
    "sweep": cmd_sweep,
    "kernel": cmd_kernel,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gpss", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--parallel", type=int, default=0, help="worker processes for sweeps")
    ap.add_argument("--seed-free", action="store_true",
                    help="assert that the run uses no random numbers (always true; recorded in the summary)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_config(path) -> RunConfig:
    return RunConfig.from_json(Path(path).read_text())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.output_dir = args.out
        if args.command != "shoot" or not cfg.params.linear_mode:
            validate(cfg.params, "basic")
    except (ValidationError, DomainError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO

    writer = Writer(Path(cfg.output_dir))
    start = time.perf_counter()
    try:
        summary = HANDLERS[args.command](cfg, writer, args)
        summary.timings["total"] = time.perf_counter() - start
        summary.manifest = list(writer.manifest) + ["summary.json"]
        writer.json("summary.json", summary.to_dict())
    except (ValidationError, DomainError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceFailure as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    except GPSSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    if not summary.passed:
        for c in summary.criteria:
            if not c.passed:
                print(f"failed: {c.line()}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
