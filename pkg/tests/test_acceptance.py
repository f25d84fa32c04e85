"""Primary acceptance criteria, canonical case d=5, p=3, q=1.5 plus the pure-power regression.

Every criterion is measured through ``gpss.cli.acceptance_checks`` (the same code
path as ``gpss verify``) and reported as one ``[PASS]``/``[FAIL]`` line.
"""

import pytest

from gpss.cli import RunConfig, acceptance_checks
from gpss.core import CANONICAL, derive_constants

from .conftest import ACCEPTANCE_LINES, PURE_P


@pytest.fixture(scope="module")
def canonical_run():
    crit, fits, _ = acceptance_checks(RunConfig(params=CANONICAL))
    return {c.name: c for c in crit}, fits


@pytest.fixture(scope="module")
def pure_run():
    crit, fits, _ = acceptance_checks(RunConfig(params=PURE_P), prefix="pure_p.")
    return {c.name: c for c in crit}, fits


def check(run, *names):
    crit, _ = run
    picked = [crit[n] for n in names]
    for c in picked:
        print(c.line())
        ACCEPTANCE_LINES.append(c.line())
    failed = [c.line() for c in picked if not c.passed]
    assert not failed, "\n".join(failed)


def test_constants(canonical_run):
    check(canonical_run, "constants.A_identity", "constants.omega_identity", "constants.closed_forms",
          "constants.p_JL_11")


def test_linear_oracle(canonical_run):
    check(canonical_run, "linear.lambda", "linear.K")


def test_emden_tail_frequency_is_omega(canonical_run):
    check(canonical_run, "emden.tail_frequency_vs_omega")


def test_emden_tail_frequency_is_half_omega(canonical_run):
    check(canonical_run, "emden.tail_frequency_vs_omega_half")


def test_singular_solution(canonical_run):
    check(canonical_run, "singular.lambda_star_in_range", "singular.origin_exponent", "singular.plateau1",
          "singular.plateau2")


def test_kernel_identities(canonical_run):
    check(canonical_run, "kernel.H_LambdaQ_residual", "kernel.euler_wronskian", "kernel.numeric_wronskian")


def test_kernel_psi1_frequency_is_omega(canonical_run):
    check(canonical_run, "kernel.psi1_frequency_vs_omega")


def test_kernel_psi1_frequency_is_half_omega(canonical_run):
    check(canonical_run, "kernel.psi1_frequency_vs_omega_half")


def test_headline_law_frequency_alpha_omega(canonical_run):
    check(canonical_run, "law.frequency_vs_alpha_omega")


def test_headline_law_frequency_euler(canonical_run):
    check(canonical_run, "law.frequency_vs_euler")


def test_headline_law_shape(canonical_run):
    check(canonical_run, "law.envelope_exponent", "law.center", "law.alternation", "law.affine_n")


def test_convergence_to_singular_solution(canonical_run):
    check(canonical_run, "convergence.D_n_decreasing")


def test_transform_algebra(canonical_run):
    check(canonical_run, "transform.residual", "transform.flipped_control_fails")


# -- pure-power regression ---------------------------------------------------------

def test_pure_p_targets_match_canonical(canonical_run, pure_run):
    a, b = canonical_run[1]["theory"], pure_run[1]["theory"]
    assert a["frequency_theory"] == b["frequency_theory"]
    assert a["envelope_exponent_theory"] == b["envelope_exponent_theory"]
    assert derive_constants(PURE_P).omega == derive_constants(CANONICAL).omega


def test_pure_p_frequency_stated(pure_run):
    check(pure_run, "pure_p.emden.tail_frequency_vs_omega", "pure_p.kernel.psi1_frequency_vs_omega",
          "pure_p.law.frequency_vs_alpha_omega")


def test_pure_p_remaining_criteria(pure_run):
    crit, _ = pure_run
    stated = {"pure_p.emden.tail_frequency_vs_omega", "pure_p.kernel.psi1_frequency_vs_omega",
              "pure_p.law.frequency_vs_alpha_omega"}
    check(pure_run, *[n for n in crit if n not in stated])
