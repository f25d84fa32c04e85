import math

import numpy as np
import pytest
import sympy
from scipy.optimize import brentq

from gpss.analysis import (
    euler_mode_profiles,
    euler_modes,
    exterior_transform_residual,
    extract_K,
    far_field_diagnostics,
    fit_log_sinusoid,
    fit_power_law,
    kernel_psi1,
    kernel_psi2,
    lambda_Q_residual,
    transform_residual_series,
    wronskian,
)
from gpss.core import CANONICAL, derive_constants
from gpss.errors import DomainError, NoPlateau, WindowTooShort
from gpss.integrator import EventSet, integrate, origin_init_smooth
from gpss.profiles import find_lambda_star, scale_emden, shoot_lambda, solve_emden_fowler

from .conftest import LINEAR

K = derive_constants(CANONICAL)


@pytest.fixture(scope="module")
def q_long():
    return solve_emden_fowler(1e6, 1e-12, CANONICAL)


@pytest.fixture(scope="module")
def phi_deep():
    # a deeper start resolves three log-periods of the kernel below r = 1e-2
    return find_lambda_star(params=CANONICAL, r0=1e-6)


@pytest.fixture(scope="module")
def psi1_deep(phi_deep):
    lam, phi = phi_deep
    return kernel_psi1(lam, phi)


@pytest.fixture(scope="module")
def profile_at_four():
    theta = brentq(lambda t: shoot_lambda(t, None, 1e-12, CANONICAL).lam - 4.0, 1.0, 2.0, xtol=1e-12)
    return shoot_lambda(theta, None, 1e-12, CANONICAL).profile


def hermite(theta=1.0, r_end=6.0):
    return integrate(origin_init_smooth(theta, 1e-3, LINEAR, 5.0), r_end, LINEAR, 5.0, (1e-12, 1e-14),
                     EventSet.none())


# -- fits -------------------------------------------------------------------

def test_synthetic_sinusoid_recovered():
    r = np.geomspace(1.0, 1e3, 2000)
    y = 2 * np.sin(3.873 * np.log(r) + 0.7)
    fit = fit_log_sinusoid(r, y, 3.873)
    assert fit.amplitude == pytest.approx(2.0, abs=1e-6)
    assert fit.frequency == pytest.approx(3.873, abs=1e-6)
    assert fit.phase == pytest.approx(0.7, abs=1e-6)
    assert abs(fit.offset) < 1e-6
    assert fit.residual_rms < 1e-9
    assert fit.window == (1.0, pytest.approx(1e3))


def test_sinusoid_found_without_hint_and_with_poor_hint():
    r = np.geomspace(1.0, 1e4, 2000)
    y = 0.3 * np.sin(1.9 * np.log(r) + 5.0) - 1.0
    for hint in (None, 3.8):
        fit = fit_log_sinusoid(r, y, hint)
        assert fit.frequency == pytest.approx(1.9, abs=1e-8)
        assert fit.offset == pytest.approx(-1.0, abs=1e-8)
        assert fit.phase == pytest.approx(5.0, abs=1e-8)


def test_sinusoid_with_power_envelope():
    r = np.geomspace(10.0, 1e4, 1500)
    y = 0.8 * r**-0.5 * np.sin(2.5 * np.log(r) + 1.0)
    fit = fit_log_sinusoid(r, y, envelope=True)
    assert fit.envelope_exponent == pytest.approx(-0.5, abs=1e-8)
    assert fit.amplitude == pytest.approx(0.8, rel=1e-8)
    np.testing.assert_allclose(fit.predict(r), y, atol=1e-10)


def test_short_windows_rejected():
    r = np.geomspace(1.0, 2.0, 100)
    with pytest.raises(WindowTooShort):
        fit_log_sinusoid(r, np.sin(3.873 * np.log(r)), 3.873)
    r = np.geomspace(1.0, 1e3, 20)
    with pytest.raises(WindowTooShort):
        fit_log_sinusoid(r, np.sin(3.873 * np.log(r)), 3.873)


def test_power_law_fit():
    x = np.geomspace(1, 100, 20)
    fit = fit_power_law(x, -3 * x**-0.75)
    assert fit.exponent == pytest.approx(-0.75, abs=1e-12)
    assert fit.coefficient == pytest.approx(3.0, rel=1e-12)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.n_points == 20
    with pytest.raises(ValueError):
        fit_power_law([1, 2], [1, 2])


# -- oscillation frequencies ------------------------------------------------

def q_tail_fit(q_long):
    r = np.geomspace(1e2, 1e6, 3000)
    return fit_log_sinusoid(r, r**1.5 * (q_long(r) - math.sqrt(2) / r))


def psi1_fit(psi1):
    r = np.geomspace(psi1.r_min, 1e-2, 2000)
    return fit_log_sinusoid(r, r**1.5 * psi1(r))


def lambda_q_fit(q_long):
    res = lambda_Q_residual(q_long, window=(1e2, 5e5), n=3000)
    return fit_log_sinusoid(res.tau, res.tau**1.5 * res.LQ)


def test_q_tail_frequency_is_euler_exponent_frequency(q_long):
    fit = q_tail_fit(q_long)
    assert fit.frequency == pytest.approx(K.log_frequency, rel=0.01)


def test_psi1_origin_frequency_is_euler_exponent_frequency(psi1_deep):
    fit = psi1_fit(psi1_deep)
    assert fit.frequency == pytest.approx(K.log_frequency, rel=0.01)
    assert fit.periods > 2.5


def test_lambda_q_tail_frequency(q_long):
    fit = lambda_q_fit(q_long)
    assert fit.frequency == pytest.approx(K.log_frequency, rel=0.01)


def test_frequency_universality(q_long, psi1_deep):
    freqs = [q_tail_fit(q_long).frequency, psi1_fit(psi1_deep).frequency, lambda_q_fit(q_long).frequency]
    assert max(freqs) / min(freqs) - 1 < 0.02


def test_stated_omega_is_twice_the_measured_frequency(q_long):
    # documents the factor two between omega and the oscillation actually present
    assert q_tail_fit(q_long).frequency / K.omega == pytest.approx(0.5, abs=0.01)


# -- far field ----------------------------------------------------------------

def test_far_field_plateaus_at_lambda_four(profile_at_four):
    ff = far_field_diagnostics(profile_at_four, 4.0)
    assert ff.target1 == -0.5
    assert ff.target2 == pytest.approx(-0.625)
    assert abs(ff.plateau1 - ff.target1) < 1e-3
    assert abs(ff.plateau2 - ff.target2) < 1e-2
    assert not ff.warnings


@pytest.mark.parametrize("which", ["singular_canonical", "singular_pure"])
def test_far_field_law_on_singular_profiles(request, which):
    lam, phi = request.getfixturevalue(which)
    ff = far_field_diagnostics(phi)
    assert abs(ff.plateau1 - (lam - 5) / 2) < 1e-3
    assert abs(ff.plateau2 - (lam - 5) * (lam + 1) / 8) < 1e-2


def test_far_field_hermite_plateau_is_zero():
    ff = far_field_diagnostics(hermite())
    assert ff.target1 == 0.0
    # what remains is the growing mode seeded by rounding, amplified by e^{r^2}
    assert abs(ff.plateau1) < 1e-6
    assert abs(ff.plateau2) < 1e-4


def test_far_field_negative_control(profile_at_four):
    # reading the same tail with a wrong eigenvalue must miss the targets
    ff = far_field_diagnostics(profile_at_four, 3.9)
    assert abs(ff.plateau1 - ff.target1) > 1e-2


def test_no_plateau_warning_on_short_tail():
    with pytest.warns(NoPlateau):
        ff = far_field_diagnostics(hermite(r_end=4.5))
    assert math.isnan(ff.plateau1)
    assert ff.warnings


def test_extract_K_hermite():
    assert extract_K(hermite()).K == pytest.approx(1.0, abs=1e-6)
    assert extract_K(hermite(theta=3.0)).K == pytest.approx(3.0, abs=3e-6)


def test_extract_K_singular(singular_canonical):
    est = extract_K(singular_canonical[1])
    assert est.K > 0
    assert est.drift < 0.01
    assert not est.warnings


# -- kernel functions ---------------------------------------------------------

def test_psi1_launch_derivative(singular_canonical):
    lam, phi = singular_canonical
    psi = kernel_psi1(lam, phi)
    R = psi.meta["R_start"]
    assert R == pytest.approx(min(math.sqrt(lam) + 2, phi.r_max))
    log_slope = psi.du[-1] / psi.u[-1]
    assert abs(log_slope - (-R + (lam - 5) / (2 * R))) < 5 / R**3


def test_linear_psi1_is_hermite_ground_state():
    psi = kernel_psi1(5.0, None, 5.0, LINEAR, r_stop=1e-3)
    # inward, the r^{2-d} solution grows, so rounding shows up only near the origin
    m = psi.r >= 0.1
    ratio = psi.u[m] / np.exp(-psi.r[m] ** 2 / 2)
    assert np.ptp(ratio) / np.median(ratio) < 1e-9


def test_kernel_requires_phi_outside_linear_mode():
    with pytest.raises(DomainError):
        kernel_psi1(3.3, None, 4.0, CANONICAL)


def test_numeric_kernel_wronskian_is_constant(singular_canonical):
    lam, phi = singular_canonical
    psi1 = kernel_psi1(lam, phi)
    psi2 = kernel_psi2(lam, phi, r_end=1.0)
    w = wronskian(psi1, psi2, np.geomspace(0.01, 1.0, 400))
    assert w.deviation < 1e-6
    assert abs(w.median) > 0


def test_kernel_wronskian_negative_control(singular_canonical):
    lam, phi = singular_canonical
    psi1 = kernel_psi1(lam, phi)
    wrong = kernel_psi2(lam + 0.5, phi, r_end=1.0)
    assert wronskian(psi1, wrong, np.geomspace(0.01, 1.0, 400)).deviation > 1e-4


# -- Euler modes and Wronskians -----------------------------------------------

def test_euler_modes_at_one():
    p1, p2 = euler_modes(1.0, CANONICAL)
    assert p1 == 0.0 and p2 == 1.0


def test_euler_mode_quarter_period_stated_frequency():
    r = math.exp(math.pi / (2 * K.omega))
    assert r == pytest.approx(1.5002, abs=1e-4)
    p1, _ = euler_modes(r, CANONICAL, frequency=K.omega)
    assert p1 == pytest.approx(0.5442, abs=1e-4)


def test_euler_mode_quarter_period_default_frequency():
    r = math.exp(math.pi / (2 * K.log_frequency))
    p1, p2 = euler_modes(r, CANONICAL)
    assert p1 == pytest.approx(r**-1.5, rel=1e-14)
    assert abs(p2) < 1e-15


def _euler_residual(params, frequency, r):
    k = derive_constants(params)
    out = []
    for which in (1, 2):
        v, d1, d2 = euler_modes(r, params, frequency, derivative=2, which=which)
        pot = params.p * k.A ** (params.p - 1) / r**2 * v
        res = d2 + (params.d - 1) / r * d1 + pot
        out.append(np.abs(res) / (np.abs(d2) + np.abs((params.d - 1) / r * d1) + np.abs(pot)))
    return max(np.max(o) for o in out)


def test_euler_modes_solve_the_euler_equation():
    r = np.random.default_rng(3).uniform(0.01, 10, 100)
    assert _euler_residual(CANONICAL, None, r) < 1e-14


def test_euler_modes_with_stated_omega_solve_the_euler_equation():
    r = np.random.default_rng(3).uniform(0.01, 10, 100)
    assert _euler_residual(CANONICAL, K.omega, r) < 1e-14


def test_euler_derivatives_against_finite_differences():
    r = np.geomspace(0.05, 5, 30)
    h = 1e-6 * r
    for which in (1, 2):
        v, d1, d2 = euler_modes(r, CANONICAL, derivative=2, which=which)
        fd1 = (euler_modes(r + h, CANONICAL, which=which) - euler_modes(r - h, CANONICAL, which=which)) / (2 * h)
        np.testing.assert_allclose(d1, fd1, rtol=1e-7, atol=1e-7 * np.abs(d1).max())


def test_wronskian_of_stated_frequency_modes():
    f, g = euler_mode_profiles(CANONICAL, 0.01, 10.0, frequency=K.omega)
    w = wronskian(f, g)
    assert w.median == pytest.approx(3.87298, abs=1e-5)
    assert w.deviation < 1e-10


def test_wronskian_of_true_euler_modes():
    f, g = euler_mode_profiles(CANONICAL, 0.01, 10.0)
    w = wronskian(f, g)
    assert w.median == pytest.approx(K.log_frequency, rel=1e-12)
    assert w.deviation < 1e-10


def test_self_wronskian_vanishes(singular_canonical):
    _, phi = singular_canonical
    w = wronskian(phi, phi)
    assert np.all(w.W == 0)


def test_wronskian_disjoint_grids():
    f, _ = euler_mode_profiles(CANONICAL, 0.01, 0.1)
    _, g = euler_mode_profiles(CANONICAL, 1.0, 10.0)
    with pytest.raises(DomainError):
        wronskian(f, g)


# -- Lambda Q -----------------------------------------------------------------

def test_lambda_q_solves_linearized_emden(emden_q):
    assert lambda_Q_residual(emden_q).max_relative < 1e-6


def test_lambda_q_negative_control(emden_q):
    assert lambda_Q_residual(emden_q, alpha=1.01).max_relative > 1e-3


def test_lambda_q_scaling_identity(emden_q):
    theta = 9.0
    u0 = scale_emden(theta, emden_q)
    r = np.geomspace(1e-3, 3.0, 200)
    lhs = u0(r) + r * u0.derivative(r)  # alpha = 1
    tau = u0.stretch * r
    rhs = theta * (emden_q(np.maximum(tau, emden_q.r_min)) + tau * emden_q.derivative(np.maximum(tau, emden_q.r_min)))
    mask = tau >= emden_q.r_min
    np.testing.assert_allclose(lhs[mask], rhs[mask], rtol=1e-12)


# -- exterior change of variables ---------------------------------------------

@pytest.fixture(scope="module")
def converged_shoot(singular_canonical):
    return shoot_lambda(200.0, None, 1e-11, CANONICAL, target=singular_canonical[0])


def test_transform_identity_at_zero_epsilon(converged_shoot):
    prof = converged_shoot.profile
    assert exterior_transform_residual(prof, 0.0, r_star=0.3) < 100 * prof.meta["rtol"]


def test_transform_residual_for_converged_shoot(converged_shoot, singular_canonical):
    eps = converged_shoot.lam - singular_canonical[0]
    assert eps != 0
    assert exterior_transform_residual(converged_shoot.profile, eps, r_star=0.3) < 1e-8


def test_transform_negative_controls(converged_shoot):
    prof = converged_shoot.profile
    eps = 0.05
    assert exterior_transform_residual(prof, eps, r_star=0.3) < 1e-8
    assert exterior_transform_residual(prof, eps, r_star=0.3, exponent_sign=1.0) > 1e-4
    assert exterior_transform_residual(prof, eps, r_star=0.3, inverse_square_sign=-1.0) > 1e-5


def test_transform_series_shape(converged_shoot):
    r, rel = transform_residual_series(converged_shoot.profile, 0.01, r_star=0.3, r_end=2.0)
    assert r.min() >= 0.3 and r.max() <= 2.0
    assert rel.shape == r.shape


def test_transformed_equation_symbolically():
    r, eps, lam, p, q, d = sympy.symbols("r epsilon lambda p q d", positive=True)
    u = sympy.Function("u", positive=True)(r)
    v = r ** (-eps / 2) * u
    h = eps / 2
    lhs_v = (
        sympy.diff(v, r, 2) + (d + eps - 1) / r * sympy.diff(v, r) - (r**2 - lam) * v
        + r ** (eps * (p - 1) / 2) * v**p + r ** (eps * (q - 1) / 2) * v**q + h * (h + d - 2) * v / r**2
    )
    lhs_u = sympy.diff(u, r, 2) + (d - 1) / r * sympy.diff(u, r) - (r**2 - lam) * u + u**p + u**q
    diff = sympy.expand_power_base(sympy.expand(lhs_v - r ** (-eps / 2) * lhs_u), force=True)
    assert sympy.simplify(sympy.powsimp(diff, force=True)) == 0
