import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpss.core import CANONICAL, ProblemParams, derive_constants, joseph_lundgren, validate
from gpss.errors import ValidationError


def test_canonical_constants_closed_forms():
    k = derive_constants(CANONICAL)
    # 4 p A^{p-1} = 24 and (d-2)^2 = 9 give omega = sqrt(15)
    assert k.A == pytest.approx(math.sqrt(2), rel=1e-12)
    assert k.alpha == 1.0
    assert k.sigma == pytest.approx(1.5, rel=1e-12)
    assert k.beta == pytest.approx(2.0, rel=1e-12)
    assert k.omega == pytest.approx(math.sqrt(15), rel=1e-12)
    assert k.m == pytest.approx(2**-0.5, rel=1e-12)
    assert k.mu == pytest.approx(0.70710678, abs=1e-8)
    assert k.lambda1 == 5.0
    assert k.discriminant == pytest.approx(-15.0, rel=1e-12)
    assert k.origin_correction_exponent == pytest.approx(1.5)


def test_small_alpha_case():
    k = derive_constants(ProblemParams(3, 7.0))
    assert k.alpha == pytest.approx(1 / 3)
    assert k.A == pytest.approx((2 / 9) ** (1 / 6), rel=1e-13)


def test_pure_power_correction_exponent_is_two():
    assert derive_constants(ProblemParams(5, 3.0)).origin_correction_exponent == 2.0


@pytest.mark.parametrize("d", [3, 5, 10])
def test_joseph_lundgren_infinite_in_low_dimension(d):
    assert joseph_lundgren(d) == math.inf


def test_joseph_lundgren_d11_high_precision():
    mpmath.mp.dps = 40
    ref = 1 + 4 / (11 - 4 - 2 * mpmath.sqrt(10))
    assert joseph_lundgren(11) == pytest.approx(float(ref), rel=1e-14)
    assert abs(joseph_lundgren(11) - 6.92203) < 1e-4


def test_joseph_lundgren_rejects_low_dimension():
    with pytest.raises(ValidationError):
        joseph_lundgren(2)


def test_discriminant_vanishes_at_joseph_lundgren():
    d = 12
    k = derive_constants(ProblemParams(d, joseph_lundgren(d)))
    assert abs(k.discriminant) < 1e-10


def test_log_frequency_is_imaginary_part_of_euler_exponent():
    # the radial Euler equation phi'' + (d-1)/r phi' + p A^{p-1}/r^2 phi = 0 has phi = r^s with
    # s^2 + (d-2) s + p A^{p-1} = 0
    for params in (CANONICAL, ProblemParams(5, 4.0), ProblemParams(7, 2.0)):
        k = derive_constants(params)
        roots = np.roots([1.0, params.d - 2.0, params.p * k.A ** (params.p - 1)])
        assert abs(roots[0].imag) == pytest.approx(k.log_frequency, rel=1e-12)
        assert k.theta_frequency == pytest.approx(k.log_frequency * (params.p - 1) / 2)


def test_a_undefined_raises_named_error():
    with pytest.raises(ValidationError) as exc:
        derive_constants(ProblemParams(3, 2.0))
    assert exc.value.name == "A undefined"


def test_validate_theorem_mode_accepts_canonical():
    assert validate(CANONICAL, "theorem") is CANONICAL


@pytest.mark.parametrize(
    "params,name",
    [
        (ProblemParams(5, 3.0, 2.5), "q ≥ (p+1)/2"),
        (ProblemParams(5, 2.0, 1.5), "p subcritical"),
        (ProblemParams(12, 20.0), "p ≥ p_JL"),
        (ProblemParams(5, 3.0, 1.5, lam=-1.0), "lambda ≤ 0"),
        (ProblemParams(5, 3.0, 1.5, lam=5.0), "lambda ≥ d"),
        (ProblemParams(2, 3.0), "dimension"),
        (ProblemParams(5, 1.0), "p_not_superlinear"),
        (ProblemParams(5, 3.0, 1.0), "q_not_superlinear"),
    ],
)
def test_validate_names_the_violated_inequality(params, name):
    with pytest.raises(ValidationError) as exc:
        validate(params, "theorem")
    assert exc.value.name == name
    assert exc.value.inequality


def test_q_at_least_p_is_reported():
    # with q < (p+1)/2 <= p the q >= p branch needs p < 1, so only its message is checked here
    with pytest.raises(ValidationError):
        validate(ProblemParams(5, 3.0, 3.0), "theorem")


def test_basic_mode_skips_hypotheses():
    params = ProblemParams(5, 2.0, 2.5)
    assert validate(params) is params


def test_unknown_mode():
    with pytest.raises(ValueError):
        validate(CANONICAL, "strict")


def test_to_dict_marks_infinite_pjl():
    assert derive_constants(CANONICAL).to_dict()["p_JL"] == "inf"


valid_params = st.builds(
    lambda d, frac, q: ProblemParams(d, (d + 2) / (d - 2) + frac, q),
    st.integers(3, 10),
    st.floats(0.05, 5.0),
    st.one_of(st.none(), st.floats(1.01, 1.9)),
)


@given(valid_params)
@settings(max_examples=60, deadline=None)
def test_A_identity_property(params):
    k = derive_constants(params)
    target = k.alpha * (params.d - 2 - k.alpha)
    assert abs(k.A ** (params.p - 1) - target) <= 1e-13 * target


@given(valid_params)
@settings(max_examples=60, deadline=None)
def test_supercritical_low_dimension_is_oscillatory(params):
    k = derive_constants(params)
    assert k.oscillatory
    assert k.sigma > 1


@given(valid_params)
@settings(max_examples=60, deadline=None)
def test_validate_idempotent(params):
    once = validate(params, "basic")
    assert validate(once, "basic") == once == params


@given(
    st.integers(3, 20),
    st.floats(1.01, 50),
    st.one_of(st.none(), st.floats(1.01, 10)),
    st.one_of(st.none(), st.floats(-10, 10)),
    st.booleans(),
)
def test_params_json_round_trip(d, p, q, lam, linear):
    params = ProblemParams(d, p, q, lam, linear)
    assert ProblemParams.from_json(params.to_json()) == params


def test_params_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError):
        ProblemParams.from_dict({"d": 5, "p": 3, "r": 1})
