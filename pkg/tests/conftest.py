import os

import numpy as np
import pytest

from gpss.core import CANONICAL, ProblemParams


@pytest.fixture(scope="session", autouse=True)
def isolated_cache(tmp_path_factory):
    """Keep the on-disk eigenvalue cache out of the user's home directory."""
    path = tmp_path_factory.mktemp("gpss-cache")
    old = os.environ.get("GPSS_CACHE_DIR")
    os.environ["GPSS_CACHE_DIR"] = str(path)
    yield path
    if old is None:
        os.environ.pop("GPSS_CACHE_DIR", None)
    else:
        os.environ["GPSS_CACHE_DIR"] = old


PURE_P = ProblemParams(5, 3.0)
LINEAR = ProblemParams(5, 3.0, linear_mode=True)


@pytest.fixture(scope="session")
def canonical():
    return CANONICAL


@pytest.fixture(scope="session")
def singular_canonical():
    from gpss.profiles import find_lambda_star

    return find_lambda_star(params=CANONICAL)


@pytest.fixture(scope="session")
def singular_pure():
    from gpss.profiles import find_lambda_star

    return find_lambda_star(params=PURE_P)


@pytest.fixture(scope="session")
def emden_q():
    from gpss.profiles import solve_emden_fowler

    return solve_emden_fowler(1e4, 1e-12, CANONICAL)


def _full_sweep(params, singular):
    from gpss import bifurcation

    lam, _ = singular
    curve = bifurcation.sweep(np.geomspace(10.0, 1e4, 400), None, 1e-10, params, lambda_star=lam)
    bifurcation.extract_branch_points(curve, lam)
    return curve


@pytest.fixture(scope="session")
def sweep_canonical(singular_canonical):
    return _full_sweep(CANONICAL, singular_canonical)


@pytest.fixture(scope="session")
def sweep_pure(singular_pure):
    return _full_sweep(PURE_P, singular_pure)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
