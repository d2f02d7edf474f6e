import math

import numpy as np
import pytest

from halfeig import (build_grid, disk, example_4_2, example_4_3, interval, linear_operator,
                     measure_set, principal_half_eigen_minus, principal_half_eigen_plus)
from halfeig.operator import BellmanOperator, EllipticityParams


def bessel_j0(x: float, terms: int = 40) -> float:
    """Power series of J0, accurate to rounding for |x| < 10."""
    total, term = 0.0, 1.0
    for k in range(terms):
        total += term
        term *= -(x / 2) ** 2 / ((k + 1) ** 2)
    return total


def bessel_j0_first_root(tol: float = 1e-14) -> float:
    lo, hi = 2.0, 3.0
    assert bessel_j0(lo) > 0 > bessel_j0(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bessel_j0(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


J01 = bessel_j0_first_root()


def laplacian(dim: int = 1) -> BellmanOperator:
    return BellmanOperator((linear_operator(1.0, 0.0, 0.0, dim),),
                           EllipticityParams(1.0, 1.0), "inf", "laplacian")


def discrete_dirichlet_eig(n: int, length: float = 1.0) -> float:
    h = length / (n - 1)
    return 2 / h**2 * (1 - math.cos(math.pi * h / length))


@pytest.fixture(scope="session")
def line101():
    return build_grid(interval(0, 1), 101)


@pytest.fixture(scope="session")
def line401():
    return build_grid(interval(0, 1), 401)


@pytest.fixture(scope="session")
def disk101():
    return build_grid(disk(1.0), 101)


@pytest.fixture(scope="session")
def ex43():
    return example_4_3()


@pytest.fixture(scope="session")
def ex42():
    return example_4_2()


@pytest.fixture(scope="session")
def ex43_pair101(ex43, line101):
    return principal_half_eigen_plus(ex43, line101), principal_half_eigen_minus(ex43, line101)


@pytest.fixture(scope="session")
def ex43_pair401(ex43, line401):
    return principal_half_eigen_plus(ex43, line401), principal_half_eigen_minus(ex43, line401)


@pytest.fixture(scope="session")
def ex43_measures101(ex43, line101, ex43_pair101):
    return measure_set(ex43, line101, ex43_pair101[0])


@pytest.fixture(scope="session")
def ex42_pair(ex42, disk101):
    return principal_half_eigen_plus(ex42, disk101), principal_half_eigen_minus(ex42, disk101)


@pytest.fixture(scope="session")
def ex42_measures(ex42, disk101, ex42_pair):
    return measure_set(ex42, disk101, ex42_pair[0], identity_tol=1e-2)


@pytest.fixture
def x101(line101):
    return line101.coords[:, 0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
