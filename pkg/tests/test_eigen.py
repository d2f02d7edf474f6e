import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import J01, discrete_dirichlet_eig, laplacian
from halfeig.eigen import (EigenError, EigenOptions, blowup_estimate, eigen_residual,
                           principal_half_eigen_minus, principal_half_eigen_plus)
from halfeig.mesh import build_grid, interval
from halfeig.operator import (BellmanOperator, EllipticityParams, eval_bellman, linear_operator,
                              pucci_minus)

PI2 = np.pi**2


def test_laplacian_pair(line401):
    r = principal_half_eigen_plus(laplacian(), line401)
    x = line401.coords[:, 0]
    assert abs(r.lam - PI2) < 1e-3
    assert np.abs(r.phi - np.sin(np.pi * x)).max() < 1e-3
    assert abs(r.lam - discrete_dirichlet_eig(401)) < 1e-9 * r.lam
    m = principal_half_eigen_minus(laplacian(), line401)
    assert abs(m.lam - r.lam) < 1e-8
    assert np.abs(m.phi + r.phi).max() < 1e-6


def test_two_laplacian_family_pair(ex43_pair401, line401):
    plus, minus = ex43_pair401
    assert abs(plus.lam - PI2) < 1e-3
    assert abs(minus.lam - 2 * PI2) < 2e-3
    assert plus.branch == "plus" and minus.branch == "minus"
    nodes = line401.interior_nodes
    assert plus.phi[nodes].min() > 0 and minus.phi[nodes].max() < 0
    assert plus.phi.max() == pytest.approx(1.0) and minus.phi.min() == pytest.approx(-1.0)


def test_pucci_pair(line401):
    op = pucci_minus(EllipticityParams(1.0, 2.0))
    x = line401.coords[:, 0]
    plus = principal_half_eigen_plus(op, line401)
    minus = principal_half_eigen_minus(op, line401)
    assert abs(plus.lam - PI2) < 1e-3
    assert np.abs(plus.phi - np.sin(np.pi * x)).max() < 1e-3
    assert abs(minus.lam - 2 * PI2) < 2e-3


def test_disk_example(ex42_pair, disk101):
    plus, minus = ex42_pair
    assert abs(plus.lam - (J01**2 - 1)) < 0.1
    assert abs(minus.lam - (J01**2 + 1)) < 0.1
    assert plus.phi[disk101.interior_nodes].min() > 0


@pytest.mark.parametrize("which", ["plus", "minus"])
def test_result_invariants(ex43_pair101, ex43, line101, which):
    r = ex43_pair101[0 if which == "plus" else 1]
    assert np.abs(r.phi).max() == pytest.approx(1.0, abs=1e-15)
    assert np.all(r.phi[line101.boundary_nodes] == 0)
    assert r.residual == pytest.approx(eigen_residual(ex43, line101, r.phi, r.lam), abs=1e-12)
    assert r.residual <= 1e-8 * (1 + abs(r.lam))
    assert len(r.history) == r.iters


def test_ratio_constant_at_interior_nodes(ex43_pair401, ex43, line401):
    plus = ex43_pair401[0]
    nodes = line401.interior_nodes
    ratio = eval_bellman(ex43, line401, plus.phi)[0][nodes] / plus.phi[nodes]
    assert np.abs(ratio - plus.lam).max() <= 1e-8 * (1 + plus.lam)


def test_blowup_fit_matches_inverse_iteration(ex43, line401, ex43_pair401):
    x = line401.coords[:, 0]
    fit = blowup_estimate(ex43, line401, np.sin(np.pi * x),
                          PI2 - np.array([1, 0.5, 0.25, 0.125, 0.0625]))
    assert abs(fit.lambda1_est - PI2) < 5e-3
    assert abs(fit.lambda1_est - ex43_pair401[0].lam) < 5e-3
    assert abs(fit.k_est - 1.0) < 0.02


def test_blowup_linear_case_is_exact(line101):
    x = line101.coords[:, 0]
    lam1 = discrete_dirichlet_eig(101)
    phi = np.sin(np.pi * x)
    lams = lam1 - np.array([2.0, 1.0, 0.5, 0.25, 0.125])
    fit = blowup_estimate(laplacian(), line101, phi, lams)
    pred = (lam1 - fit.lambdas) / phi.max()
    assert np.abs(fit.inv_norms - pred).max() < 1e-6
    assert abs(fit.lambda1_est - lam1) < 1e-6


def test_blowup_rejects_bad_input(ex43, line101):
    with pytest.raises(ValueError):
        blowup_estimate(ex43, line101, -np.ones(line101.size), [1, 2, 3, 4])
    with pytest.raises(ValueError):
        blowup_estimate(ex43, line101, np.ones(line101.size), [4, 3, 2, 1])


def test_nonconvergence_raises(ex43, line101):
    with pytest.raises(EigenError):
        principal_half_eigen_plus(ex43, line101, EigenOptions(max_iters=2))


def _random_family(rng, dim=1):
    gamma, Gamma = 1.0, 3.0
    members = []
    for _ in range(rng.integers(1, 4)):
        members.append(linear_operator(rng.uniform(gamma, Gamma), rng.uniform(-1, 1),
                                       rng.uniform(-1, 1), dim))
    return BellmanOperator(tuple(members), EllipticityParams(gamma, Gamma, 1.0, 1.0))


def test_plus_below_minus_on_random_families():
    g = build_grid(interval(0, 1), 41)
    rng = np.random.default_rng(7)
    for _ in range(50):
        op = _random_family(rng)
        lp = principal_half_eigen_plus(op, g).lam
        lm = principal_half_eigen_minus(op, g).lam
        assert lp <= lm + 1e-8


def test_scaling_law():
    op = pucci_minus(EllipticityParams(1.0, 2.0))
    vals = []
    for R in (0.5, 1.0, 2.0):
        g = build_grid(interval(0, R), 101)
        vals.append(principal_half_eigen_plus(op, g).lam * R**2)
    assert np.ptp(vals) <= 1e-6 * vals[1]


def test_domain_monotonicity(ex43):
    small = principal_half_eigen_plus(ex43, build_grid(interval(0, 0.8), 161)).lam
    big = principal_half_eigen_plus(ex43, build_grid(interval(0, 1), 201)).lam
    assert small > big


def test_second_order_convergence_in_one_dimension(ex43):
    errs = [abs(principal_half_eigen_plus(ex43, build_grid(interval(0, 1), n)).lam - PI2)
            for n in (26, 51, 101)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


@settings(max_examples=10, deadline=None)
@given(st.floats(1.0, 4.0), st.floats(0.2, 3.0))
def test_pucci_eigenvalues_scale_with_ellipticity(gamma, spread):
    g = build_grid(interval(0, 1), 61)
    op = pucci_minus(EllipticityParams(gamma, gamma + spread))
    lam = discrete_dirichlet_eig(61)
    assert principal_half_eigen_plus(op, g).lam == pytest.approx(gamma * lam, rel=1e-8)
    assert principal_half_eigen_minus(op, g).lam == pytest.approx((gamma + spread) * lam, rel=1e-8)
