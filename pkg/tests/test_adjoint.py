import numpy as np
import pytest
import scipy.linalg as sla

from conftest import laplacian
from halfeig.adjoint import (adjoint_eigenfunction, linearize_at, measure_distance, measure_set,
                             minimax_certificate, refined_limit, selection_from_rules,
                             solvability_functional)
from halfeig.dirichlet import solve_linear_dirichlet
from halfeig.eigen import principal_half_eigen_plus
from halfeig.mesh import integrate
from halfeig.operator import BellmanOperator, EllipticityParams, linear_operator

PI2 = np.pi**2
SCHEDULE = PI2 - np.array([1, 0.5, 0.25, 0.125, 0.0625])


@pytest.fixture(scope="module")
def lap_pair(line401):
    op = laplacian()
    return op, principal_half_eigen_plus(op, line401)


def test_laplacian_adjoint_is_twice_sine(lap_pair, line401):
    op, eig = lap_pair
    frozen = linearize_at(op, line401, eig)
    assert frozen.unique_almost_everywhere and frozen.tie_mass == 0
    m = adjoint_eigenfunction(frozen, line401, eig)
    x = line401.coords[:, 0]
    assert np.abs(m.phi_star - 2 * np.sin(np.pi * x)).max() < 2e-3
    assert integrate(line401, eig.phi * m.phi_star) == pytest.approx(1.0, abs=1e-10)


def test_single_member_frozen_matrix_is_its_own(lap_pair, line401):
    from halfeig.dirichlet import policy_matrix
    from halfeig.operator import stencils

    op, eig = lap_pair
    frozen = linearize_at(op, line401, eig)
    ref = policy_matrix(stencils(op, line401), line401, np.zeros(line401.n_interior, int))
    assert abs(frozen.matrix - ref).max() == 0


def test_two_laplacian_family_measure(ex43_measures101, line101, ex43_pair101, x101):
    ms = ex43_measures101
    assert len(ms) == 1 and ms.complete
    m = ms.extremes[0]
    assert np.all(m.control == 0)
    assert np.abs(m.phi_star - 2 * np.sin(np.pi * x101)).max() < 2e-3
    nodes = line101.interior_nodes
    assert m.phi_star[nodes].min() > 0
    assert integrate(line101, m.density(ex43_pair101[0].phi)) == pytest.approx(1, abs=1e-10)


@pytest.mark.parametrize("b", [1.0, -2.0])
def test_drift_adjoint_against_dense_oracle(line101, x101, b):
    op = BellmanOperator((linear_operator(1.0, b, 0.0),), EllipticityParams(1.0, 1.0, abs(b)))
    eig = principal_half_eigen_plus(op, line101)
    frozen = linearize_at(op, line101, eig)
    m = adjoint_eigenfunction(frozen, line101, eig)

    vals, vecs = sla.eig(frozen.matrix.toarray().T)
    k = np.argmin(vals.real)
    assert abs(vals[k].real - eig.lam) < 1e-8 * eig.lam
    nodes = line101.interior_nodes
    mass = np.abs(vecs[:, k].real)
    ref = np.zeros(line101.size)
    ref[nodes] = mass / line101.weights[nodes]
    ref /= integrate(line101, eig.phi * ref)
    assert np.abs(m.phi_star - ref).max() < 1e-6 * ref.max()

    # continuous adjoint -v'' - b v' has principal eigenfunction exp(-b x / 2) sin(pi x)
    cont = np.exp(-b * x101 / 2) * np.sin(np.pi * x101)
    cont /= integrate(line101, eig.phi * cont)
    assert np.abs(m.phi_star - cont).max() < 0.05 * cont.max()


def test_linear_operator_single_measure(lap_pair, line401):
    op, eig = lap_pair
    ms = measure_set(op, line401, eig)
    assert len(ms) == 1 and ms.complete and not ms.rejected


def test_disk_example_has_several_measures(ex42_measures, ex42_pair, disk101):
    ms = ex42_measures
    assert not ms.complete
    assert len(ms) >= 2
    phi1 = ex42_pair[0].phi
    dists = [measure_distance(disk101, phi1, a, b)
             for i, a in enumerate(ms.extremes) for b in ms.extremes[i + 1:]]
    assert max(dists) > 0.01
    for m in ms.extremes:
        assert m.phi_star[disk101.interior_nodes].min() > 0
        assert integrate(disk101, m.density(phi1)) == pytest.approx(1, abs=1e-10)


def test_disk_tie_flags(ex42, disk101, ex42_pair):
    frozen = linearize_at(ex42, disk101, ex42_pair[0])
    assert not frozen.unique_almost_everywhere
    assert frozen.tie_mass > 1e-9


def test_solvability_functional_values(ex43_measures101, line101, ex43_pair101, x101):
    ms = ex43_measures101
    assert solvability_functional(-np.sin(np.pi * x101), ms, line101) == pytest.approx(-1, abs=1e-3)
    assert abs(solvability_functional(np.sin(2 * np.pi * x101), ms, line101)) < 1e-4
    assert solvability_functional(ex43_pair101[0].phi, ms, line101) == pytest.approx(1, abs=1e-12)


def test_functional_rejects_empty_set(line101, x101):
    from halfeig.adjoint import MeasureSet

    with pytest.raises(ValueError):
        solvability_functional(x101, MeasureSet([], True), line101)


@pytest.mark.parametrize("f,solvable", [
    (lambda x: np.sin(2 * np.pi * x), True),
    (lambda x: np.sin(3 * np.pi * x) + np.sin(2 * np.pi * x), True),
    (lambda x: np.ones_like(x), False),
    (lambda x: np.sin(np.pi * x) + 0.1 * np.cos(x), False),
])
def test_fredholm_alternative(line101, x101, f, solvable):
    op = laplacian()
    eig = principal_half_eigen_plus(op, line101)
    ms = measure_set(op, line101, eig)
    fv = np.where(line101.interior, f(x101), 0.0)
    T = solvability_functional(fv, ms, line101)
    # minimal-norm least squares solve at the discrete eigenvalue
    A = linearize_at(op, line101, eig).matrix.toarray() - eig.lam * np.eye(line101.n_interior)
    rhs = fv[line101.interior_nodes]
    u = np.linalg.lstsq(A, rhs, rcond=1e-10)[0]
    ok = np.abs(A @ u - rhs).max() <= 1e-8 * (1 + np.abs(rhs).max())
    assert ok == solvable
    assert (abs(T) <= 1e-6 * np.abs(fv).max()) == solvable


def test_certificate_two_laplacian_family(ex43, line101, ex43_measures101, ex43_pair101):
    rep = minimax_certificate(ex43, line101, ex43_measures101, ex43_pair101[0], trials=300)
    assert rep.passed, str(rep)
    assert max(rep.max_excess) <= rep.cert_tol
    assert rep.at_eigenfunction <= 1e-8 * (1 + PI2)


def test_certificate_disk(ex42, disk101, ex42_measures, ex42_pair):
    rep = minimax_certificate(ex42, disk101, ex42_measures, ex42_pair[0], trials=40, cert_tol=5e-2)
    assert rep.passed, str(rep)
    assert "PASS" in str(rep)


def test_certificate_needs_trials(ex43, line101, ex43_measures101, ex43_pair101):
    with pytest.raises(ValueError):
        minimax_certificate(ex43, line101, ex43_measures101, ex43_pair101[0], trials=0)


def test_refined_limit_values(ex43, line401, ex43_pair401):
    x = line401.coords[:, 0]
    assert refined_limit(ex43, line401, np.sin(np.pi * x), SCHEDULE) == pytest.approx(1, rel=2e-2)
    assert refined_limit(ex43, line401, ex43_pair401[0].phi, SCHEDULE) == pytest.approx(1, rel=2e-2)
    one = np.where(line401.interior, 1.0, 0.0)
    k = refined_limit(laplacian(), line401, one, SCHEDULE)
    assert k == pytest.approx(4 / np.pi, rel=2e-2)
    ms = measure_set(ex43, line401, ex43_pair401[0])
    assert k == pytest.approx(solvability_functional(one, ms, line401), rel=2e-2)


def test_candidate_rules(ex43, line101, ex43_pair101, x101):
    ctrl = selection_from_rules(ex43, line101, [("x - 0.5", 1)],
                                np.zeros(line101.n_interior, int))
    xi = x101[line101.interior_nodes]
    assert np.all(ctrl[xi > 0.5] == 1) and np.all(ctrl[xi < 0.5] == 0)
    with pytest.raises(ValueError):
        selection_from_rules(ex43, line101, [("x", 5)], ctrl)
    ms = measure_set(ex43, line101, ex43_pair101[0], candidates=[[("x - 0.5", 1)]])
    assert len(ms) == 1
    assert any("candidate 0" in r for r in ms.rejected)
