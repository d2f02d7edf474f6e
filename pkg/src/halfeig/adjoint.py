"""Minimizing measures of the nonlinear minimax formula and the solvability functional.

A measure is stored through its density ``phi_star`` against
``phi1_plus dx``; the discrete adjoint is the transposed policy matrix,
with nodal masses turned into densities by the quadrature weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dirichlet import policy_matrix
from .eigen import EigenResult, blowup_estimate
from .expr import parse_expr
from .mesh import Grid, integrate, sup_norm
from .operator import BellmanOperator, ControlField, eval_bellman, member_values, stencils


class AdjointError(RuntimeError):
    pass


@dataclass
class FrozenLinearization:
    matrix: sp.csc_matrix
    control: ControlField
    unique_almost_everywhere: bool
    tie_mass: float


@dataclass
class MinimizingMeasure:
    phi_star: np.ndarray
    provenance: str
    frozen_lambda: float
    identity_residual: float
    control: np.ndarray = field(repr=False, default=None)

    def density(self, phi1: np.ndarray) -> np.ndarray:
        """Nodal density of the probability measure, ``phi1 * phi_star``."""
        return phi1 * self.phi_star


@dataclass
class MeasureSet:
    extremes: list[MinimizingMeasure]
    complete: bool
    rejected: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.extremes)


def linearize_at(op: BellmanOperator, grid: Grid, eig: EigenResult,
                 tie_tol: float | None = None,
                 tie_measure_tol: float = 1e-9) -> FrozenLinearization:
    """Freeze the argmin policy at the positive eigenfunction.

    The result counts as differentiable almost everywhere when tied nodes
    carry less than ``tie_measure_tol`` of the total quadrature mass.
    """
    _, control = eval_bellman(op, grid, eig.phi, tie_tol)
    A = policy_matrix(stencils(op, grid), grid, control.index)
    w = grid.weights[grid.interior_nodes]
    tie_mass = float(w[control.tie_mask].sum() / w.sum())
    return FrozenLinearization(A, control, tie_mass < tie_measure_tol, tie_mass)


def _left_principal(A: sp.spmatrix, shift: float, tol: float = 1e-13, max_iters: int = 500):
    n = A.shape[0]
    lu = spla.splu((A.T - shift * sp.identity(n)).tocsc())
    x = np.ones(n) / n
    mu = shift
    for _ in range(max_iters):
        y = lu.solve(x)
        y /= np.abs(y).max()
        if y.sum() < 0:
            y = -y
        done = sup_norm(y - x) <= tol
        x = y
        if done:
            break
    mu = float(x @ (A.T @ x) / (x @ x))
    return x, mu


def adjoint_eigenfunction(frozen: FrozenLinearization, grid: Grid, eig: EigenResult,
                          shift_offset: float = 0.1, provenance: str = "argmin") -> MinimizingMeasure:
    """Left principal eigenvector of the frozen matrix as a density, normalized by
    ``integral(phi1_plus * phi_star) = 1``."""
    return _measure_from_matrix(frozen.matrix, frozen.control.index, grid, eig,
                                shift_offset, provenance)


def _measure_from_matrix(A, control, grid: Grid, eig: EigenResult, shift_offset: float,
                         provenance: str) -> MinimizingMeasure:
    nodes = grid.interior_nodes
    mass, mu = _left_principal(A, eig.lam - shift_offset)
    if mass.min() <= 0:
        raise AdjointError(f"{provenance}: adjoint eigenvector is not positive "
                           "(reducible frozen matrix or bad shift)")
    phi_star = np.zeros(grid.size)
    phi_star[nodes] = mass / grid.weights[nodes]
    phi_star /= integrate(grid, eig.phi * phi_star)
    phi1 = eig.phi[nodes]
    resid = float(np.sum(grid.weights[nodes] * phi_star[nodes]
                         * np.abs(A @ phi1 - eig.lam * phi1)))
    return MinimizingMeasure(phi_star, provenance, mu, resid, np.asarray(control))


def measure_distance(grid: Grid, phi1: np.ndarray, a: MinimizingMeasure,
                     b: MinimizingMeasure) -> float:
    """Total-variation (L1) distance between two measures."""
    return integrate(grid, np.abs(phi1 * (a.phi_star - b.phi_star)))


def selection_from_rules(op: BellmanOperator, grid: Grid, rules, default: np.ndarray) -> np.ndarray:
    """Node -> member map from ``[(region_expr, member), ...]``.

    A node belongs to a region when the expression is positive there; the
    first matching rule wins and unmatched nodes keep ``default``.
    """
    control = np.array(default, dtype=np.int64)
    X = grid.coords[grid.interior_nodes].T
    taken = np.zeros(len(control), dtype=bool)
    for region, member in rules:
        if not 0 <= int(member) < len(op.family):
            raise ValueError(f"member index {member} out of range")
        inside = np.broadcast_to(parse_expr(region)(*X), taken.shape) > 0
        pick = inside & ~taken
        control[pick] = int(member)
        taken |= pick
    return control


def measure_set(op: BellmanOperator, grid: Grid, eig: EigenResult, candidates=None,
                tie_tol: float | None = None, identity_tol: float = 1e-6,
                tie_measure_tol: float = 1e-9, shift_offset: float = 0.1,
                dedup_tol: float = 1e-6) -> MeasureSet:
    """Certified part of the set of minimizing measures.

    Contains the measure of the argmin policy, then one measure per family
    member that ties with the operator on the eigenfunction, and one per user
    selection rule.  A member ties when it matches the operator at every
    interior node within ``tie_tol``, or when its frozen operator reproduces
    the eigen-identity in the measure-weighted sense
    ``integral |L phi1 - lam phi1| phi_star dx <= identity_tol``; selection
    rules are held to the latter test.
    """
    frozen = linearize_at(op, grid, eig, tie_tol, tie_measure_tol)
    found = [adjoint_eigenfunction(frozen, grid, eig, shift_offset, "argmin")]
    rejected: list[str] = []

    nodes = grid.interior_nodes
    vals = member_values(op, grid, eig.phi)
    Fphi, _ = eval_bellman(op, grid, eig.phi)
    tt = tie_tol if tie_tol is not None else 1e-9 * (1 + sup_norm(Fphi))
    coef = stencils(op, grid)
    for k in range(len(op.family)):
        if np.all(frozen.control.index == k):
            continue
        pointwise = bool(np.all(np.abs(vals[k] - Fphi[nodes]) <= tt))
        ctrl = np.full(len(nodes), k, dtype=np.int64)
        try:
            m = _measure_from_matrix(policy_matrix(coef, grid, ctrl), ctrl, grid, eig,
                                     shift_offset, f"member {k}")
        except AdjointError as exc:
            if pointwise:
                rejected.append(str(exc))
            continue
        if pointwise or m.identity_residual <= identity_tol:
            found.append(m)

    for i, rules in enumerate(candidates or []):
        ctrl = selection_from_rules(op, grid, rules, frozen.control.index)
        try:
            m = _measure_from_matrix(policy_matrix(coef, grid, ctrl), ctrl, grid, eig,
                                     shift_offset, f"candidate {i}")
        except AdjointError as exc:
            rejected.append(str(exc))
            continue
        if m.identity_residual > identity_tol:
            rejected.append(f"candidate {i}: eigen-identity residual "
                            f"{m.identity_residual:.3e} > {identity_tol:.1e}")
            continue
        found.append(m)

    extremes: list[MinimizingMeasure] = []
    for m in found:
        if all(measure_distance(grid, eig.phi, m, e) > dedup_tol for e in extremes):
            extremes.append(m)
    return MeasureSet(extremes, frozen.unique_almost_everywhere, rejected)


def solvability_functional(f, ms: MeasureSet, grid: Grid) -> float:
    """``max over measures of integral(f * phi_star)``."""
    if not ms.extremes:
        raise ValueError("empty measure set")
    f = grid.check(f, "forcing")
    return max(integrate(grid, f * m.phi_star) for m in ms.extremes)


# ---------------------------------------------------------------- certificate


@dataclass
class CertificateReport:
    passed: bool
    cert_tol: float
    max_excess: list[float]
    at_eigenfunction: float
    random_weights: float
    failures: list[str] = field(default_factory=list)

    def __str__(self):
        return (f"[{'PASS' if self.passed else 'FAIL'}] max J - lam per measure "
                f"{[f'{e:.2e}' for e in self.max_excess]}, |J(mu, phi1) - lam| "
                f"{self.at_eigenfunction:.2e}, |J(nu, phi1) - lam| {self.random_weights:.2e}")


def random_positive_functions(grid: Grid, rng: np.random.Generator, count: int,
                              phi1: np.ndarray | None = None):
    """Smooth random functions bounded away from zero on the closed domain."""
    X = grid.coords
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = hi - lo
    for i in range(count):
        g = np.zeros(grid.size)
        for k in range(1, 6):
            direction = rng.standard_normal(grid.dim)
            direction /= np.linalg.norm(direction)
            freq = np.pi * k / span.max()
            g += rng.normal(0, 0.6 / k**1.5) * np.cos(freq * (X - lo) @ direction
                                                      + rng.uniform(0, 2 * np.pi))
        if grid.dim == 2 and rng.random() < 0.5:
            r2 = np.sum((X - (lo + hi) / 2) ** 2, axis=1)
            g += rng.normal(0, 0.5) * r2 / (span.max() / 2) ** 2
        phi = np.exp(g)
        if phi1 is not None and i % 3 == 2:
            # perturbations of the eigenfunction probe the near-optimal regime
            phi = phi1 + rng.uniform(1e-3, 0.3) * phi
        yield phi


def minimax_certificate(op: BellmanOperator, grid: Grid, ms: MeasureSet, eig: EigenResult,
                        trials: int = 100, cert_tol: float | None = None,
                        seed: int = 0) -> CertificateReport:
    """Empirical check that no positive test function beats ``lambda1_plus``.

    For each measure ``mu`` and random positive ``phi``:
    ``J(mu, phi) = integral F(phi)/phi dmu <= lam + cert_tol``; also
    ``J(nu, phi1) = lam`` for the measures and for random probability vectors.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    lam = eig.lam
    scale = 1 + abs(lam)
    cert_tol = 1e-6 * scale if cert_tol is None else cert_tol
    eig_tol = 1e-8 * scale
    rng = np.random.default_rng(seed)
    nodes = grid.interior_nodes
    w = grid.weights[nodes]
    phi1 = eig.phi[nodes]
    ratio1 = (eval_bellman(op, grid, eig.phi)[0][nodes]) / phi1

    tests = list(random_positive_functions(grid, rng, trials, eig.phi))
    failures = []
    excess = []
    at_eig = 0.0
    for idx, m in enumerate(ms.extremes):
        dmu = w * phi1 * m.phi_star[nodes]
        at_eig = max(at_eig, abs(float(dmu @ ratio1) - lam))
        worst = -np.inf
        for phi in tests:
            Fphi = eval_bellman(op, grid, phi)[0][nodes]
            worst = max(worst, float(dmu @ (Fphi / phi[nodes])) - lam)
        excess.append(worst)
        if worst > cert_tol:
            failures.append(f"measure {idx} ({m.provenance}): J exceeds lam by {worst:.3e}")
    if at_eig > eig_tol:
        failures.append(f"J(mu, phi1) deviates from lam by {at_eig:.3e}")

    nu_dev = 0.0
    for _ in range(trials):
        nu = rng.random(len(nodes))
        nu /= nu.sum()
        nu_dev = max(nu_dev, abs(float(nu @ ratio1) - lam))
    if nu_dev > eig_tol:
        failures.append(f"J(nu, phi1) deviates from lam by {nu_dev:.3e}")
    return CertificateReport(not failures, cert_tol, excess, at_eig, nu_dev, failures)


def refined_limit(op: BellmanOperator, grid: Grid, f, schedule, m: int = 4) -> float:
    """Extrapolated ``lim (lambda1 - lam) * |phi^{lam,f}|_inf`` for ``f >= 0``."""
    return blowup_estimate(op, grid, f, schedule, m).k_est
