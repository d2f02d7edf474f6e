"""Discrete Dirichlet problem ``F(u) = lam*u + f`` in the domain, ``u = 0`` on the boundary."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._kernels import kernels
from .mesh import Grid, lp_norm, sup_norm
from .operator import BellmanOperator, LinearOperatorSpec, member_values, stencils, _bind

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolveOptions:
    max_policy_iters: int = 200
    residual_tol: float = 1e-10
    blowup_threshold: float = 1e8
    keep_iterates: bool = False

    def __post_init__(self):
        if self.max_policy_iters < 1 or self.residual_tol <= 0 or self.blowup_threshold <= 0:
            raise ValueError("solve options must be positive")


@dataclass
class SolveResult:
    status: str  # converged | blowup | singular | max_iters
    u: np.ndarray | None
    residual: float
    policy_switches: list[int] = field(default_factory=list)
    control: np.ndarray | None = None
    norm: float = float("nan")
    iterates: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def policy_matrix(coef: np.ndarray, grid: Grid, control: np.ndarray, lam: float = 0.0):
    """Sparse interior matrix of the frozen policy, minus ``lam`` on the diagonal."""
    rows, cols, vals = kernels.policy_coo(coef, grid.neighbors, grid.position,
                                          np.asarray(control, dtype=np.int64))
    ni = grid.n_interior
    A = sp.csc_matrix((vals, (rows, cols)), shape=(ni, ni))
    if lam:
        A = A - lam * sp.identity(ni, format="csc")
    return A


def _factor(A):
    try:
        lu = spla.splu(A)
    except RuntimeError:
        return None
    diag = np.abs(lu.U.diagonal())
    # near-singular systems are legitimate here (continuation toward an
    # eigenvalue); they surface as blow-up of the solution instead
    if not np.all(np.isfinite(diag)) or diag.min() == 0.0:
        return None
    return lu


def _tolerance(opts: SolveOptions, f_int, A, u_int) -> float:
    # relative target plus the backward-error floor of the sparse solve
    anorm = abs(A).sum(axis=1).max() if A.nnz else 0.0
    return opts.residual_tol * (1 + sup_norm(f_int)) + 64 * EPS * anorm * sup_norm(u_int)


def solve_linear_dirichlet(spec: LinearOperatorSpec, grid: Grid, lam: float, f,
                           opts: SolveOptions | None = None) -> SolveResult:
    opts = opts or SolveOptions()
    f = grid.check(f, "forcing")
    coef = _bind((spec,), None, grid, False)
    control = np.zeros(grid.n_interior, dtype=np.int64)
    A = policy_matrix(coef, grid, control, lam)
    lu = _factor(A)
    if lu is None:
        return SolveResult("singular", None, float("inf"), [], control)
    f_int = f[grid.interior_nodes]
    u_int = lu.solve(f_int)
    if not np.all(np.isfinite(u_int)):
        return SolveResult("singular", None, float("inf"), [], control)
    u = np.zeros(grid.size)
    u[grid.interior_nodes] = u_int
    res = sup_norm(A @ u_int - f_int)
    status = "blowup" if sup_norm(u_int) > opts.blowup_threshold else "converged"
    return SolveResult(status, u, res, [0], control, sup_norm(u))


def solve_bellman_dirichlet(op: BellmanOperator, grid: Grid, lam: float, f,
                            opts: SolveOptions | None = None, u0=None,
                            control0=None) -> SolveResult:
    """Howard policy iteration.

    The starting policy is the first optimal member on ``u0`` (zero by
    default) unless ``control0`` is given.  A node keeps its current member
    unless another one is strictly better, so ties never cause cycling.
    Above the positive half-eigenvalue the policy matrices lose inverse
    positivity and the iteration can revisit a policy; that ends the run
    with status ``max_iters`` at once.
    """
    opts = opts or SolveOptions()
    f = grid.check(f, "forcing")
    coef = stencils(op, grid)
    nodes = grid.interior_nodes
    f_int = f[nodes]
    sign = op.sign

    if control0 is not None:
        control = np.asarray(control0, dtype=np.int64).copy()
    else:
        start = grid.zeros() if u0 is None else grid.check(u0, "u0")
        control = kernels.reduce(member_values(op, grid, start), sign)[1]

    switches: list[int] = []
    iterates: list[np.ndarray] = []
    u = np.zeros(grid.size)
    residual = float("inf")
    seen = set()
    for _ in range(opts.max_policy_iters):
        key = control.tobytes()
        if key in seen:
            log.debug("policy iteration revisited a control field at lam=%g", lam)
            break
        seen.add(key)
        A = policy_matrix(coef, grid, control, lam)
        lu = _factor(A)
        if lu is None:
            return SolveResult("singular", None, residual, switches, control)
        u_int = lu.solve(f_int)
        if not np.all(np.isfinite(u_int)):
            return SolveResult("singular", None, residual, switches, control)
        if sup_norm(u_int) > opts.blowup_threshold:
            return SolveResult("blowup", None, residual, switches, control, sup_norm(u_int))
        u[nodes] = u_int
        if opts.keep_iterates:
            iterates.append(u.copy())

        vals = kernels.apply(coef, grid.neighbors, nodes, u)
        best, cand, _ = kernels.reduce(vals, sign)
        current = vals[control, np.arange(len(control))]
        margin = 1e-12 * (1 + np.abs(best))
        better = sign * (current - best) > margin
        switches.append(int(better.sum()))
        if better.any():
            control = np.where(better, cand, control)
            continue

        tol = _tolerance(opts, f_int, A, u_int)
        residual = sup_norm(best - lam * u_int - f_int)
        if residual > tol:
            # one step of iterative refinement on the frozen policy
            u_int = u_int + lu.solve(f_int - A @ u_int)
            u[nodes] = u_int
            best = kernels.reduce(kernels.apply(coef, grid.neighbors, nodes, u), sign)[0]
            residual = sup_norm(best - lam * u_int - f_int)
        status = "converged" if residual <= tol else "max_iters"
        return SolveResult(status, u.copy(), residual, switches, control, sup_norm(u), iterates)

    return SolveResult("max_iters", u.copy(), residual, switches, control, sup_norm(u), iterates)


# ---------------------------------------------------------------- diagnostics


@dataclass
class ComparisonReport:
    holds: bool
    lam: float
    lambda1_plus: float
    trials: int
    worst_violation: float
    witness: np.ndarray | None = None
    message: str = ""


def verify_comparison(op: BellmanOperator, grid: Grid, lam: float, trials: int = 100,
                      seed: int = 0, lambda1_plus: float | None = None,
                      eig=None) -> ComparisonReport:
    """Check ``f1 <= f2  =>  u1 <= u2`` on random forcing pairs.

    At or above the positive half-eigenvalue the principal eigenfunction is
    returned as the witness: it vanishes on the boundary, satisfies
    ``F(phi) - lam*phi <= 0`` and is positive inside.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if eig is None and lambda1_plus is None:
        from .eigen import principal_half_eigen_plus

        eig = principal_half_eigen_plus(op, grid)
    lam1 = eig.lam if lambda1_plus is None else lambda1_plus

    if lam >= lam1:
        if eig is None:
            from .eigen import principal_half_eigen_plus

            eig = principal_half_eigen_plus(op, grid)
        phi = eig.phi
        Fphi = member_values(op, grid, phi)
        Fphi = kernels.reduce(Fphi, op.sign)[0]
        lhs = Fphi - lam * phi[grid.interior_nodes]
        sub_ok = bool(np.all(lhs <= 1e-8 * (1 + abs(lam))))
        msg = (f"comparison fails at lam = {lam:.6g} >= lambda1+ = {lam1:.6g}: "
               f"phi1+ > 0 is a subsolution with zero boundary data "
               f"(max of F(phi)-lam*phi = {lhs.max():.3e})")
        return ComparisonReport(False, lam, lam1, 0, float(phi.max()),
                                phi if sub_ok else None, msg)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        f2 = rng.standard_normal(grid.size)
        f1 = f2 - np.abs(rng.standard_normal(grid.size))
        r1 = solve_bellman_dirichlet(op, grid, lam, f1)
        r2 = solve_bellman_dirichlet(op, grid, lam, f2)
        if not (r1.converged and r2.converged):
            return ComparisonReport(False, lam, lam1, trials, float("inf"), None,
                                    f"solver failed: {r1.status}/{r2.status}")
        viol = float(np.max(r1.u - r2.u)) / (1 + max(r1.norm, r2.norm))
        worst = max(worst, viol)
    holds = worst <= 1e-10
    return ComparisonReport(holds, lam, lam1, trials, worst, None,
                            "comparison holds" if holds else "ordering violated")


def abp_ratio(op: BellmanOperator, grid: Grid, lam: float, f, lambda1_plus: float,
              opts: SolveOptions | None = None) -> float:
    """``sup u+ / ((1 + 1/(lambda1+ - lam)) * ||f+||_{L^n})`` for the solution ``u``."""
    if not lam < lambda1_plus:
        raise ValueError("abp_ratio needs lam < lambda1_plus")
    f = grid.check(f, "forcing")
    res = solve_bellman_dirichlet(op, grid, lam, f, opts)
    if not res.converged:
        raise RuntimeError(f"Dirichlet solve failed with status {res.status}")
    sup_pos = float(np.max(res.u, initial=0.0))
    fnorm = lp_norm(grid, np.maximum(f, 0.0), grid.dim)
    if fnorm == 0.0:
        if sup_pos <= 1e-12 * (1 + res.norm):
            return 0.0
        raise ValueError("f+ vanishes but the solution has a positive part")
    return sup_pos / ((1 + 1 / (lambda1_plus - lam)) * fnorm)
