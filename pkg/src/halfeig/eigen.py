"""Principal half-eigenpairs by nonlinear inverse iteration, and the blow-up cross-check."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dirichlet import SolveOptions, solve_bellman_dirichlet
from .mesh import Grid, sup_norm
from .operator import BellmanOperator, dual, member_values_reduced

log = logging.getLogger(__name__)


class EigenError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenOptions:
    max_iters: int = 300
    lambda_tol: float = 1e-9
    residual_tol: float = 1e-8
    min_margin: float = 0.1
    rel_margin: float = 0.05
    max_retries: int = 5
    polish_iters: int = 10
    solve: SolveOptions = field(default_factory=SolveOptions)


@dataclass
class EigenResult:
    lam: float
    phi: np.ndarray
    residual: float
    method: str
    iters: int
    branch: str = "plus"
    control: np.ndarray | None = field(default=None, repr=False)
    history: list[float] = field(default_factory=list, repr=False)


@dataclass
class BlowupFit:
    lambdas: np.ndarray
    inv_norms: np.ndarray
    lambda1_est: float
    k_est: float
    statuses: list[str] = field(default_factory=list)


def eigen_residual(op: BellmanOperator, grid: Grid, phi: np.ndarray, lam: float) -> float:
    Fphi = member_values_reduced(op, grid, phi, check=True)
    return sup_norm(Fphi - lam * phi[grid.interior_nodes])


def principal_half_eigen_plus(op: BellmanOperator, grid: Grid,
                              opts: EigenOptions | None = None) -> EigenResult:
    """Positive principal half-eigenpair.

    Iterates ``(F - sigma) u_{j+1} = u_j / |u_j|_inf`` with the adaptive shift
    ``sigma = lam_j - max(min_margin, rel_margin*|lam_j|)`` where
    ``lam_j = sigma + 1/|u_{j+1}|_inf``.
    """
    opts = opts or EigenOptions()
    nodes = grid.interior_nodes
    sigma = op.shift_floor(grid)
    v = grid.interior_indicator()
    control = None
    lam_prev = None
    history: list[float] = []
    retries = 0
    polish = 0
    best_resid = np.inf

    def margin(lam):
        return max(opts.min_margin, opts.rel_margin * abs(lam))

    j = 0
    while j < opts.max_iters:
        res = solve_bellman_dirichlet(op, grid, sigma, v, opts.solve, control0=control)
        if not res.converged or res.u.min() < -1e-12 * res.norm:
            if retries >= opts.max_retries:
                raise EigenError(f"inner solve failed ({res.status}) at shift {sigma:.6g}")
            retries += 1
            ref = sigma if lam_prev is None else lam_prev
            sigma = min(sigma, ref) - margin(ref) * 2**retries
            log.debug("inner solve %s; retry %d with shift %.6g", res.status, retries, sigma)
            control = None
            continue
        j += 1
        w = res.u
        wn = sup_norm(w)
        lam = sigma + 1.0 / wn
        phi = w / wn
        history.append(lam)
        resid = eigen_residual(op, grid, phi, lam)
        settled = (lam_prev is not None
                   and abs(lam - lam_prev) <= opts.lambda_tol * (1 + abs(lam))
                   and resid <= opts.residual_tol * (1 + abs(lam)))
        if settled and polish < opts.polish_iters and resid < 0.5 * best_resid:
            # keep going while the residual still drops toward the roundoff floor
            polish += 1
            settled = False
        best_resid = min(best_resid, resid)
        if settled:
            phi[~grid.interior] = 0.0
            if np.any(phi[nodes] <= 0):
                raise EigenError("eigenfunction is not positive at interior nodes")
            return EigenResult(lam, phi, resid, "inverse_iteration", j, "plus",
                               res.control, history)
        lam_prev = lam
        v = phi
        control = res.control
        sigma = lam - margin(lam)
    raise EigenError(f"inverse iteration did not converge in {opts.max_iters} iterations "
                     f"(last estimate {history[-1] if history else float('nan'):.10g})")


def principal_half_eigen_minus(op: BellmanOperator, grid: Grid,
                               opts: EigenOptions | None = None) -> EigenResult:
    """Negative principal half-eigenpair, via the positive pair of the reflected operator."""
    r = principal_half_eigen_plus(dual(op), grid, opts)
    phi = -r.phi
    resid = eigen_residual(op, grid, phi, r.lam)
    return EigenResult(r.lam, phi, resid, r.method, r.iters, "minus", r.control, r.history)


def blowup_estimate(op: BellmanOperator, grid: Grid, f, lambda_schedule, m: int = 4,
                    opts: SolveOptions | None = None) -> BlowupFit:
    """Fit ``1/|phi^{lam,f}|_inf`` linearly in ``lam`` over the last ``m`` converged points.

    The root of the fit estimates the positive half-eigenvalue of ``op`` and
    ``-1/slope`` the limit of ``(lambda1 - lam) * |phi^{lam,f}|_inf``.
    """
    f = grid.check(f, "forcing")
    if f.min() < 0 or not np.any(f[grid.interior_nodes] > 0):
        raise ValueError("blowup_estimate needs f >= 0 and not identically zero")
    lams = np.asarray(lambda_schedule, dtype=float)
    if np.any(np.diff(lams) <= 0):
        raise ValueError("lambda schedule must be strictly increasing")

    # warm start from a shift where every policy is monotone
    warm = solve_bellman_dirichlet(op, grid, op.shift_floor(grid), f, opts)
    control = warm.control
    used, inv, statuses = [], [], []
    for lam in lams:
        r = solve_bellman_dirichlet(op, grid, lam, f, opts, control0=control)
        statuses.append(r.status)
        if not r.converged or r.u.min() < -1e-12 * r.norm:
            break
        used.append(lam)
        inv.append(1.0 / r.norm)
        control = r.control
    if len(used) < m:
        raise RuntimeError(f"only {len(used)} schedule points converged; need {m}")
    x, y = np.array(used), np.array(inv)
    slope, intercept = np.polyfit(x[-m:], y[-m:], 1)
    return BlowupFit(x, y, float(-intercept / slope), float(-1.0 / slope), statuses)
