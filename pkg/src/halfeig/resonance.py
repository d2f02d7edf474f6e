"""The Dirichlet problem at the positive half-eigenvalue and the threshold ``t*(h)``.

Solvability is decided by the sign of ``T(f) = max_mu integral(f phi_star)``
and then witnessed by continuation ``lam -> lambda1_plus`` from below:
bounded continuation norms for ``T < 0`` and ``(lambda1_plus - lam)|u| -> T``
for ``T > 0``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .adjoint import MeasureSet, solvability_functional
from .dirichlet import SolveOptions, solve_bellman_dirichlet
from .eigen import EigenResult, principal_half_eigen_minus
from .mesh import Grid, sup_norm
from .operator import BellmanOperator, eval_bellman, stencils

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps

SOLVABLE = "solvable_strict"
UNSOLVABLE = "unsolvable"
BORDERLINE = "borderline"
ABSTAINED = "abstained"


@dataclass(frozen=True)
class ResonanceOptions:
    class_tol: float | None = None  # default 1e-4 * (1 + |f|_inf)
    gap_tol: float = 1e-3
    steps: int = 12
    max_steps: int = 60
    ratio: float = 0.5
    cont_tol: float = 1e-6
    res_tol: float = 1e-6
    blowup_threshold: float = 1e8
    solve: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise ValueError("continuation ratio must lie in (0, 1)")
        if self.steps < 2 or self.max_steps < self.steps:
            raise ValueError("need 2 <= steps <= max_steps")


@dataclass
class ContinuationStep:
    lam: float
    norm: float
    status: str

    @property
    def row(self):
        return (self.lam, self.norm)


@dataclass
class ResonanceVerdict:
    classification: str
    T_value: float
    solution: np.ndarray | None
    continuation_log: list[ContinuationStep]
    residual: float = float("nan")
    class_tol: float = float("nan")
    gap: float = float("nan")
    lambda1: float = float("nan")
    outcome: str = ""  # converged | diverged | exhausted | failed | skipped
    message: str = ""

    @property
    def k_estimates(self) -> np.ndarray:
        """``(lambda1_plus - lam) * |u|`` along the log; tends to ``max(T, 0)``."""
        return np.array([(self.lambda1 - s.lam) * s.norm for s in self.continuation_log])


def _richardson(d1, u1, d2, u2):
    # linear extrapolation of u(d) to d = 0 through (d1, u1), (d2, u2)
    return (d1 * u2 - d2 * u1) / (d1 - d2)


def resonance_residual(op: BellmanOperator, grid: Grid, u, lam: float, f) -> float:
    Fu, _ = eval_bellman(op, grid, u)
    nodes = grid.interior_nodes
    return sup_norm(Fu[nodes] - lam * u[nodes] - f[nodes])


def _continuation(op, grid, f, lam1, delta0, opts: ResonanceOptions, want_solution: bool):
    """Dyadic continuation toward ``lam1``.

    Returns ``(log, outcome, solution, residual)``.  The run stops once the
    Richardson limit is Cauchy and residual-certified, once the norm exceeds
    the blow-up threshold, or at the shift floor set by rounding.
    """
    sopts = replace(opts.solve, blowup_threshold=opts.blowup_threshold)
    # shifts below the rounding unit of the largest diagonal entry are invisible
    d_floor = 2 * EPS * max(1 + abs(lam1), float(np.abs(stencils(op, grid)[..., 0]).max()))
    res_tol = opts.res_tol * (1 + sup_norm(f))
    steps: list[ContinuationStep] = []
    prev = None  # (d, u) of the previous step
    prev_ext = None
    control = None
    best = (None, np.inf)
    for j in range(opts.max_steps):
        d = delta0 * opts.ratio**j
        if d < d_floor:
            return steps, "exhausted", best[0], best[1]
        lam = lam1 - d
        r = solve_bellman_dirichlet(op, grid, lam, f, sopts, control0=control)
        steps.append(ContinuationStep(lam, r.norm, r.status))
        if r.status == "blowup":
            return steps, "diverged", None, np.inf
        if not r.converged:
            return steps, "failed", best[0], best[1]
        control = r.control
        if prev is not None and want_solution:
            ext = _richardson(prev[0], prev[1], d, r.u)
            res = resonance_residual(op, grid, ext, lam1, f)
            # a Howard solve at lam1 itself, seeded by the current policy
            polish = solve_bellman_dirichlet(op, grid, lam1, f, sopts, control0=control)
            if polish.converged:
                pres = resonance_residual(op, grid, polish.u, lam1, f)
                if pres < res and sup_norm(polish.u - ext) <= 1e-3 * (1 + sup_norm(ext)):
                    ext, res = polish.u, pres
            if res < best[1]:
                best = (ext, res)
            scale = 1 + sup_norm(ext)
            cauchy = prev_ext is not None and sup_norm(ext - prev_ext) <= opts.cont_tol * scale
            if j + 1 >= opts.steps and cauchy and res <= res_tol:
                return steps, "converged", ext, res
            prev_ext = ext
        prev = (d, r.u)
        if not want_solution and j + 1 >= opts.steps:
            return steps, "exhausted", None, np.inf
    return steps, "exhausted", best[0], best[1]


def solve_at_resonance(op: BellmanOperator, grid: Grid, f, eig: EigenResult, ms: MeasureSet,
                       opts: ResonanceOptions | None = None,
                       eig_minus: EigenResult | None = None,
                       delta0: float | None = None) -> ResonanceVerdict:
    """Classify and, when possible, solve ``F(u) = lambda1_plus*u + f`` with zero boundary data."""
    opts = opts or ResonanceOptions()
    f = grid.check(f, "forcing")
    f = np.where(grid.interior, f, 0.0)
    lam1 = eig.lam
    T = solvability_functional(f, ms, grid)
    class_tol = 1e-4 * (1 + sup_norm(f)) if opts.class_tol is None else opts.class_tol
    if eig_minus is None:
        eig_minus = principal_half_eigen_minus(op, grid)
    gap = eig_minus.lam - lam1

    if gap <= opts.gap_tol:
        msg = (f"lambda1- - lambda1+ = {gap:.3e} <= gap_tol; sufficiency not testable, "
               f"reporting T = {T:.6g} only")
        return ResonanceVerdict(ABSTAINED, T, None, [], class_tol=class_tol, gap=gap,
                                lambda1=lam1, outcome="skipped", message=msg)

    if T < -class_tol:
        cls = SOLVABLE
    elif T > class_tol:
        cls = UNSOLVABLE
    else:
        cls = BORDERLINE
    d0 = min(1.0, gap / 2) if delta0 is None else delta0
    steps, outcome, u, res = _continuation(op, grid, f, lam1, d0, opts,
                                           want_solution=cls != UNSOLVABLE)
    verdict = ResonanceVerdict(cls, T, None, steps, class_tol=class_tol, gap=gap,
                               lambda1=lam1, outcome=outcome)
    if u is not None and res <= opts.res_tol * (1 + sup_norm(f)):
        verdict.solution, verdict.residual = u, res
    if cls == SOLVABLE:
        verdict.message = (f"T = {T:.6g} < 0: continuation {outcome}"
                           + (f", residual {res:.2e}" if verdict.solution is not None else
                              ", no residual-certified limit"))
    elif cls == UNSOLVABLE:
        k = verdict.k_estimates
        verdict.message = (f"T = {T:.6g} > 0: (lambda1+ - lam)|u| along the continuation "
                           f"ends at {k[-1]:.6g}" if len(k) else f"T = {T:.6g} > 0")
    else:
        norms = [s.norm for s in steps if np.isfinite(s.norm)]
        k = verdict.k_estimates
        verdict.message = (f"|T| = {abs(T):.2e} within class_tol {class_tol:.1e}: continuation "
                           f"{outcome} after {len(steps)} steps, max |u| "
                           f"{max(norms, default=np.nan):.3e}, last (lambda1+ - lam)|u| "
                           f"{k[-1] if len(k) else np.nan:.3e}")
    log.info(verdict.message)
    return verdict


def solution_difference(u1: np.ndarray, u2: np.ndarray, phi1: np.ndarray):
    """Least-squares ``c`` with ``u1 - u2 ~ c*phi1`` and the relative sup-norm remainder."""
    d = u1 - u2
    c = float(d @ phi1 / (phi1 @ phi1))
    rel = sup_norm(d - c * phi1) / (1 + max(sup_norm(u1), sup_norm(u2)))
    return c, rel


# ---------------------------------------------------------------- threshold


@dataclass
class TStarResult:
    t_star: float
    bisection: float
    agrees: bool
    bisect_tol: float
    probes: list[tuple[float, bool, float]] = field(default_factory=list)  # (t, solvable, k)
    monotone: bool | None = None
    grid_t: list[float] = field(default_factory=list)
    grid_solvable: list[bool] = field(default_factory=list)


def classify_by_continuation(op: BellmanOperator, grid: Grid, f, lam1: float, delta0: float,
                             opts: ResonanceOptions | None = None,
                             k_tol: float | None = None):
    """Decide solvability at ``lam1`` from continuation boundedness alone.

    ``k(d) = d*|u_d|`` is extrapolated to ``d = 0``; a limit above ``k_tol``
    means the norms grow like ``1/d``.  Returns ``(solvable, k_limit)``.
    """
    opts = opts or ResonanceOptions()
    f = grid.check(f, "forcing")
    k_tol = 1e-3 * (1 + sup_norm(f)) if k_tol is None else k_tol
    steps, outcome, _, _ = _continuation(op, grid, f, lam1, delta0, opts, want_solution=False)
    if outcome == "diverged":
        return False, float("inf")
    if outcome == "failed" or len(steps) < 2:
        raise RuntimeError(f"continuation failed after {len(steps)} steps")
    ds = lam1 - np.array([s.lam for s in steps])
    ks = ds * np.array([s.norm for s in steps])
    k0 = float(_richardson(ds[-2], ks[-2], ds[-1], ks[-1]))
    return k0 <= k_tol, k0


def t_star(op: BellmanOperator, grid: Grid, h, eig: EigenResult, ms: MeasureSet,
           opts: ResonanceOptions | None = None, eig_minus: EigenResult | None = None,
           bisect_tol: float = 3e-2, monotone_points: int = 7,
           monotone_step: float = 0.1) -> TStarResult:
    """Threshold of ``f_t = h - t*phi1_plus``: solvable at resonance for ``t > t*``.

    The value comes from the solvability functional; a bisection driven only
    by continuation boundedness cross-checks it, and classification is probed
    on ``monotone_points`` values of ``t`` spaced ``monotone_step`` around it.
    """
    opts = opts or ResonanceOptions()
    h = grid.check(h, "h")
    h = np.where(grid.interior, h, 0.0)
    ts = solvability_functional(h, ms, grid)
    if eig_minus is None:
        eig_minus = principal_half_eigen_minus(op, grid)
    d0 = min(1.0, (eig_minus.lam - eig.lam) / 2)
    probes = []

    def solvable(t):
        ok, k = classify_by_continuation(op, grid, h - t * eig.phi, eig.lam, d0, opts)
        probes.append((float(t), ok, k))
        return ok

    lo, hi = ts - 1.0, ts + 1.0
    if solvable(lo) or not solvable(hi):
        b = float("nan")
    else:
        while hi - lo > bisect_tol / 8:
            mid = 0.5 * (lo + hi)
            if solvable(mid):
                hi = mid
            else:
                lo = mid
        b = 0.5 * (lo + hi)
    result = TStarResult(ts, b, bool(abs(b - ts) <= bisect_tol), bisect_tol, probes)

    if monotone_points:
        half = monotone_points // 2
        grid_t = [ts + monotone_step * (i - half) for i in range(monotone_points)]
        flags = [solvable(t) for t in grid_t]
        # unsolvable below, solvable above: at most one switch, from False to True
        result.monotone = all(not a or b_ for a, b_ in zip(flags, flags[1:]))
        result.grid_t, result.grid_solvable = grid_t, flags
    return result
