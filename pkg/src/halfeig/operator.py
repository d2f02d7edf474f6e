"""Bellman-form operators ``F(u) = inf_k L^k u`` and their monotone discretization.

Each member ``L u = -sum_d a_d u_dd + b . Du + c u`` is discretized with
central second differences and upwind first differences, so every assembled
row has nonpositive off-diagonal entries and row sum ``c``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from ._kernels import kernels
from .expr import Expr, ExprError, parse_expr
from .mesh import Grid

__all__ = [
    "BellmanOperator",
    "BindError",
    "ControlField",
    "EllipticityParams",
    "HypothesisReport",
    "LinearOperatorSpec",
    "check_hypotheses",
    "dual",
    "eval_bellman",
    "eval_linear",
    "example_4_2",
    "example_4_3",
    "linear_operator",
    "pucci_minus",
    "pucci_plus",
]


class BindError(ValueError):
    """Operator coefficients incompatible with a grid."""


@dataclass(frozen=True)
class EllipticityParams:
    gamma: float = 1.0
    Gamma: float = 1.0
    delta1: float = 0.0
    delta0: float = 0.0

    def __post_init__(self):
        if not 0 < self.gamma <= self.Gamma:
            raise ValueError(f"need 0 < gamma <= Gamma, got {self.gamma}, {self.Gamma}")
        if self.delta1 < 0 or self.delta0 < 0:
            raise ValueError("delta1 and delta0 must be nonnegative")


def _exprs(items, dim) -> tuple[Expr, ...]:
    if isinstance(items, (str, int, float, Expr)):
        items = [items] * dim
    return tuple(parse_expr(s) for s in items)


@dataclass(frozen=True)
class LinearOperatorSpec:
    """``L u = -sum_d a_d(x) d^2u/dx_d^2 + sum_d b_d(x) du/dx_d + c(x) u``."""

    a: tuple[Expr, ...]
    b: tuple[Expr, ...]
    c: Expr

    @property
    def dim(self) -> int:
        return len(self.a)

    def to_dict(self) -> dict:
        return {"a": [e.src for e in self.a], "b": [e.src for e in self.b], "c": self.c.src}


def linear_operator(a=1.0, b=0.0, c=0.0, dim: int = 1) -> LinearOperatorSpec:
    """Build a member from expression strings or numbers (scalars broadcast over axes)."""
    if not isinstance(a, (str, int, float, Expr)):
        dim = len(a)
    a_ = _exprs(a, dim)
    b_ = _exprs(b, len(a_))
    if len(b_) != len(a_):
        raise ValueError("drift must have one component per axis")
    return LinearOperatorSpec(a_, b_, parse_expr(c))


@dataclass(frozen=True)
class BellmanOperator:
    family: tuple[LinearOperatorSpec, ...]
    params: EllipticityParams
    mode: str = "inf"
    name: str = ""

    def __post_init__(self):
        if not self.family:
            raise ValueError("operator family must be nonempty")
        object.__setattr__(self, "family", tuple(self.family))
        if self.mode not in ("inf", "sup"):
            raise ValueError(f"mode must be 'inf' or 'sup', got {self.mode!r}")
        if len({m.dim for m in self.family}) != 1:
            raise ValueError("family members disagree on dimension")

    @property
    def dim(self) -> int:
        return self.family[0].dim

    @property
    def sign(self) -> float:
        return 1.0 if self.mode == "inf" else -1.0

    def shift_floor(self, grid: Grid) -> float:
        """A shift below which every policy matrix is a nonsingular M-matrix."""
        c_max = max(
            float(np.max(np.abs(m.c(*grid.coords[grid.interior_nodes].T))))
            for m in self.family
        )
        return -(self.params.delta0 + c_max)


@dataclass(frozen=True)
class ControlField:
    """Selected member per interior node, with ties flagged."""

    index: np.ndarray
    tie_mask: np.ndarray
    gap: np.ndarray = field(repr=False)


# ---------------------------------------------------------------- stencils


def _member_stencil(spec: LinearOperatorSpec, grid: Grid, check: bool, params) -> np.ndarray:
    if spec.dim != grid.dim:
        raise BindError(f"operator is {spec.dim}-D but grid is {grid.dim}-D")
    X = grid.coords.T
    closure = grid.in_closure
    nodes = grid.interior_nodes
    try:
        a = [np.broadcast_to(e(*X), (grid.size,)) for e in spec.a]
        b = [np.broadcast_to(e(*X), (grid.size,)) for e in spec.b]
        c = np.broadcast_to(spec.c(*X), (grid.size,))
    except ExprError as exc:
        raise BindError(str(exc)) from exc

    if check and params is not None:
        eps = 1e-12
        for d, ad in enumerate(a):
            vals = ad[closure]
            if vals.min() < params.gamma - eps or vals.max() > params.Gamma + eps:
                raise BindError(
                    f"a[{d}] = {spec.a[d]} leaves [gamma, Gamma] = "
                    f"[{params.gamma}, {params.Gamma}] (range {vals.min():.6g}..{vals.max():.6g})"
                )
        bnorm = np.sqrt(sum(bd[closure] ** 2 for bd in b))
        if bnorm.max() > params.delta1 * (1 + eps) + eps:
            raise BindError(f"|b| reaches {bnorm.max():.6g} > delta1 = {params.delta1}")
        if np.abs(c[closure]).max() > params.delta0 * (1 + eps) + eps:
            raise BindError(f"|c| reaches {np.abs(c[closure]).max():.6g} > delta0 = {params.delta0}")

    ni = len(nodes)
    coef = np.zeros((ni, 1 + 2 * grid.dim))
    coef[:, 0] = c[nodes]
    for d, hd in enumerate(grid.spacing):
        ad, bd = a[d][nodes], b[d][nodes]
        bp, bm = np.maximum(bd, 0.0), np.maximum(-bd, 0.0)
        coef[:, 0] += 2 * ad / hd**2 + (bp + bm) / hd
        coef[:, 1 + 2 * d] = -ad / hd**2 - bp / hd
        coef[:, 2 + 2 * d] = -ad / hd**2 - bm / hd
    return coef


@lru_cache(maxsize=64)
def _bind(family: tuple, params, grid: Grid, check: bool) -> np.ndarray:
    if check and params is not None:
        # upwinding keeps the scheme monotone regardless; this bound mirrors
        # the stated grid admissibility condition
        if grid.h * params.delta1 > 2 * params.gamma + 1e-12:
            raise BindError(
                f"grid too coarse: h*delta1 = {grid.h * params.delta1:.4g} > 2*gamma"
            )
    coef = np.stack([_member_stencil(m, grid, check, params) for m in family])
    coef.setflags(write=False)
    return coef


def stencils(op: BellmanOperator, grid: Grid, check: bool = True) -> np.ndarray:
    """Member stencil coefficients, shape (members, n_interior, 1 + 2*dim)."""
    return _bind(op.family, op.params, grid, check)


def member_values(op: BellmanOperator, grid: Grid, u, check: bool = True) -> np.ndarray:
    """Every member's action on ``u`` at interior nodes, shape (members, n_interior)."""
    u = grid.check(u)
    return kernels.apply(stencils(op, grid, check), grid.neighbors, grid.interior_nodes, u)


def _scatter(grid: Grid, interior_vals: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.size)
    out[grid.interior_nodes] = interior_vals
    return out


def eval_linear(spec: LinearOperatorSpec, grid: Grid, u) -> np.ndarray:
    """Apply one linear member; boundary entries of the result are 0."""
    u = grid.check(u)
    coef = _bind((spec,), None, grid, False)
    vals = kernels.apply(coef, grid.neighbors, grid.interior_nodes, u)[0]
    return _scatter(grid, vals)


def default_tie_tol(values: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(values), initial=0.0)))


def eval_bellman(op: BellmanOperator, grid: Grid, u, tie_tol: float | None = None,
                 check: bool = True):
    """Pointwise inf (or sup) over the family.

    Returns the full-length value array (0 on boundary nodes) and the
    :class:`ControlField` of first achieving members.
    """
    vals = member_values(op, grid, u, check)
    best, idx, gap = kernels.reduce(vals, op.sign)
    tol = default_tie_tol(best) if tie_tol is None else tie_tol
    control = ControlField(idx, gap <= tol, gap)
    return _scatter(grid, best), control


def dual(op: BellmanOperator) -> BellmanOperator:
    """The reflected operator ``u -> -F(-u)``: same family, inf and sup exchanged."""
    mode = "sup" if op.mode == "inf" else "inf"
    name = op.name[5:-1] if op.name.startswith("dual(") else (f"dual({op.name})" if op.name else "")
    return replace(op, mode=mode, name=name)


# ---------------------------------------------------------------- built-ins


def _diag_family(params: EllipticityParams, dim: int):
    from itertools import product

    return tuple(
        linear_operator(a=list(combo), b=0.0, c=0.0, dim=dim)
        for combo in product((params.gamma, params.Gamma), repeat=dim)
    )


def pucci_minus(params: EllipticityParams, dim: int = 1) -> BellmanOperator:
    """Lower Pucci operator.

    Exact in 1-D; in 2-D the inf runs over axis-aligned diagonal matrices only,
    which is exact for Hessians diagonal in the grid axes and an upper bound
    for the true operator otherwise.
    """
    return BellmanOperator(_diag_family(params, dim), params, "inf",
                           f"pucci_minus({params.gamma:g},{params.Gamma:g})")


def pucci_plus(params: EllipticityParams, dim: int = 1) -> BellmanOperator:
    return dual(pucci_minus(params, dim))


def example_4_3(dim: int = 1) -> BellmanOperator:
    """``min{-Laplacian, -2 Laplacian}``."""
    params = EllipticityParams(1.0, 2.0, 0.0, 0.0)
    fam = (linear_operator(1.0, 0.0, 0.0, dim), linear_operator(2.0, 0.0, 0.0, dim))
    return BellmanOperator(fam, params, "inf", "example_4_3")


EXAMPLE_4_2_DRIFT = ("-x*y", "x^2")


def example_4_2(drift=EXAMPLE_4_2_DRIFT) -> BellmanOperator:
    """``min{-Lap u, -Lap u + b.Du} - |u|`` on the unit disk.

    The default drift is tangential (``x.b = 0``) with ``div b = -y``.
    ``-|u|`` is written as ``min{-u, +u}`` so the family stays inf-of-linear.
    """
    params = EllipticityParams(1.0, 1.0, 1.0, 1.0)
    fam = (
        linear_operator(1.0, 0.0, -1.0, 2),
        linear_operator(1.0, 0.0, 1.0, 2),
        linear_operator(1.0, list(drift), -1.0, 2),
        linear_operator(1.0, list(drift), 1.0, 2),
    )
    return BellmanOperator(fam, params, "inf", "example_4_2")


# ---------------------------------------------------------------- hypotheses


@dataclass
class HypothesisReport:
    passed: bool
    trials: int
    homogeneity: float
    superadditivity: float
    sandwich: float
    failures: list[str]
    worst_node: int | None = None

    def __str__(self):
        state = "PASS" if self.passed else "FAIL"
        return (f"[{state}] homogeneity {self.homogeneity:.2e}, superadditivity "
                f"{self.superadditivity:.2e}, sandwich {self.sandwich:.2e}")


def _second_differences(grid: Grid, w: np.ndarray) -> np.ndarray:
    nodes, nbr = grid.interior_nodes, grid.neighbors
    return np.stack([
        (w[nbr[:, 2 * d]] - 2 * w[nodes] + w[nbr[:, 2 * d + 1]]) / hd**2
        for d, hd in enumerate(grid.spacing)
    ])


def upwind_gradient_norm(grid: Grid, w: np.ndarray) -> np.ndarray:
    """``sqrt(sum_d max(|D+_d w|, |D-_d w|)^2)``; bounds any upwind ``|b.Dw| / |b|``."""
    nodes, nbr = grid.interior_nodes, grid.neighbors
    sq = 0.0
    for d, hd in enumerate(grid.spacing):
        fwd = np.abs(w[nbr[:, 2 * d + 1]] - w[nodes]) / hd
        bwd = np.abs(w[nodes] - w[nbr[:, 2 * d]]) / hd
        sq = sq + np.maximum(fwd, bwd) ** 2
    return np.sqrt(sq)


def discrete_pucci(grid: Grid, w: np.ndarray, params: EllipticityParams, upper: bool):
    """Same-stencil Pucci surrogate at interior nodes."""
    d2 = _second_differences(grid, w)
    lo, hi = -params.gamma * d2, -params.Gamma * d2
    part = np.maximum(lo, hi) if upper else np.minimum(lo, hi)
    return part.sum(axis=0)


def check_hypotheses(op: BellmanOperator, grid: Grid, trials: int = 100, seed: int = 0,
                     tol: float = 1e-11) -> HypothesisReport:
    """Randomized discrete checks of homogeneity, super/subadditivity and the
    Pucci sandwich with the declared ``delta1``/``delta0``.

    Coefficient bounds are not enforced at bind time here, so an operator whose
    declared constants are too small is reported rather than rejected.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    nodes = grid.interior_nodes
    p = op.params

    def F(u):
        return member_values_reduced(op, grid, u)

    worst = {"homogeneity": 0.0, "superadditivity": 0.0, "sandwich": 0.0}
    failures: list[str] = []
    worst_node = None
    for trial in range(trials):
        u = rng.standard_normal(grid.size)
        v = rng.standard_normal(grid.size)
        t = rng.uniform(0.0, 5.0)
        Fu, Fv = F(u), F(v)
        scale = 1.0 + max(np.abs(Fu).max(), np.abs(Fv).max())

        err = np.abs(F(t * u) - t * Fu) / (scale * (1 + t))
        worst["homogeneity"] = max(worst["homogeneity"], float(err.max()))
        if err.max() > tol:
            failures.append(f"trial {trial}: homogeneity off by {err.max():.3e} at node "
                            f"{int(nodes[err.argmax()])}")

        gap = op.sign * (F(u + v) - Fu - Fv)  # >= 0 for inf, <= 0 flipped for sup
        viol = np.maximum(-gap, 0.0) / scale
        worst["superadditivity"] = max(worst["superadditivity"], float(viol.max()))
        if viol.max() > tol:
            failures.append(f"trial {trial}: {'super' if op.mode == 'inf' else 'sub'}additivity "
                            f"violated by {viol.max():.3e} at node {int(nodes[viol.argmax()])}")

        w = u - v
        slack = p.delta1 * upwind_gradient_norm(grid, w) + p.delta0 * np.abs(w[nodes])
        lower = discrete_pucci(grid, w, p, upper=False) - slack
        upper = discrete_pucci(grid, w, p, upper=True) + slack
        diff = Fu - Fv
        sscale = scale + np.abs(upper).max() + np.abs(lower).max()
        viol = np.maximum(lower - diff, diff - upper) / sscale
        worst["sandwich"] = max(worst["sandwich"], float(viol.max()))
        if viol.max() > tol:
            node = int(nodes[viol.argmax()])
            worst_node = node if worst_node is None else worst_node
            failures.append(f"trial {trial}: Pucci sandwich violated by {viol.max():.3e} "
                            f"at node {node} (x = {grid.coords[node].tolist()})")
    return HypothesisReport(not failures, trials, worst["homogeneity"],
                            worst["superadditivity"], worst["sandwich"], failures, worst_node)


def member_values_reduced(op: BellmanOperator, grid: Grid, u, check: bool = False) -> np.ndarray:
    """Interior values of the operator without tie bookkeeping."""
    vals = member_values(op, grid, u, check)
    return kernels.reduce(vals, op.sign)[0]
