"""Domains, uniform tensor grids and nodal quadrature.

Grid functions are plain 1-D float arrays indexed by the flattened node
number of a :class:`Grid` (C order, x-index outermost).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    kind: str
    bounds: tuple[float, ...]
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind == "interval":
            a, b = self.bounds
            if not a < b:
                raise GridError(f"degenerate interval ({a}, {b})")
        elif self.kind == "rectangle":
            ax, bx, ay, by = self.bounds
            if not (ax < bx and ay < by):
                raise GridError(f"degenerate rectangle {self.bounds}")
        elif self.kind == "disk":
            (radius,) = self.bounds
            if not radius > 0:
                raise GridError(f"disk radius must be positive, got {radius}")
        else:
            raise GridError(f"unknown domain kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def measure(self) -> float:
        if self.kind == "interval":
            a, b = self.bounds
            return b - a
        if self.kind == "rectangle":
            ax, bx, ay, by = self.bounds
            return (bx - ax) * (by - ay)
        return float(np.pi * self.bounds[0] ** 2)

    def to_dict(self) -> dict:
        if self.kind == "interval":
            return {"kind": "interval", "a": self.bounds[0], "b": self.bounds[1]}
        if self.kind == "rectangle":
            ax, bx, ay, by = self.bounds
            return {"kind": "rectangle", "ax": ax, "bx": bx, "ay": ay, "by": by}
        return {"kind": "disk", "radius": self.bounds[0], "center": list(self.center)}


def interval(a: float, b: float) -> Domain:
    return Domain("interval", (float(a), float(b)))


def rectangle(ax: float, bx: float, ay: float, by: float) -> Domain:
    return Domain("rectangle", (float(ax), float(bx), float(ay), float(by)))


def disk(radius: float = 1.0, center: tuple[float, float] = (0.0, 0.0)) -> Domain:
    return Domain("disk", (float(radius),), (float(center[0]), float(center[1])))


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid over a domain.

    Disk domains live on the bounding square; a node is interior iff its
    distance to the center is below ``R - h/2``.  Everything else (including
    nodes outside the disk) is a boundary node carrying the Dirichlet value.
    """

    domain: Domain
    n: int
    axes: tuple[np.ndarray, ...]
    spacing: tuple[float, ...]
    interior: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def h(self) -> float:
        return max(self.spacing)

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape (size, dim)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.interior)

    @property
    def n_interior(self) -> int:
        return len(self.interior_nodes)

    @cached_property
    def position(self) -> np.ndarray:
        """Map node -> row in interior-only systems (-1 for boundary)."""
        pos = np.full(self.size, -1, dtype=np.int64)
        pos[self.interior_nodes] = np.arange(self.n_interior)
        return pos

    @cached_property
    def neighbors(self) -> np.ndarray:
        """Stencil neighbors of interior nodes, shape (n_interior, 2*dim).

        Column ``2d`` is the node at ``-e_d``, column ``2d+1`` at ``+e_d``.
        """
        strides = np.cumprod((1,) + self.shape[::-1])[:-1][::-1]
        nodes = self.interior_nodes
        cols = []
        for d in range(self.dim):
            cols.append(nodes - strides[d])
            cols.append(nodes + strides[d])
        return np.stack(cols, axis=1).astype(np.int64)

    @cached_property
    def in_closure(self) -> np.ndarray:
        """Nodes lying in the closed domain (where coefficients must be valid)."""
        if self.domain.kind != "disk":
            return np.ones(self.size, dtype=bool)
        r = np.hypot(*(self.coords - np.asarray(self.domain.center)).T)
        return r <= self.domain.bounds[0] * (1 + 1e-12)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(*coords)`` at every node."""
        vals = func(*self.coords.T)
        return np.broadcast_to(np.asarray(vals, dtype=float), (self.size,)).copy()

    def interior_indicator(self) -> np.ndarray:
        return self.interior.astype(float)

    def check(self, f: np.ndarray, name: str = "grid function") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.size,):
            raise GridError(f"{name} has shape {f.shape}, grid has {self.size} nodes")
        return f


def _trapezoid_weights(m: int, h: float) -> np.ndarray:
    w = np.full(m, h)
    w[[0, -1]] = h / 2
    return w


def build_grid(domain: Domain, n: int) -> Grid:
    if int(n) != n or n < 4:
        raise GridError(f"need at least 4 nodes per axis, got {n}")
    n = int(n)
    if domain.kind == "interval":
        a, b = domain.bounds
        x = np.linspace(a, b, n)
        h = (b - a) / (n - 1)
        interior = np.ones(n, dtype=bool)
        interior[[0, -1]] = False
        return Grid(domain, n, (x,), (h,), interior, _trapezoid_weights(n, h))

    if domain.kind == "rectangle":
        ax, bx, ay, by = domain.bounds
        x, y = np.linspace(ax, bx, n), np.linspace(ay, by, n)
        hx, hy = (bx - ax) / (n - 1), (by - ay) / (n - 1)
        mask = np.zeros((n, n), dtype=bool)
        mask[1:-1, 1:-1] = True
        w = np.outer(_trapezoid_weights(n, hx), _trapezoid_weights(n, hy))
        return Grid(domain, n, (x, y), (hx, hy), mask.ravel(), w.ravel())

    radius = domain.bounds[0]
    cx, cy = domain.center
    x = np.linspace(cx - radius, cx + radius, n)
    y = np.linspace(cy - radius, cy + radius, n)
    h = 2 * radius / (n - 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    interior = (np.hypot(X - cx, Y - cy) < radius - h / 2).ravel()
    weights = np.where(interior, h * h, 0.0)
    return Grid(domain, n, (x, y), (h, h), interior, weights)


def integrate(grid: Grid, f: np.ndarray) -> float:
    f = grid.check(f)
    return float(np.dot(grid.weights, f))


def sup_norm(f: np.ndarray) -> float:
    f = np.asarray(f, dtype=float)
    return float(np.max(np.abs(f))) if f.size else 0.0


def lp_norm(grid: Grid, f: np.ndarray, p: float) -> float:
    """Quadrature L^p norm ``(sum w |f|^p)^(1/p)``."""
    f = grid.check(f)
    return float(np.dot(grid.weights, np.abs(f) ** p) ** (1.0 / p))
