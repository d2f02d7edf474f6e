import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halfeig.mesh import (GridError, build_grid, disk, integrate, interval, lp_norm,
                          rectangle, sup_norm)


def test_interval_grid_layout():
    g = build_grid(interval(0, 1), 5)
    assert g.h == 0.25
    assert list(g.interior_nodes) == [1, 2, 3]
    assert list(g.boundary_nodes) == [0, 4]
    assert g.weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_rectangle_weights_sum_to_area():
    g = build_grid(rectangle(0, 2, -1, 0.5), 17)
    assert g.weights.sum() == pytest.approx(3.0, rel=1e-14)
    assert g.n_interior == 15 * 15


def test_disk_area_and_interior_rule():
    g = build_grid(disk(1.0), 41)
    assert abs(g.weights.sum() - math.pi) <= 0.2
    r = np.hypot(*g.coords.T)
    assert np.all(r[g.interior_nodes] < 1 - g.h / 2)
    assert np.all(g.weights[g.boundary_nodes] == 0)
    # every interior stencil neighbour exists on the grid
    assert g.neighbors.min() >= 0 and g.neighbors.max() < g.size


def test_disk_with_offset_center():
    g = build_grid(disk(0.5, (1.0, -2.0)), 31)
    c = g.coords[g.interior_nodes]
    assert np.allclose(c.mean(axis=0), [1.0, -2.0], atol=1e-12)


@pytest.mark.parametrize("make", [lambda: interval(1, 1), lambda: interval(2, 0),
                                  lambda: rectangle(0, 1, 1, 1), lambda: disk(0.0),
                                  lambda: disk(-1.0)])
def test_degenerate_domains_rejected(make):
    with pytest.raises(GridError):
        make()


def test_too_few_nodes_rejected():
    with pytest.raises(GridError):
        build_grid(interval(0, 1), 3)


def test_integrate_examples():
    g101 = build_grid(interval(0, 1), 101)
    assert integrate(g101, np.ones(g101.size)) == pytest.approx(1.0, abs=1e-14)
    g = build_grid(interval(0, 1), 401)
    x = g.coords[:, 0]
    assert abs(integrate(g, np.sin(np.pi * x)) - 2 / np.pi) < 1e-4
    assert abs(integrate(g, np.sin(np.pi * x) * np.sin(2 * np.pi * x))) < 1e-6


def test_integrate_rejects_foreign_function():
    g = build_grid(interval(0, 1), 11)
    with pytest.raises(GridError):
        integrate(g, np.ones(12))


def test_sup_norm_examples():
    g = build_grid(interval(0, 1), 201)
    x = g.coords[:, 0]
    assert abs(sup_norm(np.sin(np.pi * x)) - 1.0) < 1e-4
    assert sup_norm(np.zeros(5)) == 0.0
    assert sup_norm(x - 1) == 1.0


def test_lp_norm_of_constant():
    g = build_grid(rectangle(0, 2, 0, 2), 9)
    assert lp_norm(g, np.full(g.size, 3.0), 2) == pytest.approx(3.0 * 2.0)


def test_integration_converges_at_second_order():
    errs = []
    for n in (51, 101, 201):
        g = build_grid(interval(0, 1), n)
        errs.append(abs(integrate(g, np.sin(np.pi * g.coords[:, 0])) - 2 / np.pi))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 2**32 - 1))
def test_integrate_is_linear(a, b, seed):
    g = build_grid(rectangle(0, 1, 0, 1), 12)
    r = np.random.default_rng(seed)
    f, h = r.standard_normal(g.size), r.standard_normal(g.size)
    lhs = integrate(g, a * f + b * h)
    rhs = a * integrate(g, f) + b * integrate(g, h)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(a) + abs(b)) * 10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["interval", "disk"]))
def test_integral_of_nonnegative_is_nonnegative(seed, kind):
    g = build_grid(interval(0, 1) if kind == "interval" else disk(1.0), 15)
    f = np.abs(np.random.default_rng(seed).standard_normal(g.size))
    assert integrate(g, f) >= 0
