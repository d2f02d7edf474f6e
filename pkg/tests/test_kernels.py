import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halfeig._kernels import numba_kernels, numpy_kernels
from halfeig.mesh import build_grid, disk, interval
from halfeig.operator import example_4_2, example_4_3, stencils

pytestmark = pytest.mark.skipif(numba_kernels is None, reason="numba not installed")


def _case(kind, n, seed):
    grid = build_grid(interval(0, 1), n) if kind == "line" else build_grid(disk(1.0), n)
    op = example_4_3() if kind == "line" else example_4_2()
    coef = stencils(op, grid)
    r = np.random.default_rng(seed)
    return grid, coef, r.standard_normal(grid.size), r.integers(0, coef.shape[0], grid.n_interior)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["line", "disk"]), st.integers(6, 40), st.integers(0, 2**32 - 1))
def test_backends_agree(kind, n, seed):
    grid, coef, u, control = _case(kind, n, seed)
    nodes = grid.interior_nodes
    a = numpy_kernels.apply(coef, grid.neighbors, nodes, u)
    b = numba_kernels.apply(coef, grid.neighbors, nodes, u)
    scale = np.abs(coef).sum(axis=2).max() * np.abs(u).max()
    assert np.abs(a - b).max() <= 1e-14 * scale
    for sign in (1.0, -1.0):
        ra, rb = numpy_kernels.reduce(a, sign), numba_kernels.reduce(a, sign)
        assert np.array_equal(ra[0], rb[0]) and np.array_equal(ra[1], rb[1])
        assert np.allclose(ra[2], rb[2])
    ca = numpy_kernels.policy_coo(coef, grid.neighbors, grid.position, control)
    cb = numba_kernels.policy_coo(coef, grid.neighbors, grid.position, control)
    for x, y in zip(ca, cb):
        assert np.array_equal(np.sort(x), np.sort(y))


def test_reduce_breaks_ties_to_lowest_index():
    vals = np.array([[1.0, 2.0, 0.0], [1.0, 0.5, 0.0]])
    for k in (numpy_kernels, numba_kernels):
        best, idx, gap = k.reduce(vals, 1.0)
        assert list(idx) == [0, 1, 0]
        assert list(best) == [1.0, 0.5, 0.0]
        assert list(gap) == [0.0, 1.5, 0.0]


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, HALFEIG_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from halfeig._kernels import kernels; "
                          "print(kernels.name)"], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "numpy"
