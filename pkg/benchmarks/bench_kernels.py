"""Time the numba kernels against the pure-numpy fallback on a disk grid.

    python benchmarks/bench_kernels.py [--n 201] [--repeat 20]

Both backends are checked for identical results before timing.
"""
import argparse
import time

import numpy as np

from halfeig._kernels import numba_kernels, numpy_kernels
from halfeig.mesh import build_grid, disk
from halfeig.operator import example_4_2, stencils


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=201)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    grid = build_grid(disk(1.0), args.n)
    coef = stencils(example_4_2(), grid)
    nodes = grid.interior_nodes
    rng = np.random.default_rng(0)
    u = rng.standard_normal(grid.size)
    control = rng.integers(0, coef.shape[0], grid.n_interior)
    print(f"disk grid n={args.n}: {grid.n_interior} interior nodes, {coef.shape[0]} members")

    if numba_kernels is None:
        print("numba unavailable; nothing to compare")
        return
    ref = numpy_kernels.apply(coef, grid.neighbors, nodes, u)
    got = numba_kernels.apply(coef, grid.neighbors, nodes, u)
    # summation order differs, so compare at the rounding scale of the stencil
    scale = np.abs(coef).sum(axis=2).max() * np.abs(u).max()
    assert np.abs(ref - got).max() <= 1e-14 * scale
    for a, b in zip(numpy_kernels.reduce(ref, 1.0), numba_kernels.reduce(ref, 1.0)):
        assert np.allclose(a, b)
    numba_kernels.policy_coo(coef, grid.neighbors, grid.position, control)  # compile

    cases = {
        "apply": lambda k: k.apply(coef, grid.neighbors, nodes, u),
        "reduce": lambda k: k.reduce(ref, 1.0),
        "policy_coo": lambda k: k.policy_coo(coef, grid.neighbors, grid.position, control),
    }
    print(f"{'kernel':<12}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, fn in cases.items():
        t_np = best_of(lambda: fn(numpy_kernels), args.repeat)
        t_nb = best_of(lambda: fn(numba_kernels), args.repeat)
        print(f"{name:<12}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
