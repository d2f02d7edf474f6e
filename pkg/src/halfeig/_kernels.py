"""Hot stencil kernels with a numba path and a pure-numpy path.

Set ``HALFEIG_DISABLE_NUMBA=1`` before import to force the numpy path.
Both paths are always importable (``numpy_kernels`` / ``numba_kernels``)
so they can be compared directly.

Stencil layout shared by every kernel: ``coef`` has shape
``(members, n_interior, 1 + 2*dim)``; column 0 multiplies the node itself and
column ``1 + j`` multiplies ``u[nbr[i, j]]``.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

# ---------------------------------------------------------------- numpy path


def _apply_np(coef, nbr, nodes, u):
    return coef[:, :, 0] * u[nodes] + np.einsum("mij,ij->mi", coef[:, :, 1:], u[nbr])


def _reduce_np(vals, sign):
    """Pointwise min (sign=+1) or max (sign=-1) over members.

    Returns (best, first achieving index, gap to the runner-up).
    """
    s = sign * vals
    idx = np.argmin(s, axis=0)
    best = np.take_along_axis(s, idx[None], axis=0)[0]
    if vals.shape[0] == 1:
        gap = np.full(best.shape, np.inf)
    else:
        s2 = s.copy()
        np.put_along_axis(s2, idx[None], np.inf, axis=0)
        gap = s2.min(axis=0) - best
    return sign * best, idx.astype(np.int64), gap


def _policy_coo_np(coef, nbr, pos, control):
    ni, width = coef.shape[1], coef.shape[2]
    sel = coef[control, np.arange(ni)]
    rows = np.repeat(np.arange(ni), width)
    cols = np.concatenate([np.arange(ni)[:, None], pos[nbr]], axis=1).ravel()
    vals = sel.ravel()
    keep = cols >= 0
    return rows[keep], cols[keep], vals[keep]


numpy_kernels = SimpleNamespace(
    name="numpy", apply=_apply_np, reduce=_reduce_np, policy_coo=_policy_coo_np
)

# ---------------------------------------------------------------- numba path


def _make_numba():
    import numba

    @numba.njit(cache=True, fastmath=False)
    def apply(coef, nbr, nodes, u):
        m, ni, width = coef.shape
        out = np.empty((m, ni))
        for k in range(m):
            for i in range(ni):
                acc = coef[k, i, 0] * u[nodes[i]]
                for j in range(width - 1):
                    acc += coef[k, i, j + 1] * u[nbr[i, j]]
                out[k, i] = acc
        return out

    @numba.njit(cache=True)
    def reduce(vals, sign):
        m, ni = vals.shape
        best = np.empty(ni)
        idx = np.empty(ni, dtype=np.int64)
        gap = np.empty(ni)
        for i in range(ni):
            b = np.inf
            second = np.inf
            bi = 0
            for k in range(m):
                v = sign * vals[k, i]
                if v < b:
                    second = b
                    b = v
                    bi = k
                elif v < second:
                    second = v
            best[i] = sign * b
            idx[i] = bi
            gap[i] = second - b
        return best, idx, gap

    @numba.njit(cache=True)
    def policy_coo(coef, nbr, pos, control):
        _, ni, width = coef.shape
        rows = np.empty(ni * width, dtype=np.int64)
        cols = np.empty(ni * width, dtype=np.int64)
        vals = np.empty(ni * width)
        c = 0
        for i in range(ni):
            k = control[i]
            rows[c] = i
            cols[c] = i
            vals[c] = coef[k, i, 0]
            c += 1
            for j in range(width - 1):
                p = pos[nbr[i, j]]
                if p >= 0:
                    rows[c] = i
                    cols[c] = p
                    vals[c] = coef[k, i, j + 1]
                    c += 1
        return rows[:c], cols[:c], vals[:c]

    return SimpleNamespace(name="numba", apply=apply, reduce=reduce, policy_coo=policy_coo)


try:
    numba_kernels = _make_numba()
except ImportError:  # pragma: no cover
    numba_kernels = None


def _select():
    flag = os.environ.get("HALFEIG_DISABLE_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes", "on") or numba_kernels is None:
        return numpy_kernels
    return numba_kernels


kernels = _select()


def set_threads(n: int | None) -> None:
    if n and kernels is numba_kernels:
        import numba

        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
