"""Compiled inner loops of the Galerkin solver.

Path batches are laid out as ``(mode, component, lane)`` float arrays with the
six components ``(re x, re y, re z, im x, im y, im z)`` so the innermost loop
runs over contiguous lanes.
"""

from __future__ import annotations

from typing import NamedTuple

import numba as nb
import numpy as np

LANES = 20

# the system TBB is often too old for numba; prefer OpenMP and skip the warning
nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


TILE = 5


class Tiles(NamedTuple):
    """Lattice vectors grouped into cubes of side ``TILE``.

    ``order[ptr[c]:ptr[c+1]]`` are the rows of cube ``c`` and ``lo``/``hi`` its
    componentwise bounding box.
    """

    order: np.ndarray
    ptr: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def box_tiles(vecs: np.ndarray, side: int = TILE) -> Tiles:
    v = np.asarray(vecs, dtype=np.int64)
    c = (v - v.min(axis=0)) // side
    span = c.max() + 1
    key = (c[:, 0] * span + c[:, 1]) * span + c[:, 2]
    order = np.argsort(key, kind="stable")
    _, start = np.unique(key[order], return_index=True)
    ptr = np.append(start, len(order)).astype(np.int64)
    lo = np.array([v[order[a:b]].min(axis=0) for a, b in zip(ptr[:-1], ptr[1:])], dtype=np.int64)
    hi = np.array([v[order[a:b]].max(axis=0) for a, b in zip(ptr[:-1], ptr[1:])], dtype=np.int64)
    return Tiles(order.astype(np.int64), ptr, lo, hi)


@nb.njit(cache=True, fastmath=True, boundscheck=False, parallel=True)
def noise_increment(out_vecs, shell_vecs, cube, K, U, B, C, oord, optr, olo, ohi, kord, kptr, klo, khi):
    """``C[o] = -i o x sum_k U_k x B_{o-k}`` for every output row ``o``.

    ``cube`` maps a shifted lattice point (offset by ``K``) to its row in ``B``
    or ``-1``; rows with ``|o - k| > K`` are skipped. Outputs and shell vectors
    are visited tile by tile so the rows of ``U`` and ``B`` in use stay in
    cache. Each output tile is owned by one thread and the summation order is
    fixed, so results are bit-identical for any thread count.
    """
    K2 = K * K
    A = np.zeros((out_vecs.shape[0], 6, LANES))
    for oc in nb.prange(optr.shape[0] - 1):
        acc = np.empty((6, LANES))
        for kc in range(kptr.shape[0] - 1):
            # skip tile pairs whose closest points are farther apart than K
            d2 = 0
            for c in range(3):
                lo = olo[oc, c] - khi[kc, c]
                hi = ohi[oc, c] - klo[kc, c]
                if lo > 0:
                    d2 += lo * lo
                elif hi < 0:
                    d2 += hi * hi
            if d2 > K2:
                continue
            for ii in range(optr[oc], optr[oc + 1]):
                oi = oord[ii]
                o0 = out_vecs[oi, 0]
                o1 = out_vecs[oi, 1]
                o2 = out_vecs[oi, 2]
                acc[:] = 0.0
                for jj in range(kptr[kc], kptr[kc + 1]):
                    ka = kord[jj]
                    x = o0 - shell_vecs[ka, 0]
                    y = o1 - shell_vecs[ka, 1]
                    z = o2 - shell_vecs[ka, 2]
                    if x * x + y * y + z * z > K2:
                        continue
                    hb = cube[x + K, y + K, z + K]
                    if hb < 0:
                        continue
                    for p in range(LANES):
                        ur0 = U[ka, 0, p]
                        ur1 = U[ka, 1, p]
                        ur2 = U[ka, 2, p]
                        ui0 = U[ka, 3, p]
                        ui1 = U[ka, 4, p]
                        ui2 = U[ka, 5, p]
                        vr0 = B[hb, 0, p]
                        vr1 = B[hb, 1, p]
                        vr2 = B[hb, 2, p]
                        vi0 = B[hb, 3, p]
                        vi1 = B[hb, 4, p]
                        vi2 = B[hb, 5, p]
                        acc[0, p] += ur1 * vr2 - ui1 * vi2 - ur2 * vr1 + ui2 * vi1
                        acc[3, p] += ur1 * vi2 + ui1 * vr2 - ur2 * vi1 - ui2 * vr1
                        acc[1, p] += ur2 * vr0 - ui2 * vi0 - ur0 * vr2 + ui0 * vi2
                        acc[4, p] += ur2 * vi0 + ui2 * vr0 - ur0 * vi2 - ui0 * vr2
                        acc[2, p] += ur0 * vr1 - ui0 * vi1 - ur1 * vr0 + ui1 * vi0
                        acc[5, p] += ur0 * vi1 + ui0 * vr1 - ur1 * vi0 - ui1 * vr0
                for c in range(6):
                    for p in range(LANES):
                        A[oi, c, p] += acc[c, p]
    for oi in nb.prange(out_vecs.shape[0]):
        o0 = out_vecs[oi, 0]
        o1 = out_vecs[oi, 1]
        o2 = out_vecs[oi, 2]
        for p in range(LANES):
            # o x acc, then multiply by -i: (x + iy) -> y - ix
            xr = o1 * A[oi, 2, p] - o2 * A[oi, 1, p]
            yr = o2 * A[oi, 0, p] - o0 * A[oi, 2, p]
            zr = o0 * A[oi, 1, p] - o1 * A[oi, 0, p]
            xi = o1 * A[oi, 5, p] - o2 * A[oi, 4, p]
            yi = o2 * A[oi, 3, p] - o0 * A[oi, 5, p]
            zi = o0 * A[oi, 4, p] - o1 * A[oi, 3, p]
            C[oi, 0, p] = xi
            C[oi, 1, p] = yi
            C[oi, 2, p] = zi
            C[oi, 3, p] = -xr
            C[oi, 4, p] = -yr
            C[oi, 5, p] = -zr


@nb.njit(cache=True)
def count_pairs(out_vecs, shell_vecs, K):
    """Number of ``(o, k)`` pairs the noise kernel visits."""
    K2 = K * K
    total = 0
    for oi in range(out_vecs.shape[0]):
        for ka in range(shell_vecs.shape[0]):
            x = out_vecs[oi, 0] - shell_vecs[ka, 0]
            y = out_vecs[oi, 1] - shell_vecs[ka, 1]
            z = out_vecs[oi, 2] - shell_vecs[ka, 2]
            r2 = x * x + y * y + z * z
            if 0 < r2 <= K2:
                total += 1
    return total


@nb.njit(cache=True)
def loss_forms(modes, shell_vecs, shell_cov, K, weight_power):
    """Quadratic forms of the expected noise energy pushed beyond ``|o| = K``.

    For a field coefficient ``b`` at ``h`` and noise mode ``k`` with output
    ``o = h + k`` outside the ball, the discarded coefficient is
    ``-i o x (U_k x b)``. With ``C_k = E[U_k U_k^H]`` its expected weighted
    energy is ``b^H G b`` where
    ``G_bd = |o|^{2 w} sum eps_acb eps_efd X_ae C_fc`` and ``X = |o|^2 I - o o^T``.
    Returns ``A[h] = sum_k G`` over the rows of ``modes``.
    """
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    nh = modes.shape[0]
    A = np.zeros((nh, 3, 3), dtype=np.complex128)
    X = np.empty((3, 3))
    K2 = K * K
    for i in range(nh):
        for ka in range(shell_vecs.shape[0]):
            o0 = modes[i, 0] + shell_vecs[ka, 0]
            o1 = modes[i, 1] + shell_vecs[ka, 1]
            o2 = modes[i, 2] + shell_vecs[ka, 2]
            r2 = o0 * o0 + o1 * o1 + o2 * o2
            if r2 <= K2:
                continue
            o = (float(o0), float(o1), float(o2))
            w = float(r2) ** weight_power
            for a in range(3):
                for e in range(3):
                    X[a, e] = (r2 if a == e else 0.0) - o[a] * o[e]
            for b in range(3):
                for d in range(3):
                    s = 0.0 + 0.0j
                    for a in range(3):
                        for c in range(3):
                            ea = eps[a, c, b]
                            if ea == 0.0:
                                continue
                            for e in range(3):
                                for f in range(3):
                                    ee = eps[e, f, d]
                                    if ee == 0.0:
                                        continue
                                    s += ea * ee * X[a, e] * shell_cov[ka, f, c]
                    A[i, b, d] += w * s
    return A
