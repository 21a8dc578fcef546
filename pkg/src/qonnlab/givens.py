"""Compiled kernels for pyramid-of-Givens matrix assembly and angle gradients.

The layer matrix is W = G_K ... G_1 restricted to the output/input blocks,
where G_k is the rotation of the k-th pyramid slot acting on rows (r_k, r_k+1).
Gradients are computed by an exact reverse sweep over the gates, costing O(q)
per gate, instead of generic tape autodiff.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["assemble_stack", "angle_grad_stack"]


@njit(cache=True)
def _assemble(angles, rows, q, out):
    out[:] = 0.0
    for i in range(q):
        out[i, i] = 1.0
    for k in range(rows.size):
        a = rows[k]
        b = a + 1
        c = np.cos(angles[k])
        s = np.sin(angles[k])
        for j in range(q):
            ra = out[a, j]
            rb = out[b, j]
            out[a, j] = c * ra + s * rb
            out[b, j] = -s * ra + c * rb


@njit(cache=True)
def assemble_stack(angles, rows, q):
    """Assemble the full q x q products for a stack of angle sets.

    angles: (L, K) float64, rows: (K,) int64. Returns (L, q, q).
    """
    nl = angles.shape[0]
    out = np.empty((nl, q, q))
    for l in range(nl):
        _assemble(angles[l], rows, q, out[l])
    return out


@njit(cache=True)
def angle_grad_stack(angles, rows, q, mats, dmats):
    """Backpropagate dL/dM (full q x q) to dL/dtheta for every stack member.

    mats must be the matrices produced by assemble_stack for the same angles.
    Maintains U_k = (G_K..G_{k+1})^T dL/dM and R_k = G_k..G_1; the gradient of
    gate k is <G'_k (G_k^T R_k), U_k> which touches only rows r_k and r_k+1.
    """
    nl, nk = angles.shape
    grads = np.zeros((nl, nk))
    for l in range(nl):
        umat = dmats[l].copy()
        rmat = mats[l].copy()
        for k in range(nk - 1, -1, -1):
            a = rows[k]
            b = a + 1
            c = np.cos(angles[l, k])
            s = np.sin(angles[l, k])
            acc = 0.0
            for j in range(q):
                rpa = c * rmat[a, j] - s * rmat[b, j]
                rpb = s * rmat[a, j] + c * rmat[b, j]
                acc += umat[a, j] * (-s * rpa + c * rpb)
                acc += umat[b, j] * (-c * rpa - s * rpb)
                rmat[a, j] = rpa
                rmat[b, j] = rpb
                ua = umat[a, j]
                ub = umat[b, j]
                umat[a, j] = c * ua - s * ub
                umat[b, j] = s * ua + c * ub
            grads[l, k] = acc
    return grads
