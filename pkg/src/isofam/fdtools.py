"""Finite-difference stencils for sampled (grid-only) surfaces.

Used as the independent oracle on integrated family members, where
exact jets are unavailable: metric, mean curvature and isotropy of the
samples are checked by high-order centered differences on the grid
interior.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def fornberg_weights(x0: float, nodes, m: int) -> np.ndarray:
    """Weights of the m-th derivative at x0 from arbitrary nodes (Fornberg)."""
    a = np.asarray(nodes, dtype=float)
    n = len(a)
    W = np.zeros((n, m + 1))
    c1, c4 = 1.0, a[0] - x0
    W[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, a[i] - x0
        for j in range(i):
            c3 = a[i] - a[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    W[i, k] = c1 * (k * W[i - 1, k - 1] - c5 * W[i - 1, k]) / c2
                W[i, 0] = -c1 * c5 * W[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                W[j, k] = (c4 * W[j, k] - k * W[j, k - 1]) / c3
            W[j, 0] = c4 * W[j, 0] / c3
        c1 = c2
    return W[:, m]


@lru_cache(maxsize=None)
def centered_stencil(m: int, acc: int) -> tuple[np.ndarray, np.ndarray]:
    """(offsets, weights) of the centered m-th derivative, given accuracy order."""
    if m == 0:
        return np.array([0]), np.array([1.0])
    npts = 2 * ((m + 1) // 2) - 1 + acc
    if npts % 2 == 0:
        npts += 1
    hw = npts // 2
    offsets = np.arange(-hw, hw + 1)
    return offsets, fornberg_weights(0.0, offsets.astype(float), m)


def _apply_axis(arr: np.ndarray, m: int, h: float, axis: int, margin: int, acc: int) -> np.ndarray:
    """m-th derivative along one axis, restricted to the common interior."""
    offsets, weights = centered_stencil(m, acc)
    n = arr.shape[axis]
    out = None
    for off, w in zip(offsets, weights):
        sl = [slice(None)] * arr.ndim
        sl[axis] = slice(margin + off, n - margin + off)
        term = w * arr[tuple(sl)]
        out = term if out is None else out + term
    return out / h**m


def sample_partials(samples: np.ndarray, hu: float, hv: float, max_order: int, acc: int = 6):
    """All partials d^a_u d^b_v (a+b <= max_order) of gridded samples.

    ``samples`` has shape (nu, nv, ...); results live on the common
    interior with the returned margins stripped from both grid axes.
    """
    margin = centered_stencil(max_order, acc)[0].max() if max_order > 0 else 0
    margin = int(margin)
    out = {}
    for a in range(max_order + 1):
        du = _apply_axis(samples, a, hu, 0, margin, acc) if a else samples[margin:-margin or None]
        for b in range(max_order + 1 - a):
            if b:
                val = _apply_axis(du, b, hv, 1, margin, acc)
            else:
                val = du[:, margin:-margin or None]
            out[(a, b)] = val
    return out, margin
