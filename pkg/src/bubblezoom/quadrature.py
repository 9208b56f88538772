"""Composite Gauss rules on the level-1 sub-cells of a uniform mesh.

A function with thin layers declares them through ``layer_bands``: a dict
``{"x": [(pos, width), ...], "y": [...]}``.  Sub-cells whose interval meets a
band get composite rules with break points geometrically spaced away from the
band position; all others get a plain tensor Gauss rule.
"""
from __future__ import annotations

import numpy as np

from .lattice import hat_values

BAND_STEPS = (0.0, 0.25, 0.5, 1, 2, 4, 8, 16, 32, 64)


def gauss01(order):
    t, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (t + 1), 0.5 * w


def graded_rule(x0, x1, bands, order):
    """Composite Gauss rule on [x0, x1] refined towards each band."""
    pts = {x0, x1}
    for pos, width in bands:
        for k in BAND_STEPS:
            for sgn in (-1, 1):
                p = pos + sgn * k * width
                if x0 < p < x1:
                    pts.add(p)
    pts = np.array(sorted(pts))
    t, w = gauss01(order)
    d = np.diff(pts)
    return (pts[:-1, None] + d[:, None] * t).ravel(), (d[:, None] * w).ravel()


def band_hit(x0, x1, bands):
    return any(x1 > pos - BAND_STEPS[-1] * w and x0 < pos + BAND_STEPS[-1] * w
               for pos, w in bands)


def layer_bands(f):
    return getattr(f, "layer_bands", None) or {}


class SubcellQuadrature:
    """Rules for the ``(N M)^2`` level-1 sub-cells of the unit square."""

    def __init__(self, N, M, bands=None, order=4):
        self.N, self.M, self.order = N, M, order
        bands = bands or {}
        n = N * M
        hs = 1.0 / n
        self.hs = hs
        bx, by = bands.get("x", []), bands.get("y", [])
        self.gx = np.array([band_hit(i * hs, (i + 1) * hs, bx) for i in range(n)], dtype=bool)
        self.gy = np.array([band_hit(j * hs, (j + 1) * hs, by) for j in range(n)], dtype=bool)
        self.rx = [graded_rule(i * hs, (i + 1) * hs, bx if self.gx[i] else [], order)
                   for i in range(n)]
        self.ry = [graded_rule(j * hs, (j + 1) * hs, by if self.gy[j] else [], order)
                   for j in range(n)]

    def batches(self, cols_of_row):
        """Yield point batches for the sub-cells ``(i, j)`` with ``i`` in
        ``cols_of_row(j)``.

        Each batch is a dict with coarse ``cells`` (k,), sub-cell index ``s``
        (k,), physical points ``X``/``Y`` (k, px, py), weights ``W`` and local
        coordinates in the sub-cell (``u``, ``v``) and in the cell (``U``, ``V``).
        """
        N, M, hs = self.N, self.M, self.hs
        h = 1.0 / N
        for j in range(N * M):
            cols = cols_of_row(j)
            if len(cols) == 0:
                continue
            yq, wy = self.ry[j]
            b, sb = divmod(j, M)
            groups = {}
            for i in cols:
                groups.setdefault(len(self.rx[i][0]), []).append(i)
            for idx in groups.values():
                idx = np.asarray(idx)
                xq = np.array([self.rx[i][0] for i in idx])
                wx = np.array([self.rx[i][1] for i in idx])
                X = np.broadcast_to(xq[:, :, None], xq.shape + yq.shape)
                Y = np.broadcast_to(yq[None, None, :], X.shape)
                a = idx // M
                yield dict(
                    cells=a + N * b, s=idx % M + M * sb, X=X, Y=Y,
                    W=wx[:, :, None] * wy[None, None, :],
                    u=(X - idx[:, None, None] * hs) / hs, v=(Y - j * hs) / hs,
                    U=(X - a[:, None, None] * h) / h, V=(Y - b * h) / h,
                )


def hats_at(u, v):
    return hat_values(np.stack([u, v], axis=-1))


def hat_grads_at(u, v, size):
    """Physical gradients of the 4 hats of a cell of the given size."""
    gx = np.stack([-(1 - v), 1 - v, -v, v], axis=-1) / size
    gy = np.stack([-(1 - u), -u, 1 - u, u], axis=-1) / size
    return gx, gy
