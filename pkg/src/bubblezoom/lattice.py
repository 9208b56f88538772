"""Cell-local function layout and assembly on blocks of unit square cells.

Every discrete space used in the package (the global problem as well as the
zoomed bubble sub-problems) lives on a rectangular block of congruent square
cells.  On each cell the restriction of any basis function is a combination of
``NLOC`` canonical *local pieces*:

====  =====================================================================
0-3   bilinear hats of the cell corners, ordered (0,0), (1,0), (0,1), (1,1)
4-7   element bubbles whose right-hand side is the corresponding hat
8-13  horizontal-patch bubbles (2x1 patch), cell is the left member
14-19 horizontal-patch bubbles, cell is the right member
20-25 vertical-patch bubbles (1x2 patch), cell is the bottom member
26-31 vertical-patch bubbles, cell is the top member
====  =====================================================================

Patch bubble ``k`` has the patch hat of node ``k`` as right-hand side.  Nodes
of a 2x1 patch are numbered ``i + 3 j`` (``i`` in 0..2, ``j`` in 0..1), nodes
of a 1x2 patch ``i + 2 j``.

Global degrees of freedom reach a cell through at most ``NSLOT`` slots:
four corner hats, four element-bubble slots, and one slot per cell edge for
the patch bubble living on that edge (right, left, top, bottom).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

NLOC = 32
HAT, ELEM, PXL, PXR, PYB, PYT = 0, 4, 8, 14, 20, 26
CORNERS = ((0, 0), (1, 0), (0, 1), (1, 1))
PX_NODES = tuple((i, j) for j in range(2) for i in range(3))
PY_NODES = tuple((i, j) for j in range(3) for i in range(2))

NSLOT = 12
SLOT_HAT, SLOT_ELEM = 0, 4
SLOT_RIGHT, SLOT_LEFT, SLOT_TOP, SLOT_BOTTOM = 8, 9, 10, 11

# integrand channels of a cell tensor
DIFF, CONV, STREAM, MASS = 0, 1, 2, 3
NCHAN = 4


def hat_values(points):
    """Values of the four unit-cell hats at points of shape (..., 2)."""
    x = points[..., 0]
    y = points[..., 1]
    return np.stack([(1 - x) * (1 - y), x * (1 - y), (1 - x) * y, x * y], axis=-1)


@dataclass
class CellLayout:
    """Slot map of a block of ``nx`` by ``ny`` cells.

    ``dof[c, s]`` is the global index reaching cell ``c`` through slot ``s``
    (``-1`` if empty), ``coef[c, l, s]`` the coefficient of local piece ``l``
    in that global function.  Cells are numbered ``a + nx * b``.
    """

    nx: int
    ny: int
    nloc: int = NLOC
    dof: np.ndarray = field(init=False)
    coef: np.ndarray = field(init=False)
    kinds: list = field(default_factory=list)
    owners: list = field(default_factory=list)
    ndof: int = 0

    def __post_init__(self):
        nc = self.nx * self.ny
        self.dof = -np.ones((nc, NSLOT), dtype=np.int64)
        self.coef = np.zeros((nc, self.nloc, NSLOT))

    @property
    def ncell(self):
        return self.nx * self.ny

    def _new(self, kind, owners):
        n = len(owners)
        idx = np.arange(self.ndof, self.ndof + n)
        self.ndof += n
        self.kinds.extend([kind] * n)
        self.owners.extend(owners)
        return idx

    def add_hats(self):
        """One hat per interior node (boundary nodes carry no unknown)."""
        a, b = np.meshgrid(np.arange(1, self.nx), np.arange(1, self.ny), indexing="xy")
        a = a.ravel()
        b = b.ravel()
        idx = self._new("hat", list(zip(a.tolist(), b.tolist())))
        for n, (dx, dy) in enumerate(CORNERS):
            cells = (a - dx) + self.nx * (b - dy)
            self.dof[cells, SLOT_HAT + n] = idx
            self.coef[cells, HAT + n, SLOT_HAT + n] = 1.0
        return idx

    def add_element_bubbles(self, combos=None):
        """Element bubbles on every cell.

        ``combos`` is ``None`` (four nodal bubbles per cell) or an array of shape
        (ncell, 4) or (ncell, k, 4), k <= 4, giving bubbles as combinations of
        the nodal ones; rows that vanish are skipped.
        """
        cells = np.arange(self.ncell)
        cab = [(int(c % self.nx), int(c // self.nx)) for c in cells]
        if combos is None:
            for k in range(4):
                idx = self._new(f"elem{k}", cab)
                self.dof[cells, SLOT_ELEM + k] = idx
                self.coef[cells, ELEM + k, SLOT_ELEM + k] = 1.0
            return
        combos = np.asarray(combos, dtype=float)
        if combos.ndim == 2:
            combos = combos[:, None, :]
        for k in range(combos.shape[1]):
            ck = combos[:, k]
            keep = np.abs(ck).max(axis=1) > 0
            sel = cells[keep]
            idx = self._new("elem", [cab[c] for c in sel])
            self.dof[sel, SLOT_ELEM + k] = idx
            self.coef[sel, ELEM:ELEM + 4, SLOT_ELEM + k] = ck[keep]

    def add_patch_bubbles(self, orient, coeffs, mask=None, pieces=None):
        """Patch bubbles on interior edges.

        ``orient`` is ``"x"`` for edges shared by horizontally adjacent cells
        (vertical edges, 2x1 patches) or ``"y"`` for 1x2 patches.  ``coeffs``
        has shape (n_edges, 6) in the natural edge order (see ``edge_cells``)
        and combines the nodal patch bubbles; ``mask`` selects edges.  With
        ``pieces=(lo, hi)`` each edge instead carries a single extra local piece
        (index ``lo`` in the first cell, ``hi`` in the second) with the
        coefficients ignored.
        """
        c0, c1, owners = self.edge_cells(orient)
        n = len(c0)
        if mask is None:
            mask = np.ones(n, dtype=bool)
        if pieces is None:
            coeffs = np.asarray(coeffs, dtype=float)
            mask = mask & (np.abs(coeffs).max(axis=1) > 0)
        sel = np.flatnonzero(mask)
        idx = self._new(f"patch_{orient}", [owners[e] for e in sel])
        s0, s1 = (SLOT_RIGHT, SLOT_LEFT) if orient == "x" else (SLOT_TOP, SLOT_BOTTOM)
        self.dof[c0[sel], s0] = idx
        self.dof[c1[sel], s1] = idx
        if pieces is not None:
            self.coef[c0[sel], pieces[0], s0] = 1.0
            self.coef[c1[sel], pieces[1], s1] = 1.0
        else:
            l0, l1 = (PXL, PXR) if orient == "x" else (PYB, PYT)
            self.coef[c0[sel], l0:l0 + 6, s0] = coeffs[sel]
            self.coef[c1[sel], l1:l1 + 6, s1] = coeffs[sel]
        return idx

    def edge_cells(self, orient):
        """First/second cell of each interior edge and the edge owner label.

        The owner of an ``x`` edge is the lower-left node ``(a, b)`` of the
        edge ``x = a``; of a ``y`` edge, the left node ``(a, b)`` of ``y = b``.
        """
        if orient == "x":
            a, b = np.meshgrid(np.arange(1, self.nx), np.arange(self.ny), indexing="xy")
            a = a.ravel()
            b = b.ravel()
            c0 = (a - 1) + self.nx * b
            c1 = a + self.nx * b
        else:
            a, b = np.meshgrid(np.arange(self.nx), np.arange(1, self.ny), indexing="xy")
            a = a.ravel()
            b = b.ravel()
            c0 = a + self.nx * (b - 1)
            c1 = a + self.nx * b
        return c0, c1, list(zip(a.tolist(), b.tolist()))

    def patch_node_coords(self, orient):
        """Lattice coordinates of the six patch nodes of every interior edge."""
        c0, _, _ = self.edge_cells(orient)
        a0 = c0 % self.nx
        b0 = c0 // self.nx
        nodes = PX_NODES if orient == "x" else PY_NODES
        off = np.array(nodes, dtype=float)
        return np.stack([a0, b0], axis=-1)[:, None, :] + off[None, :, :]

    # -- assembly -------------------------------------------------------------
    def assemble(self, K):
        """Global matrix ``A[test, trial]`` from the local matrix ``K[trial, test]``."""
        Kc = np.einsum("cpi,pq,cqj->cij", self.coef, K, self.coef, optimize=True)
        rows = np.repeat(self.dof[:, :, None], NSLOT, axis=2)  # trial slot i
        cols = np.repeat(self.dof[:, None, :], NSLOT, axis=1)  # test slot j
        m = (rows >= 0) & (cols >= 0) & (Kc != 0)
        A = sp.coo_matrix((Kc[m], (cols[m], rows[m])), shape=(self.ndof, self.ndof))
        return A.tocsr()

    def gather(self, x):
        """Local piece coefficients (ncell, nloc) of the global vector ``x``."""
        xs = np.where(self.dof >= 0, x[np.maximum(self.dof, 0)], 0.0)
        return np.einsum("cls,cs->cl", self.coef, xs)

    def scatter(self, local):
        """Transpose of :meth:`gather` (local test vectors to a global vector)."""
        vs = np.einsum("cls,cl->cs", self.coef, local)
        m = self.dof >= 0
        return np.bincount(self.dof[m], weights=vs[m], minlength=self.ndof)
