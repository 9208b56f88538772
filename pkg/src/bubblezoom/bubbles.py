"""Residual-free bubbles computed by recursive mesh zoom.

A bubble supported on one cell (element bubble) or on two adjacent cells
(patch bubble) solves ``-e * lap(b) + a . grad(b) = g`` with ``b = 0`` on the
boundary of its support, where lengths are measured in cell units so that
``e = eps / h_loc``.  The sub-problem is discretized on the support refined
``M`` times per cell.  While the local mesh does not resolve the diffusion
scale (``e < 1``) the refined space is itself enriched with element and patch
bubbles one level down, which are obtained the same way; once ``e >= 1`` plain
bilinear Galerkin is used.

Because the coefficients are constant, all bubbles of one kind are translates
of each other.  A :class:`Catalog` therefore solves each kind once per level and
stores, for the 32 local pieces of the layout in :mod:`bubblezoom.lattice`,
the exact cell integrals of every pair of pieces (a *cell tensor*).  Integrals
of the discrete bubbles follow by expanding them in the pieces of the next
level, so nothing is ever sampled on a grid that does not resolve it.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .lattice import (CONV, CORNERS, DIFF, ELEM, HAT, MASS, NCHAN, NLOC, PX_NODES, PXL,
                      PXR, PY_NODES, PYB, PYT, STREAM, CellLayout, hat_values)

DEFAULT_ZOOM = 10
STOP_TOL = 1e-9
DEGENERATE_TOL = 1e-14


class BubbleError(RuntimeError):
    pass


class RecursionDepthError(BubbleError):
    pass


def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def leaf_tensor(wind, nloc=NLOC, order=4):
    """Exact cell integrals of products of the four unit-cell hats.

    ``T[c, i, j, m]`` integrates channel ``c`` of (trial ``i``, test ``j``)
    against the weight hat ``m``: ``grad u . grad v``, ``(a . grad u) v``,
    ``(a . grad u)(a . grad v)`` and ``u v``.  Bubble slots stay zero.
    """
    t, w = _gauss(order)
    X, Y = np.meshgrid(t, t, indexing="ij")
    W = np.outer(w, w)
    pts = np.stack([X, Y], axis=-1)
    phi = hat_values(pts)  # (q, q, 4)
    gx = np.stack([-(1 - Y), (1 - Y), -Y, Y], axis=-1)
    gy = np.stack([-(1 - X), -X, (1 - X), X], axis=-1)
    ax, ay = wind
    adv = ax * gx + ay * gy
    T = np.zeros((NCHAN, nloc, nloc, 4))
    T[DIFF, :4, :4] = np.einsum("pqi,pqj,pqm,pq->ijm", gx, gx, phi, W) + np.einsum(
        "pqi,pqj,pqm,pq->ijm", gy, gy, phi, W)
    T[CONV, :4, :4] = np.einsum("pqi,pqj,pqm,pq->ijm", adv, phi, phi, W)
    T[STREAM, :4, :4] = np.einsum("pqi,pqj,pqm,pq->ijm", adv, adv, phi, W)
    T[MASS, :4, :4] = np.einsum("pqi,pqj,pqm,pq->ijm", phi, phi, phi, W)
    return T


def subcell_corner_hats(M):
    """``W[m, s, n]``: unit-cell hat ``m`` at corner ``n`` of sub-cell ``s``."""
    a, b = np.meshgrid(np.arange(M), np.arange(M), indexing="xy")
    a = a.ravel()
    b = b.ravel()
    corners = np.array(CORNERS, dtype=float)
    pts = (np.stack([a, b], axis=-1)[:, None, :] + corners[None, :, :]) / M
    return np.transpose(hat_values(pts), (2, 0, 1))


def family_tensor(G, child_T, M):
    """Cell tensor of pieces given by their expansion ``G[i, s, p]``.

    ``G`` expands piece ``i`` on sub-cell ``s`` into the child pieces ``p``;
    ``child_T`` is the child cell tensor in the child's own units.  The result
    is expressed in units of the parent cell.
    """
    W = subcell_corner_hats(M)
    scale = np.array([1.0, 1.0 / M, 1.0, 1.0 / M**2])
    # contract the child weight with the parent hat first: (c, p, q, s, m)
    Tw = np.einsum("cpqn,msn->cpqsm", child_T, W, optimize=True)
    out = np.einsum("isp,cpqsm,jsq->cijm", G, Tw, G, optimize=True)
    return out * scale[:, None, None, None]


def family_moments(G, child_T, M):
    """``mom[i, s, n, m]`` = integral over sub-cell ``s`` of child hat ``n``
    times piece ``i`` times parent hat ``m`` (parent units)."""
    W = subcell_corner_hats(M)
    S = child_T[MASS]  # (trial p, test q, weight n')
    return np.einsum("isp,npk,msk->isnm", G, S[:4],
                     W, optimize=True) / M**2


@dataclass
class Family:
    """A set of local pieces on the unit cell with their cell tensor."""

    M: int
    G: np.ndarray  # (npiece, M*M, NLOC) expansion into the child pieces
    child_T: np.ndarray
    T: np.ndarray = field(init=False)
    mom: np.ndarray = field(init=False)

    def __post_init__(self):
        self.T = family_tensor(self.G, self.child_T, self.M)
        self.mom = family_moments(self.G, self.child_T, self.M)

    @property
    def npiece(self):
        return self.G.shape[0]

    def form(self, e, weights=None):
        """Local matrix ``K[trial, test]`` of ``e (grad, grad) + (a . grad u, v)``.

        ``weights`` (4 corner values) switches to the hat-interpolated weight
        ``sum_m w_m phi_m`` with convection scaled by ``conv_scale``; see
        :func:`bubblezoom.assembly.local_matrices`.
        """
        if weights is None:
            return e * self.T[DIFF].sum(-1) + self.T[CONV].sum(-1)
        w = np.asarray(weights, dtype=float)
        return e * self.T[DIFF] @ w + self.T[CONV] @ w

    def nodal_values(self, i):
        """Values of piece ``i`` at the (M+1)^2 child nodes of the cell."""
        M = self.M
        out = np.zeros((M + 1, M + 1))
        g = self.G[i].reshape(M, M, NLOC)  # [b, a, p]
        for n, (dx, dy) in enumerate(CORNERS):
            out[dx:M + dx, dy:M + dy] = g[:, :, n].T
        return out


def hat_family(M, wind):
    W = subcell_corner_hats(M)
    G = np.zeros((4, M * M, NLOC))
    G[:, :, :4] = W
    return Family(M, G, leaf_tensor(wind))


# -- bubble kinds ---------------------------------------------------------------
KINDS = tuple([("E", k) for k in range(4)] + [("X", k) for k in range(6)]
              + [("Y", k) for k in range(6)])
_SHAPE = {"E": (1, 1), "X": (2, 1), "Y": (1, 2)}


def rhs_hat(kind, k):
    """Right-hand side of bubble kind ``(kind, k)`` as a function of (x, y)."""
    if kind == "E":
        c = CORNERS[k]
    elif kind == "X":
        c = PX_NODES[k]
    else:
        c = PY_NODES[k]

    def g(x, y):
        return np.maximum(0.0, 1 - np.abs(x - c[0])) * np.maximum(0.0, 1 - np.abs(y - c[1]))

    return g


def one_d_profile(t, e, w):
    """Solution of ``-e psi'' + w psi' = 1`` on (0, 1) with zero end values."""
    t = np.asarray(t, dtype=float)
    if abs(w) < 1e-14:
        return t * (1 - t) / (2 * e)
    r = w / e
    if r > 0:
        g = np.exp(r * (t - 1)) * (-np.expm1(-r * t)) / (-np.expm1(-r))
    else:
        g = np.expm1(r * t) / np.expm1(r)
    return (t - g) / w


def _solve(A, b):
    if A.shape[0] <= 3000:
        return sla.solve(A.toarray(), b)
    return spla.spsolve(A.tocsc(), b)


@dataclass
class SubSolve:
    """A zoomed bubble sub-problem and its solution."""

    layout: CellLayout
    x: np.ndarray
    local: np.ndarray  # (ncell, NLOC) child piece coefficients
    nodal: np.ndarray  # (Mx+1, My+1) values at the refined nodes


class Catalog:
    """All bubble kinds at one level (cell units, diffusion ``e``)."""

    def __init__(self, e, wind=(-1.0, 0.0), M=DEFAULT_ZOOM):
        if e <= 0:
            raise ValueError("diffusion must be positive")
        if M < 4:
            raise ValueError("zoom factor must be at least 4")
        self.e = float(e)
        self.wind = tuple(float(v) for v in wind)
        self.M = int(M)
        speed = math.hypot(*self.wind)
        # stop rule: cell size h_loc <= eps / |a|  <=>  e * |a| >= 1
        if self.e * speed >= 1 - STOP_TOL:
            self.child = None
            self.child_T = leaf_tensor(self.wind)
            self.depth = 0
        else:
            self.child = get_catalog(M * self.e, self.wind, M)
            self.child_T = self.child.family.T
            self.depth = self.child.depth + 1
        self.solves = {}
        G = np.zeros((NLOC, M * M, NLOC))
        G[:4, :, :4] = subcell_corner_hats(M)
        for kind, k in KINDS:
            sol = self._solve_kind(kind, k)
            self.solves[(kind, k)] = sol
            for piece, sub in self._pieces(kind, k, sol):
                G[piece] = sub
        self.family = Family(M, G, self.child_T)

    # ---------------------------------------------------------------------
    @property
    def has_sub_bubbles(self):
        return self.child is not None

    def child_form(self):
        return self.M * self.e * self.child_T[DIFF].sum(-1) + self.child_T[CONV].sum(-1)

    def _layout(self, nx, ny, g=None):
        M = self.M
        lay = CellLayout(M * nx, M * ny)
        lay.add_hats()
        if self.has_sub_bubbles:
            lay.add_element_bubbles()
            if g is not None:
                scale = 1.0
                for orient in ("x", "y"):
                    pts = lay.patch_node_coords(orient) / M
                    co = g(pts[..., 0], pts[..., 1])
                    scale = max(scale, float(np.abs(co).max(initial=0.0)))
                for orient in ("x", "y"):
                    pts = lay.patch_node_coords(orient) / M
                    co = g(pts[..., 0], pts[..., 1])
                    co[np.abs(co) <= DEGENERATE_TOL * scale] = 0.0
                    lay.add_patch_bubbles(orient, co)
        return lay

    def _cell_corner_values(self, lay, g):
        M = self.M
        c = np.arange(lay.ncell)
        a = c % lay.nx
        b = c // lay.nx
        corners = np.array(CORNERS)
        xs = (a[:, None] + corners[None, :, 0]) / M
        ys = (b[:, None] + corners[None, :, 1]) / M
        return g(xs, ys)

    def _solve_kind(self, kind, k):
        nx, ny = _SHAPE[kind]
        g = rhs_hat(kind, k)
        lay = self._layout(nx, ny, g)
        return self._run(lay, self._cell_corner_values(lay, g) / self.M, None)

    def solve_rhs(self, aspect, g):
        """Zoomed sub-solve on a 1x1, 2x1 or 1x2 support with right-hand side ``g``
        (a function of cell-unit coordinates)."""
        nx, ny = ASPECTS[aspect]
        lay = self._layout(nx, ny, g)
        return self._run(lay, self._cell_corner_values(lay, g) / self.M, None)

    def _run(self, lay, gcorner, lift):
        K = self.child_form()
        S = self.child_T[MASS].sum(-1)  # (trial, test)
        load = gcorner @ S[:4, :]
        if lift is not None:
            load = load - lift @ K
        A = lay.assemble(K)
        b = lay.scatter(load)
        x = _solve(A, b) if lay.ndof else np.zeros(0)
        local = lay.gather(x)
        if lift is not None:
            local = local + lift
        nodal = np.zeros((lay.nx + 1, lay.ny + 1))
        for n, (dx, dy) in enumerate(CORNERS):
            c = np.arange(lay.ncell)
            nodal[c % lay.nx + dx, c // lay.nx + dy] = local[:, n]
        return SubSolve(lay, x, local, nodal)

    def _pieces(self, kind, k, sol):
        M = self.M
        nx, ny = _SHAPE[kind]
        loc = sol.local.reshape(M * ny, M * nx, NLOC)  # [b, a, p]
        if kind == "E":
            yield ELEM + k, loc.reshape(M * M, NLOC)
        elif kind == "X":
            yield PXL + k, loc[:, :M].reshape(M * M, NLOC)
            yield PXR + k, loc[:, M:].reshape(M * M, NLOC)
        else:
            yield PYB + k, loc[:M].reshape(M * M, NLOC)
            yield PYT + k, loc[M:].reshape(M * M, NLOC)

    # -- enhanced (edge-trace) patch bubbles ----------------------------------
    def rfbe_family(self):
        """Hats, nodal element bubbles and the four edge-trace patch pieces.

        Piece order: hats 0-3, element bubbles 4-7, then the 2x1 patch piece
        on its left / right cell and the 1x2 patch piece on its bottom / top
        cell.  Each patch bubble solves the homogeneous equation on both cells
        and equals the 1D layer profile of the tangential wind on the shared
        edge.
        """
        if getattr(self, "_rfbe", None) is not None:
            return self._rfbe
        M = self.M
        G = np.zeros((12, M * M, NLOC))
        G[:8] = self.family.G[:8]
        ax, ay = self.wind
        t = np.arange(M + 1) / M
        traces = {"x": one_d_profile(t, self.e, ay), "y": one_d_profile(t, self.e, ax)}
        # unit peak keeps the global system well scaled; the span is unchanged
        traces = {k: v / np.abs(v).max() for k, v in traces.items()}
        self.rfbe_solves = {}
        for piece, (orient, side) in enumerate((("x", "right"), ("x", "left"),
                                                ("y", "top"), ("y", "bottom"))):
            sol = self._edge_solve(traces[orient], side)
            self.rfbe_solves[(orient, side)] = sol
            G[8 + piece] = sol.local
        self._rfbe = Family(M, G, self.child_T)
        return self._rfbe

    def _edge_solve(self, trace, side):
        """Homogeneous cell solve with ``trace`` prescribed on one side."""
        M = self.M
        lay = self._layout(1, 1, None)
        lift = np.zeros((lay.ncell, NLOC))
        c = np.arange(lay.ncell)
        a = c % M
        b = c // M
        for n, (dx, dy) in enumerate(CORNERS):
            if side == "right":
                on = a + dx == M
                lift[on, n] = trace[b[on] + dy]
            elif side == "left":
                on = a + dx == 0
                lift[on, n] = trace[b[on] + dy]
            elif side == "top":
                on = b + dy == M
                lift[on, n] = trace[a[on] + dx]
            else:
                on = b + dy == 0
                lift[on, n] = trace[a[on] + dx]
        return self._run(lay, np.zeros((lay.ncell, 4)), lift)


_CACHE: dict = {}
_LOCK = threading.Lock()


def _key(e, wind, M):
    return (float(f"{e:.12g}"), tuple(round(float(v), 14) for v in wind), int(M))


def get_catalog(e, wind=(-1.0, 0.0), M=DEFAULT_ZOOM, max_depth=64):
    """Memoized :class:`Catalog` (first writer wins; builds are deterministic)."""
    if not e > 0:
        raise ValueError("diffusion must be positive")
    key = _key(e, wind, M)
    cat = _CACHE.get(key)
    if cat is not None:
        return cat
    speed = math.hypot(*wind)
    if e * speed < 1 and math.log(1.0 / (e * speed)) / math.log(M) > max_depth:
        raise RecursionDepthError("zoom recursion would exceed the depth bound")
    cat = Catalog(key[0], wind, M)
    with _LOCK:
        return _CACHE.setdefault(key, cat)


def clear_cache():
    with _LOCK:
        _CACHE.clear()


def expected_depth(e, wind=(-1.0, 0.0), M=DEFAULT_ZOOM):
    """Number of zoom levels before the local mesh resolves the diffusion."""
    speed = math.hypot(*wind)
    d = 0
    while e * speed < 1 - STOP_TOL:
        e *= M
        d += 1
    return d


# -- single bubble fields ------------------------------------------------------------
ASPECTS = {"1x1": (1, 1), "2x1": (2, 1), "1x2": (1, 2)}


@dataclass(frozen=True)
class RhsClass:
    """Bilinear right-hand side of a bubble sub-problem (cell units).

    Use the constructors :func:`Constant`, :func:`RampBottom`, :func:`RampTop`,
    :func:`NodalQ1` and :func:`Q1Data`.
    """

    kind: str
    data: tuple = ()

    def node_values(self, aspect):
        """Values at the (nx+1)(ny+1) coarse nodes of the support, x fastest."""
        nx, ny = ASPECTS[aspect]
        X, Y = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
        X = X.ravel().astype(float)
        Y = Y.ravel().astype(float)
        if self.kind == "constant":
            return np.full(X.shape, float(self.data[0]))
        if self.kind == "ramp_bottom":
            return np.maximum(0.0, 1 - Y)
        if self.kind == "ramp_top":
            return np.maximum(0.0, 1 - (ny - Y))
        if self.kind == "nodal":
            k = self.data[0]
            if not 1 <= k <= X.size:
                raise ValueError(f"node index {k} out of range for aspect {aspect}")
            out = np.zeros(X.size)
            out[k - 1] = 1.0
            return out
        vals = np.asarray(self.data, dtype=float)
        if vals.shape != X.shape:
            raise ValueError(f"{aspect} support needs {X.size} nodal values")
        return vals

    def function(self, aspect):
        nx, ny = ASPECTS[aspect]
        vals = self.node_values(aspect).reshape(ny + 1, nx + 1)

        def g(x, y):
            x = np.clip(np.asarray(x, dtype=float), 0, nx)
            y = np.clip(np.asarray(y, dtype=float), 0, ny)
            i = np.minimum(np.floor(x).astype(int), nx - 1)
            j = np.minimum(np.floor(y).astype(int), ny - 1)
            u = x - i
            v = y - j
            return (vals[j, i] * (1 - u) * (1 - v) + vals[j, i + 1] * u * (1 - v)
                    + vals[j + 1, i] * (1 - u) * v + vals[j + 1, i + 1] * u * v)

        return g

    def nonnegative(self, aspect):
        return bool(np.all(self.node_values(aspect) >= 0))


def Constant(c=1.0):
    return RhsClass("constant", (float(c),))


def RampBottom():
    """``l_b(y) = 1 - y/h`` on the bottom cell row, zero above."""
    return RhsClass("ramp_bottom")


def RampTop():
    """``l_t(y) = 1 - (1 - y)/h`` on the top cell row, zero below."""
    return RhsClass("ramp_top")


def NodalQ1(k):
    """Nodal basis function of support node ``k`` (1-based, x fastest)."""
    return RhsClass("nodal", (int(k),))


def Q1Data(values):
    return RhsClass("data", tuple(float(v) for v in values))


@dataclass(frozen=True)
class SubDomain:
    aspect: str = "1x1"
    h_loc: float = 1.0
    eps: float = 1.0

    def __post_init__(self):
        if self.aspect not in ASPECTS:
            raise ValueError(f"unknown aspect {self.aspect!r}")
        if not (self.h_loc > 0 and self.eps > 0):
            raise ValueError("cell size and diffusion must be positive")

    @property
    def ehat(self):
        return self.eps / self.h_loc

    @property
    def extent(self):
        return ASPECTS[self.aspect]


@dataclass(frozen=True)
class BubbleKey:
    aspect: str
    ehat: float
    rhs: RhsClass
    wind: tuple
    M: int


@dataclass
class BubbleField:
    """A bubble on its reference support with values on the zoomed sub-mesh.

    ``nodal[i, j]`` is the value at ``(i / M, j / M)`` in cell units; physical
    values are ``scale`` times these (``scale = h_loc``).
    """

    M: int
    nodal: np.ndarray
    depth: int
    key: BubbleKey | None
    extent: tuple
    scale: float = 1.0
    solve: SubSolve | None = None
    ehat: float = 1.0
    wind: tuple = (-1.0, 0.0)

    def evaluate(self, x, y, grad=False):
        """Bilinear value (reference units) at local points ``(x, y)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        nx, ny = self.extent
        tol = 1e-14
        if np.any((x < -tol) | (x > nx + tol) | (y < -tol) | (y > ny + tol)):
            raise ValueError("point outside the bubble support")
        M = self.M
        X = np.clip(x, 0, nx) * M
        Y = np.clip(y, 0, ny) * M
        i = np.minimum(np.floor(X).astype(int), nx * M - 1)
        j = np.minimum(np.floor(Y).astype(int), ny * M - 1)
        u = X - i
        v = Y - j
        V = self.nodal * self.scale
        v00, v10, v01, v11 = V[i, j], V[i + 1, j], V[i, j + 1], V[i + 1, j + 1]
        val = v00 * (1 - u) * (1 - v) + v10 * u * (1 - v) + v01 * (1 - u) * v + v11 * u * v
        # exact zeros on the support boundary
        on = (x <= 0) | (y <= 0) | (x >= nx) | (y >= ny)
        val = np.where(on, 0.0, val)
        if not grad:
            return val
        gx = ((v10 - v00) * (1 - v) + (v11 - v01) * v) * M
        gy = ((v01 - v00) * (1 - u) + (v11 - v10) * u) * M
        return val, gx, gy

    def to_csv(self, path):
        nx, ny = self.extent
        I, J = np.meshgrid(np.arange(nx * self.M + 1), np.arange(ny * self.M + 1), indexing="ij")
        data = np.column_stack([I.ravel() / self.M, J.ravel() / self.M,
                                (self.nodal * self.scale).ravel()])
        np.savetxt(path, data, delimiter=",", header="x,y,value", comments="", fmt="%.12e")


_FIELDS: dict = {}


def solve_bubble(dom: SubDomain, rhs: RhsClass, zoom=DEFAULT_ZOOM, cache=None,
                 wind=(-1.0, 0.0)) -> BubbleField:
    """Zoomed solution of ``-e lap b + a . grad b = g`` on the reference support.

    The sub-mesh has ``zoom`` cells per unit; while ``e |a| < 1`` it carries
    element and patch bubbles from the level below, otherwise it is plain
    bilinear Galerkin.  Results are memoized by :class:`BubbleKey` in
    ``cache`` (module-level by default).
    """
    if zoom < 4:
        raise ValueError("zoom factor must be at least 4")
    cache = _FIELDS if cache is None else cache
    wind = tuple(float(v) for v in wind)
    rhs.node_values(dom.aspect)  # validates the data
    key = BubbleKey(dom.aspect, _key(dom.ehat, wind, zoom)[0], rhs, wind, int(zoom))
    field_ = cache.get(key)
    if field_ is None:
        cat = get_catalog(dom.ehat, wind, zoom)
        sol = cat.solve_rhs(dom.aspect, rhs.function(dom.aspect))
        field_ = BubbleField(cat.M, sol.nodal, cat.depth, key, dom.extent, 1.0, sol,
                             cat.e, wind)
        with _LOCK:
            field_ = cache.setdefault(key, field_)
    if dom.h_loc != 1.0:
        field_ = BubbleField(field_.M, field_.nodal, field_.depth, field_.key, field_.extent,
                             dom.h_loc, field_.solve, field_.ehat, field_.wind)
    return field_


def rfbe_bubble(dom: SubDomain, zoom=DEFAULT_ZOOM, wind=(-1.0, 0.0)) -> BubbleField:
    """Edge-trace patch bubble: homogeneous solves on both cells of the patch
    with the 1D layer profile (``-e psi'' + a_t psi' = 1``, ``a_t`` the wind
    component along the edge) prescribed on the shared edge."""
    if dom.aspect == "1x1":
        raise ValueError("rfbe bubbles live on two-cell patches")
    cat = get_catalog(dom.ehat, wind, zoom)
    cat.rfbe_family()
    M = cat.M
    ax, ay = cat.wind
    t = np.arange(M + 1) / M
    if dom.aspect == "2x1":
        peak = np.abs(one_d_profile(t, cat.e, ay)).max()
        left = cat.rfbe_solves[("x", "right")].nodal
        right = cat.rfbe_solves[("x", "left")].nodal
        nodal = np.concatenate([left, right[1:]], axis=0)
    else:
        peak = np.abs(one_d_profile(t, cat.e, ax)).max()
        bottom = cat.rfbe_solves[("y", "top")].nodal
        top = cat.rfbe_solves[("y", "bottom")].nodal
        nodal = np.concatenate([bottom, top[:, 1:]], axis=1)
    return BubbleField(M, nodal * peak, cat.depth, None, dom.extent, dom.h_loc, None, cat.e,
                       cat.wind)


def coupling_integrals(b: BubbleField, partner, form="standard", quad=4, eps=None,
                       h_loc=1.0, offset=(0.0, 0.0), weight_shift=1.0, f=None):
    """``(a(b, partner), a(partner, b), F(b))`` in physical units.

    ``partner`` is a :class:`BubbleField` whose support is shifted by
    ``offset`` (cell units) relative to ``b``, or an integer naming the
    support node (0-based, x fastest) of a bilinear hat on the coarse cells
    of ``b``'s support.  Integrals use a tensor Gauss rule of order ``quad`` on
    every sub-cell of the overlap.  The weighted form uses
    ``weight_shift * exp(-a . x)`` with ``x`` local physical coordinates;
    ``F`` integrates ``f`` (default 1, local physical coordinates) against
    ``b`` with the same weight.
    """
    if quad < 2:
        raise ValueError("quadrature order must be at least 2")
    if form not in ("standard", "weighted"):
        raise ValueError(f"unknown form {form!r}")
    eps = b.ehat * h_loc if eps is None else eps
    ax, ay = b.wind
    M = b.M
    nx, ny = b.extent
    if isinstance(partner, BubbleField):
        if partner.M != M:
            raise ValueError("partner must share the sub-mesh resolution")
        ox, oy = offset
        px, py = partner.extent
        lo = (max(0.0, ox), max(0.0, oy))
        hi = (min(nx, ox + px), min(ny, oy + py))

        def pe(x, y):
            return partner.evaluate(x - ox, y - oy, grad=True)
    else:
        k = int(partner)
        if not 0 <= k < (nx + 1) * (ny + 1):
            raise ValueError("hat index out of range")
        cx, cy = k % (nx + 1), k // (nx + 1)
        lo = (max(0.0, cx - 1.0), max(0.0, cy - 1.0))
        hi = (min(nx, cx + 1.0), min(ny, cy + 1.0))

        def pe(x, y):
            hx = np.maximum(0.0, 1 - np.abs(x - cx))
            hy = np.maximum(0.0, 1 - np.abs(y - cy))
            sx = np.where(np.abs(x - cx) < 1, -np.sign(x - cx), 0.0)
            sy = np.where(np.abs(y - cy) < 1, -np.sign(y - cy), 0.0)
            return hx * hy, sx * hy, hx * sy
    if hi[0] - lo[0] <= 1e-14 or hi[1] - lo[1] <= 1e-14:
        return 0.0, 0.0, 0.0
    t, w = _gauss(quad)
    ix = np.arange(round(lo[0] * M), round(hi[0] * M))
    iy = np.arange(round(lo[1] * M), round(hi[1] * M))
    X = ((ix[:, None] + t[None, :]) / M).ravel()
    Y = ((iy[:, None] + t[None, :]) / M).ravel()
    WX = np.tile(w, len(ix)) / M
    WY = np.tile(w, len(iy)) / M
    X, Y = np.meshgrid(X, Y, indexing="ij")
    W = np.outer(WX, WY)
    bv, bx, by = b.evaluate(X, Y, grad=True)
    pv, qx, qy = pe(X, Y)
    if form == "weighted":
        wt = weight_shift * np.exp(-(ax * X + ay * Y) * h_loc)
        conv = 1 - eps * (ax * ax + ay * ay)
    else:
        wt = np.ones_like(X)
        conv = 1.0
    # reference gradients; physical = reference / h_loc, area = h_loc^2
    diff = np.sum(W * wt * (bx * qx + by * qy))
    c_bp = np.sum(W * wt * (ax * bx + ay * by) * pv)
    c_pb = np.sum(W * wt * (ax * qx + ay * qy) * bv)
    a_bp = eps * diff + conv * h_loc * c_bp
    a_pb = eps * diff + conv * h_loc * c_pb
    fv = 1.0 if f is None else f(X * h_loc, Y * h_loc)
    load = h_loc * h_loc * np.sum(W * wt * fv * bv)
    return float(a_bp), float(a_pb), float(load)


def envelope_excess(b: BubbleField, rhs: RhsClass):
    """Largest violations of ``0 <= b <= (n_x - x) l(y)`` at the sub-mesh nodes.

    For the wind ``(-1, 0)`` and a nonnegative right-hand side, ``(n_x - x) l(y)``
    is a supersolution when ``l`` is constant or a ramp on a one-row support;
    other classes (nodal hats, ramps on the 1x2 patch) are bounded by
    ``(n_x - x) max(l)``.  Returns ``(below, above)``, both >= 0, in reference
    units.
    """
    nx, ny = b.extent
    aspect = f"{nx}x{ny}"
    if not rhs.nonnegative(aspect):
        raise ValueError("envelope needs a nonnegative right-hand side")
    M = b.M
    x = np.arange(nx * M + 1) / M
    y = np.arange(ny * M + 1) / M
    X, Y = np.meshgrid(x, y, indexing="ij")
    if rhs.kind == "constant" or (rhs.kind.startswith("ramp") and ny == 1):
        env = (nx - X) * rhs.function(aspect)(X, Y)
    else:
        env = (nx - X) * rhs.node_values(aspect).max()
    v = b.nodal
    return float(max(0.0, -v.min())), float(max(0.0, (v - env).max()))
