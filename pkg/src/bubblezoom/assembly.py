"""Global bubble-enriched discretizations on uniform meshes.

Four methods share one code path: the discrete space is described by a
:class:`~bubblezoom.lattice.CellLayout` over the mesh cells and a
:class:`~bubblezoom.bubbles.Family` of local pieces whose cell tensor gives every
integral exactly (relative to the zoomed bubble discretization).

Physical cell integrals follow from the unit-cell tensor by scaling with the
cell size ``h``: diffusion is scale free, convection gains ``h``, mass ``h^2``.
The weighted form replaces ``exp(-a.x)`` by its bilinear interpolant on each
cell; writing it as ``int w [eps grad u . grad v + (1 - eps) (a . grad u) v]``
keeps the coercivity identity exact for the interpolated weight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import bubbles as bb
from .grid import GridSpec, Mesh, UnsupportedWind, build_mesh, outflow_masks
from .lattice import CONV, CORNERS, DIFF, MASS, CellLayout, hat_values
from .quadrature import BAND_STEPS, graded_rule, hats_at, layer_bands
from .sparse import SingularMatrix, SolveOptions, solve_linear

METHODS = ("galerkin", "rfb", "bmz", "rfbe")
MODES = ("general", "analysis")
FORMS = ("standard", "weighted")


@dataclass(frozen=True)
class MethodConfig:
    method: str = "bmz"
    mode: str = "general"
    form: str = "standard"
    zoom: int = bb.DEFAULT_ZOOM
    quad: int = 4
    solver: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown bubble mode {self.mode!r}")
        if self.form not in FORMS:
            raise ValueError(f"unknown form {self.form!r}")
        if self.mode == "analysis" and self.method != "bmz":
            raise ValueError("analysis mode is only defined for bmz")
        if self.quad < 2:
            raise ValueError("quadrature order must be at least 2")
        if self.zoom < 4:
            raise ValueError("zoom factor must be at least 4")


# -- Q1 element blocks ------------------------------------------------------------
def local_q1_matrix(corner, spec: GridSpec, form="standard", quad=4, f=None):
    """4x4 block ``K[test, trial]`` and load of one element by tensor Gauss.

    ``corner`` is the lower-left vertex.  For the weighted form the canonical
    block of ``exp(-a.(x - corner))`` is computed and multiplied by
    ``exp(-a.corner)``.
    """
    if quad < 2:
        raise ValueError("quadrature order must be at least 2")
    h = spec.h
    eps = spec.eps
    ax, ay = spec.wind
    t, w = np.polynomial.legendre.leggauss(quad)
    t = 0.5 * (t + 1)
    w = 0.5 * w
    X, Y = np.meshgrid(t, t, indexing="ij")
    W = np.outer(w, w) * h * h
    phi = hat_values(np.stack([X, Y], -1))
    gx = np.stack([-(1 - Y), 1 - Y, -Y, Y], -1) / h
    gy = np.stack([-(1 - X), -X, 1 - X, X], -1) / h
    if form == "weighted":
        wt = np.exp(-(ax * X + ay * Y) * h)
        scale = math.exp(-(ax * corner[0] + ay * corner[1]))
    else:
        wt = np.ones_like(X)
        scale = 1.0
    diff = np.einsum("pq,pqi,pqj->ij", W * wt, gx, gx) + np.einsum("pq,pqi,pqj->ij", W * wt, gy, gy)
    adv = ax * gx + ay * gy
    # d/dx of the weighted test function adds -a w v to its gradient
    if form == "weighted":
        conv = np.einsum("pq,pqi,pqj->ij", W * wt, adv, phi) * (1 - (ax * ax + ay * ay) * eps)
    else:
        conv = np.einsum("pq,pqi,pqj->ij", W * wt, adv, phi)
    K = (eps * diff + conv).T * scale  # trial i, test j -> [test, trial]
    load = np.zeros(4)
    if f is not None:
        xs = corner[0] + h * X
        ys = corner[1] + h * Y
        load = np.einsum("pq,pq,pqj->j", W * wt, f(xs, ys), phi) * scale
    return K, load


# -- discrete spaces ----------------------------------------------------------------
@dataclass
class DiscreteSpace:
    mesh: Mesh
    config: MethodConfig
    family: bb.Family
    layout: CellLayout
    catalog: bb.Catalog | None

    @property
    def ndof(self):
        return self.layout.ndof

    def counts(self):
        out = {}
        for k in self.layout.kinds:
            out[k] = out.get(k, 0) + 1
        return out

    def nodal_mask(self):
        return np.array([k == "hat" for k in self.layout.kinds])


def _family(spec, config):
    e = spec.eps / spec.h
    if config.method == "galerkin":
        return bb.hat_family(config.zoom, spec.wind), None
    cat = bb.get_catalog(e, spec.wind, config.zoom)
    if config.method == "rfbe":
        return cat.rfbe_family(), cat
    return cat.family, cat


def patch_rhs(layout, f, h, orient):
    """Bilinear data of ``f`` at the six nodes of every patch."""
    pts = layout.patch_node_coords(orient) * h
    return f(pts[..., 0], pts[..., 1])


def build_bubble_space(mesh: Mesh, config: MethodConfig, f=None) -> DiscreteSpace:
    spec = mesh.spec
    N = spec.N
    fam, cat = _family(spec, config)
    lay = CellLayout(N, N, nloc=fam.npiece)
    lay.add_hats()
    m = config.method
    if m == "galerkin":
        return DiscreteSpace(mesh, config, fam, lay, cat)
    if config.mode == "analysis":
        if spec.wind != (-1.0, 0.0):
            raise UnsupportedWind("analysis mode requires wind (-1, 0)")
        b = np.arange(N * N) // N
        combos = np.ones((N * N, 4))
        combos[b == 0] = (1, 1, 0, 0)  # l_b
        combos[b == N - 1] = (0, 0, 1, 1)  # l_t
        lay.add_element_bubbles(combos)
        mx, my = outflow_masks(N)
        cx = np.ones((len(mx), 6))
        _, _, own = lay.edge_cells("x")
        rows = np.array([o[1] for o in own])
        cx[rows == 0] = (1, 1, 1, 0, 0, 0)
        cx[rows == N - 1] = (0, 0, 0, 1, 1, 1)
        lay.add_patch_bubbles("x", cx, mask=mx)
        lay.add_patch_bubbles("y", np.ones((len(my), 6)), mask=my)
        return DiscreteSpace(mesh, config, fam, lay, cat)
    if m in ("rfb", "rfbe"):
        # one residual-free bubble per element with constant right-hand side
        lay.add_element_bubbles(np.ones((N * N, 4)))
    else:
        lay.add_element_bubbles()
    if m == "bmz":
        if f is None:
            raise ValueError("general mode needs the right-hand side")
        for orient in ("x", "y"):
            co = patch_rhs(lay, f, spec.h, orient)
            scale = max(1.0, float(np.abs(co).max(initial=0.0)))
            co = np.where(np.abs(co) <= bb.DEGENERATE_TOL * scale, 0.0, co)
            lay.add_patch_bubbles(orient, co)
    elif m == "rfbe":
        lay.add_patch_bubbles("x", None, pieces=(8, 9))
        lay.add_patch_bubbles("y", None, pieces=(10, 11))
    return DiscreteSpace(mesh, config, fam, lay, cat)


# -- cell data ------------------------------------------------------------------------
def cell_weights(spec, form):
    """Corner values (ncell, 4) of the interpolated test weight."""
    N = spec.N
    h = spec.h
    c = np.arange(N * N)
    a = c % N
    b = c // N
    if form == "standard":
        return np.ones((N * N, 4))
    ax, ay = spec.wind
    cx = np.array([d[0] for d in CORNERS])
    cy = np.array([d[1] for d in CORNERS])
    X = (a[:, None] + cx[None, :]) * h
    Y = (b[:, None] + cy[None, :]) * h
    return np.exp(-(ax * X + ay * Y))


def local_matrices(space: DiscreteSpace):
    """Physical local matrices: one shared block or (ncell, n, n) for the weighted form."""
    spec = space.mesh.spec
    T = space.family.T
    h, eps = spec.h, spec.eps
    if space.config.form == "standard":
        return eps * T[DIFF].sum(-1) + h * T[CONV].sum(-1)
    wts = cell_weights(spec, "weighted")
    ax, ay = spec.wind
    kd = np.einsum("ijm,cm->cij", T[DIFF], wts)
    kc = np.einsum("ijm,cm->cij", T[CONV], wts)
    return eps * kd + h * (1 - eps * (ax * ax + ay * ay)) * kc


def norm_matrices(space: DiscreteSpace):
    """Assembled ``(grad u, grad v)`` and ``(u, v)`` Gram matrices of the space."""
    T = space.family.T
    h = space.mesh.spec.h
    D = space.layout.assemble(T[DIFF].sum(-1))
    Mm = space.layout.assemble(h * h * T[MASS].sum(-1))
    return D, Mm


def assemble_matrix(layout: CellLayout, K):
    if K.ndim == 2:
        return layout.assemble(K)
    Kc = np.einsum("cpi,cpq,cqj->cij", layout.coef, K, layout.coef, optimize=True)
    return _coo(layout, Kc)


def _coo(layout, Kc):
    ns = layout.dof.shape[1]
    rows = np.repeat(layout.dof[:, :, None], ns, axis=2)
    cols = np.repeat(layout.dof[:, None, :], ns, axis=1)
    m = (rows >= 0) & (cols >= 0) & (Kc != 0)
    A = sp.coo_matrix((Kc[m], (cols[m], rows[m])), shape=(layout.ndof, layout.ndof))
    return A.tocsr()


def _sub_nodes(N, h, M):
    """Coordinates of the level-1 sub-cell corners, shape (ncell, M*M, 4)."""
    c = np.arange(N * N)
    a = c % N
    b = c // N
    s = np.arange(M * M)
    sa = s % M
    sb = s // M
    cx = np.array([d[0] for d in CORNERS])
    cy = np.array([d[1] for d in CORNERS])
    X = (a[:, None, None] * M + sa[None, :, None] + cx[None, None, :]) * (h / M)
    Y = (b[:, None, None] * M + sb[None, :, None] + cy[None, None, :]) * (h / M)
    return X, Y


def load_vector(space: DiscreteSpace, f):
    """Local loads (ncell, npiece).

    On every sub-cell ``f`` is replaced by its bilinear interpolant, which is
    integrated exactly against the pieces through the family moments.  Where
    the interpolant misses ``f`` by more than ``LOAD_TOL`` (relative, checked at
    edge midpoints and the centre) the sub-cell is split along the bubble
    hierarchy and the pieces are expanded one level down.  Sub-cells that stay
    unsplit but cross a declared layer of ``f`` (attribute ``layer_bands`` =
    {"x": [(pos, width)], "y": [...]}) get a composite-Gauss correction for
    ``f`` minus its interpolant.
    """
    spec = space.mesh.spec
    N, h = spec.N, spec.h
    c = np.arange(N * N)
    x0 = (c % N) * h
    y0 = (c // N) * h
    wts = cell_weights(spec, space.config.form)
    child = space.catalog.child if space.catalog is not None else None
    X, Y = _sub_nodes(N, h, space.family.M)
    fscale = max(1.0, float(np.abs(np.asarray(f(X, Y), dtype=float)).max()))
    loader = _Loader(f, layer_bands(f), max(space.config.quad, 4), LOAD_TOL * fscale)
    return loader.loads(space.family, child, x0, y0, h, wts)


LOAD_TOL = 1e-3
_PROBES = ((0.5, 0.0), (0.0, 0.5), (1.0, 0.5), (0.5, 1.0), (0.5, 0.5))


class _Loader:
    """Recursive evaluation of ``int f * piece * weight`` over square batches."""

    def __init__(self, f, bands, order, tol, chunk=4096):
        self.f, self.bands, self.order, self.tol, self.chunk = f, bands, order, tol, chunk
        self._rules = {}

    def _f(self, X, Y):
        return np.asarray(self.f(X, Y), dtype=float) * np.ones_like(X)

    def loads(self, fam, child, x0, y0, H, wc):
        out = np.zeros((len(x0), fam.npiece))
        for sl in _chunks(len(x0), self.chunk):
            out[sl] = self._loads(fam, child, x0[sl], y0[sl], H, wc[sl])
        return out

    def _loads(self, fam, child, x0, y0, H, wc):
        M = fam.M
        hs = H / M
        s = np.arange(M * M)
        sx = x0[:, None] + (s % M) * hs  # (k, s) sub-square corners
        sy = y0[:, None] + (s // M) * hs
        cx = np.array([d[0] for d in CORNERS])
        cy = np.array([d[1] for d in CORNERS])
        fv = self._f(sx[..., None] + cx * hs, sy[..., None] + cy * hs)  # (k, s, n)
        out = np.einsum("isnm,ksn,km->ki", fam.mom, fv, wc, optimize=True) * H * H
        # interpolation defect at a few probe points of every sub-square
        px = np.array([p[0] for p in _PROBES])
        py = np.array([p[1] for p in _PROBES])
        probe = self._f(sx[..., None] + px * hs, sy[..., None] + py * hs)
        interp = np.einsum("ksn,qn->ksq", fv, hat_values(np.stack([px, py], -1)))
        bad = np.abs(probe - interp).max(-1) > self.tol
        unres = self._unresolved(sx, sy, hs)
        split = bad & unres if child is not None else np.zeros_like(bad)
        kk, ss = np.nonzero(split)
        if kk.size:
            wsub = np.einsum("km,msn->ksn", wc, bb.subcell_corner_hats(M))
            sub = self.loads(child.family, child.child, sx[kk, ss], sy[kk, ss], hs, wsub[kk, ss])
            interp_part = np.einsum("iknm,kn,km->ki", fam.mom[:, ss], fv[kk, ss], wc[kk],
                                    optimize=True) * H * H
            np.add.at(out, kk, np.einsum("ikp,kp->ki", fam.G[:, ss], sub) - interp_part)
        if self.bands:
            kk, ss = np.nonzero(~split & (bad | unres) & self._hit(sx, sy, hs))
            if kk.size:
                wcs = np.einsum("km,mkn->kn", wc[kk], bb.subcell_corner_hats(M)[:, ss])
                R = self._correction(sx[kk, ss], sy[kk, ss], hs, fv[kk, ss], wcs)
                np.add.at(out, kk, np.einsum("ikn,kn->ki", fam.G[:, ss, :4], R))
        return out

    def _unresolved(self, sx, sy, hs):
        """Sub-squares larger than the width of a declared band they meet."""
        if not self.bands:
            return np.ones(sx.shape, dtype=bool)
        out = np.zeros(sx.shape, dtype=bool)
        reach = BAND_STEPS[-1]
        for axis, lo in (("x", sx), ("y", sy)):
            for pos, w in self.bands.get(axis, []):
                out |= (hs > w) & (lo + hs > pos - reach * w) & (lo < pos + reach * w)
        return out

    def _hit(self, sx, sy, hs):
        hit = np.zeros(sx.shape, dtype=bool)
        reach = BAND_STEPS[-1]
        for pos, w in self.bands.get("x", []):
            hit |= (sx + hs > pos - reach * w) & (sx < pos + reach * w)
        for pos, w in self.bands.get("y", []):
            hit |= (sy + hs > pos - reach * w) & (sy < pos + reach * w)
        return hit

    def _rule(self, axis, lo, hs):
        key = (axis, round(lo / hs), hs)
        r = self._rules.get(key)
        if r is None:
            t, w = graded_rule(lo, lo + hs, self.bands.get(axis, []), self.order)
            r = self._rules[key] = ((t - lo) / hs, w)
        return r

    def _correction(self, x0, y0, hs, fv, wcs):
        """``int (f - f_I) phi_n w_I`` on sub-squares (k,) -> (k, 4)."""
        R = np.zeros((len(x0), 4))
        groups = {}
        for k in range(len(x0)):
            tx, _ = self._rule("x", x0[k], hs)
            ty, _ = self._rule("y", y0[k], hs)
            groups.setdefault((len(tx), len(ty)), []).append(k)
        for idx in groups.values():
            idx = np.asarray(idx)
            rx = [self._rule("x", x0[k], hs) for k in idx]
            ry = [self._rule("y", y0[k], hs) for k in idx]
            u = np.array([r[0] for r in rx])[:, :, None]
            v = np.array([r[0] for r in ry])[:, None, :]
            W = np.array([r[1] for r in rx])[:, :, None] * np.array([r[1] for r in ry])[:, None, :]
            u, v = np.broadcast_arrays(u, v)
            phi = hats_at(u, v)
            fx = self._f(x0[idx, None, None] + u * hs, y0[idx, None, None] + v * hs)
            r = fx - np.einsum("kxyn,kn->kxy", phi, fv[idx])
            wgt = np.einsum("kxym,km->kxy", phi, wcs[idx])
            R[idx] = np.einsum("kxy,kxyn->kn", r * wgt * W, phi)
        return R


def _chunks(n, size):
    for a in range(0, n, size):
        yield slice(a, min(n, a + size))


@dataclass
class SolutionField:
    space: DiscreteSpace
    coeffs: np.ndarray

    @property
    def mesh(self):
        return self.space.mesh

    @property
    def config(self):
        return self.space.config

    def local(self):
        return self.space.layout.gather(self.coeffs)

    def nodal_values(self):
        """Coefficients on the global hat basis, shape (N+1, N+1)."""
        N = self.mesh.N
        out = np.zeros((N + 1, N + 1))
        lay = self.space.layout
        for k, (kind, own) in enumerate(zip(lay.kinds, lay.owners)):
            if kind == "hat":
                out[own] = self.coeffs[k]
        return out

    def fine_values(self):
        """Exact values at the level-1 nodes, shape (N M + 1, N M + 1).

        All bubbles vanish at the nodes of the zoomed mesh they were computed
        on, so these values are the hat coefficients one level down.
        """
        N = self.mesh.N
        fam = self.space.family
        M = fam.M
        loc = self.local()  # (ncell, npiece)
        g = np.einsum("ci,isn->csn", loc, fam.G[:, :, :4])  # (cell, s, corner)
        out = np.zeros((N * M + 1, N * M + 1))
        c = np.arange(N * N)
        s = np.arange(M * M)
        I = (c % N)[:, None] * M + (s % M)[None, :]
        J = (c // N)[:, None] * M + (s // M)[None, :]
        for n, (dx, dy) in enumerate(CORNERS):
            out[I + dx, J + dy] = g[:, :, n]
        return out

    def evaluate(self, x, y, grad=False):
        """Bilinear interpolation of :meth:`fine_values` (and its gradient)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any((x < -1e-14) | (x > 1 + 1e-14) | (y < -1e-14) | (y > 1 + 1e-14)):
            raise ValueError("point outside the unit square")
        vals = self._fine_cache()
        n = vals.shape[0] - 1
        X = np.clip(x, 0, 1) * n
        Y = np.clip(y, 0, 1) * n
        i = np.minimum(np.floor(X).astype(int), n - 1)
        j = np.minimum(np.floor(Y).astype(int), n - 1)
        u = X - i
        v = Y - j
        v00, v10, v01, v11 = vals[i, j], vals[i + 1, j], vals[i, j + 1], vals[i + 1, j + 1]
        val = v00 * (1 - u) * (1 - v) + v10 * u * (1 - v) + v01 * (1 - u) * v + v11 * u * v
        if not grad:
            return val
        gx = ((v10 - v00) * (1 - v) + (v11 - v01) * v) * n
        gy = ((v01 - v00) * (1 - u) + (v11 - v10) * u) * n
        return val, gx, gy

    def _fine_cache(self):
        if getattr(self, "_fine", None) is None:
            self._fine = self.fine_values()
        return self._fine


def assemble_system(space: DiscreteSpace, f):
    K = local_matrices(space)
    A = assemble_matrix(space.layout, K)
    if f is None:
        b = np.zeros(space.ndof)
    else:
        b = space.layout.scatter(load_vector(space, f))
    return A, b


def solve_discrete(mesh: Mesh, config: MethodConfig, f) -> SolutionField:
    space = build_bubble_space(mesh, config, f)
    A, b = assemble_system(space, f)
    x = solve_linear(A, b, config.solver)
    return SolutionField(space, x)


def condense(A, b, nodal):
    """Schur complement of the system onto the nodal unknowns.

    Returns ``(S, g, back)`` where ``back(xL)`` recovers the full vector.
    """
    A = sp.csr_matrix(A)
    nodal = np.asarray(nodal, dtype=bool)
    L = np.flatnonzero(nodal)
    B = np.flatnonzero(~nodal)
    if B.size == 0:
        return A, b.copy(), lambda xL: np.asarray(xL, dtype=float).copy()
    ALL = A[L][:, L]
    ALB = A[L][:, B]
    ABL = A[B][:, L]
    ABB = A[B][:, B].tocsc()
    try:
        lu = spla.splu(ABB)
    except RuntimeError as exc:
        raise SingularMatrix("singular bubble block") from exc
    Y = lu.solve(ABL.toarray())
    yb = lu.solve(b[B])
    S = sp.csr_matrix(ALL.toarray() - ALB @ Y)
    g = b[L] - ALB @ yb

    def back(xL):
        x = np.zeros(A.shape[0])
        x[L] = xL
        x[B] = yb - Y @ xL
        return x

    return S, g, back


def spec_of(N, eps, wind=(-1.0, 0.0)):
    return GridSpec(N, eps, wind, eps0=max(1.0, eps))


def solve(N, eps, f, config=None, wind=(-1.0, 0.0)):
    """Convenience wrapper building the mesh."""
    config = config or MethodConfig()
    return solve_discrete(build_mesh(spec_of(N, eps, wind)), config, f)
