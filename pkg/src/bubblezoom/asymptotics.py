"""Zeroth-order asymptotic expansion of the channel problem and the interpolant
coefficients used with it.

Everything is set up on a rectangle ``R = (0, x_max) x (0, y_max)`` with
``f = 1`` and wind ``(-1, 0)``: the reduced solution ``u0 = x_max - x``, the
parabolic correctors ``phi`` (heat equation marched from the inflow side), the
ordinary layer ``theta``, the corner layers ``zeta`` and the elliptic corner
correctors ``xi`` (plain Galerkin on layer-adapted tensor meshes).  The
``eta`` correctors vanish at this order.

Discrete fields live on rectilinear grids and are bilinear between the nodes,
so their norms are computed exactly with 1D mass/stiffness matrices.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solve_banded

from .sparse import solve_linear

_EXP_CUT = -700.0
MIN_XI_EPS = 1e-5


def _exp(z):
    z = np.asarray(z, dtype=float)
    return np.where(z < _EXP_CUT, 0.0, np.exp(np.maximum(z, _EXP_CUT)))


# -- cutoff and data -----------------------------------------------------------------
def smooth_ramp(t):
    """C-infinity ramp: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        g0 = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        g1 = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return g0 / (g0 + g1)


def delta_cutoff(x, x_max=1.0):
    """Smooth cutoff, 0 on [0, x_max/2] and 1 on [3 x_max/4, x_max]."""
    return smooth_ramp((np.asarray(x, dtype=float) / x_max - 0.5) * 4.0)


def gamma_data(x, x_max=1.0):
    """Corner corrector data ``f(x_max, 0) (x - x_max) delta(x)`` for f = 1."""
    x = np.asarray(x, dtype=float)
    return (x - x_max) * delta_cutoff(x, x_max)


def h_data(x, x_max=1.0):
    """Parabolic corrector data ``-u0(x, 0) - gamma(x)``."""
    x = np.asarray(x, dtype=float)
    return (x - x_max) * (1.0 - delta_cutoff(x, x_max))


def u0_channel(x, y, x_max=1.0):
    x = np.asarray(x, dtype=float)
    return x_max - x + 0.0 * np.asarray(y, dtype=float)


def theta_channel(x, eps, x_max=1.0):
    return -x_max * _exp(-np.asarray(x, dtype=float) / eps)


# -- grids -----------------------------------------------------------------------------
def layer_grid(length, width, n, sides=("lo",), sigma=2.0):
    """Piecewise uniform (Shishkin-type) grid on [0, length] with n cells.

    Each side listed in ``sides`` ("lo", "hi") gets n/4 (two sides) or n/2 (one
    side) cells on a band of size ``min(length/4, sigma*width*ln n)``.
    """
    if n < 4 or n % 4:
        raise ValueError("n must be a positive multiple of 4")
    k = len(sides)
    tau = min(length / (2 * k), sigma * width * math.log(n))
    nf = n // (2 * k)
    nc = n - k * nf
    lo = np.linspace(0.0, tau, nf + 1) if "lo" in sides else np.array([0.0])
    hi = length - np.linspace(tau, 0.0, nf + 1) if "hi" in sides else np.array([length])
    a = lo[-1]
    b = hi[0]
    mid = np.linspace(a, b, nc + 1)
    return np.unique(np.concatenate([lo, mid, hi]))


def _mass_1d(t):
    d = np.diff(t)
    n = t.size
    main = np.zeros(n)
    main[:-1] += d / 3
    main[1:] += d / 3
    return sp.diags([d / 6, main, d / 6], [-1, 0, 1], format="csr")


def _stiff_1d(t):
    d = np.diff(t)
    n = t.size
    main = np.zeros(n)
    main[:-1] += 1 / d
    main[1:] += 1 / d
    return sp.diags([-1 / d, main, -1 / d], [-1, 0, 1], format="csr")


def _conv_1d(t):
    """``C[i, j] = int phi_j' phi_i``."""
    n = t.size
    main = np.zeros(n)
    main[0] = -0.5
    main[-1] = 0.5
    off = np.full(n - 1, 0.5)
    return sp.diags([-off, main, off], [-1, 0, 1], format="csr")


@dataclass
class TensorField:
    """Bilinear field on the rectilinear grid ``xs x ys``; ``values[i, j]`` at (xs[i], ys[j])."""
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    _interp: object = field(default=None, repr=False)

    def evaluate(self, x, y):
        if self._interp is None:
            self._interp = RegularGridInterpolator((self.xs, self.ys), self.values,
                                                   bounds_error=True)
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return self._interp(np.stack([x.ravel(), y.ravel()], -1)).reshape(x.shape)

    def gradient(self, x, y):
        """Gradient of the bilinear interpolant (one-sided on grid lines)."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        i = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, self.xs.size - 2)
        j = np.clip(np.searchsorted(self.ys, y, side="right") - 1, 0, self.ys.size - 2)
        dx = self.xs[i + 1] - self.xs[i]
        dy = self.ys[j + 1] - self.ys[j]
        u = (x - self.xs[i]) / dx
        v = (y - self.ys[j]) / dy
        V = self.values
        v00, v10, v01, v11 = V[i, j], V[i + 1, j], V[i, j + 1], V[i + 1, j + 1]
        gx = ((v10 - v00) * (1 - v) + (v11 - v01) * v) / dx
        gy = ((v01 - v00) * (1 - u) + (v11 - v10) * u) / dy
        return gx, gy

    def _quad(self, Ax, Ay):
        V = self.values
        return float(np.sum(V * (Ax @ V @ Ay.T)))

    def l2(self):
        return math.sqrt(self._quad(_mass_1d(self.xs), _mass_1d(self.ys)))

    def dx_l2(self):
        return math.sqrt(self._quad(_stiff_1d(self.xs), _mass_1d(self.ys)))

    def dy_l2(self):
        return math.sqrt(self._quad(_mass_1d(self.xs), _stiff_1d(self.ys)))

    def eps_norm(self, eps):
        return math.sqrt(eps * (self.dx_l2() ** 2 + self.dy_l2() ** 2) + self.l2() ** 2)

    def mirrored_y(self):
        """The field ``v(x, y_max - y)``."""
        ym = self.ys[-1]
        return TensorField(self.xs, ym - self.ys[::-1], self.values[:, ::-1].copy())


# -- parabolic corrector -------------------------------------------------------------
def phi_march(eps, x_grid, y_grid, x_max=1.0, scheme="euler", max_step=None):
    """Bottom parabolic corrector: ``-eps phi_yy - phi_x = 0`` marched in decreasing x.

    Data ``phi(x, 0) = h(x)``, ``phi(x_max, y) = 0`` and ``phi = 0`` at the top
    of ``y_grid`` (far-field truncation).  Galerkin in y, backward Euler (or
    Crank-Nicolson) in ``s = x_max - x``; values are recorded at ``x_grid``.
    """
    if scheme not in ("euler", "cn"):
        raise ValueError(f"unknown scheme {scheme!r}")
    xs = np.unique(np.asarray(x_grid, dtype=float))
    ys = np.asarray(y_grid, dtype=float)
    if np.any(np.diff(ys) <= 0) or ys[0] != 0.0:
        raise ValueError("y_grid must increase from 0")
    if xs[0] < 0 or xs[-1] > x_max + 1e-14:
        raise ValueError("x_grid must lie in [0, x_max]")
    sq = math.sqrt(eps)
    near = ys[1:] <= 4 * sq
    if np.diff(ys)[near].max(initial=np.diff(ys)[0]) > sq / 8:
        raise ValueError("y_grid does not resolve the sqrt(eps) layer (need spacing <= sqrt(eps)/8)")
    max_step = max_step or ((x_max / 2000) if scheme == "euler" else x_max / 1000)
    s_rec = x_max - xs[::-1]  # increasing
    M = _mass_1d(ys)
    K = _stiff_1d(ys)
    n = ys.size
    inner = slice(1, n - 1)

    def banded(A):
        Ai = A[inner, inner]
        ab = np.zeros((3, n - 2))
        ab[0, 1:] = Ai.diagonal(1)
        ab[1] = Ai.diagonal()
        ab[2, :-1] = Ai.diagonal(-1)
        return ab

    theta = 1.0 if scheme == "euler" else 0.5
    out = np.zeros((xs.size, n))
    u = np.zeros(n)
    s = 0.0
    k = 0
    if s_rec[0] <= 0.0:
        k = 1  # x = x_max: phi = 0
    cache = {}
    for target in s_rec[k:]:
        nsub = max(1, math.ceil((target - s) / max_step - 1e-12))
        ds = (target - s) / nsub
        key = round(ds, 15)
        if key not in cache:
            L = M + theta * ds * eps * K
            R = M - (1 - theta) * ds * eps * K
            cache[key] = (banded(L), L[inner, [0]].toarray().ravel(), R)
        ab, lcol, R = cache[key]
        for _ in range(nsub):
            s += ds
            rhs = (R @ u)[inner]
            g = float(h_data(x_max - s, x_max))
            rhs -= lcol * g
            u = np.zeros(n)
            u[0] = g
            u[inner] = solve_banded((1, 1), ab, rhs)
        s = target
        k += 1
        out[xs.size - k] = u
    return TensorField(xs, ys, out)


def zeta_channel(x, y, eps, phi: TensorField):
    """Corner layer ``-phi(0, y) exp(-x/eps)``."""
    return -phi.evaluate(np.zeros_like(np.asarray(y, float)), y) * _exp(-np.asarray(x, float) / eps)


def zeta_l2(eps, phi: TensorField, x_max=1.0):
    """Exact L2 norm of zeta over R from the trace phi(0, .)."""
    if phi.xs[0] != 0.0:
        raise ValueError("phi must be available at x = 0")
    v = phi.values[0]
    tr = float(v @ (_mass_1d(phi.ys) @ v))
    return math.sqrt(tr * eps / 2 * (1 - math.exp(-2 * x_max / eps)))


# -- elliptic corrector and reference solves ---------------------------------------
def tensor_galerkin(xs, ys, eps, load=0.0, boundary=None):
    """Q1 Galerkin for ``-eps lap u - u_x = load`` on the grid ``xs x ys``.

    ``boundary`` holds Dirichlet values on the full node array (only its
    boundary entries are used); zero when omitted.
    """
    nx, ny = xs.size, ys.size
    Mx, My = _mass_1d(xs), _mass_1d(ys)
    A = eps * (sp.kron(_stiff_1d(xs), My) + sp.kron(Mx, _stiff_1d(ys))) - sp.kron(_conv_1d(xs), My)
    A = A.tocsr()
    b = load * np.kron(Mx @ np.ones(nx), My @ np.ones(ny))
    g = np.zeros((nx, ny)) if boundary is None else np.array(boundary, dtype=float)
    bd = np.zeros((nx, ny), dtype=bool)
    bd[[0, -1], :] = True
    bd[:, [0, -1]] = True
    bd = bd.ravel()
    gv = np.where(bd, g.ravel(), 0.0)
    inn = ~bd
    rhs = (b - A @ gv)[inn]
    u = gv.copy()
    u[inn] = solve_linear(A[inn][:, inn], rhs)
    return TensorField(xs, ys, u.reshape(nx, ny))


def xi_solve(eps, corner="bottom", n=256, x_max=1.0, y_max=1.0, xs=None, ys=None):
    """Elliptic corrector at the inflow corner ``(x_max, 0)`` (or ``(x_max, y_max)``).

    ``-eps lap xi - xi_x = 0`` with ``xi = gamma`` on the corner edge, zero on
    the rest of the boundary; plain Galerkin on a Shishkin-type mesh.
    """
    if eps < MIN_XI_EPS:
        raise ValueError(f"eps below the supported range ({MIN_XI_EPS:g})")
    if corner not in ("bottom", "top"):
        raise ValueError(f"unknown corner {corner!r}")
    xs = layer_grid(x_max, eps, n, ("lo",)) if xs is None else np.asarray(xs, float)
    ys = layer_grid(y_max, math.sqrt(eps), n, ("lo",)) if ys is None else np.asarray(ys, float)
    g = np.zeros((xs.size, ys.size))
    g[:, 0] = gamma_data(xs, x_max)
    g[[0, -1], :] = 0.0
    xi = tensor_galerkin(xs, ys, eps, 0.0, g)
    return xi if corner == "bottom" else xi.mirrored_y()


def reference_solution(eps, n=512):
    """Layer-adapted fine Galerkin solution of the channel problem on the unit square."""
    xs = layer_grid(1.0, eps, n, ("lo",))
    ys = layer_grid(1.0, math.sqrt(eps), n, ("lo", "hi"))
    return tensor_galerkin(xs, ys, eps, 1.0)


# -- the expansion ---------------------------------------------------------------------
@dataclass
class CorrectorSet:
    eps: float
    x_max: float
    y_max: float
    phi_bottom: TensorField
    phi_top: TensorField
    xi_bottom: TensorField | None = None
    xi_top: TensorField | None = None

    def u0(self, x, y):
        return u0_channel(x, y, self.x_max)

    def theta(self, x, y):
        return theta_channel(x, self.eps, self.x_max) + 0.0 * np.asarray(y, float)

    def zeta_bottom(self, x, y):
        return zeta_channel(x, y, self.eps, self.phi_bottom)

    def zeta_top(self, x, y):
        return zeta_channel(x, y, self.eps, self.phi_top)

    def eta(self, x, y):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)


def build_correctors(eps, xs=None, ys=None, n=256, scheme="cn", with_xi=True):
    """All correctors on the unit square; ``xs``, ``ys`` default to layer grids."""
    xs = layer_grid(1.0, eps, n, ("lo",)) if xs is None else np.asarray(xs, float)
    ys = layer_grid(1.0, math.sqrt(eps), n, ("lo", "hi")) if ys is None else np.asarray(ys, float)
    phi = phi_march(eps, xs, ys, scheme=scheme)
    xb = xt = None
    if with_xi:
        xb = xi_solve(eps, "bottom", xs=xs, ys=ys)
        xt = xb.mirrored_y()
    return CorrectorSet(eps, 1.0, 1.0, phi, phi.mirrored_y(), xb, xt)


def u_as_channel(cs: CorrectorSet, xs, ys, correctors=True):
    """Nodal values of ``u0 + phi + xi + theta + zeta`` (both sides) on ``xs x ys``.

    The discrete correctors must live on this grid.
    """
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    u = cs.u0(X, Y)
    if not correctors:
        return u
    fields = [cs.phi_bottom, cs.phi_top] + [f for f in (cs.xi_bottom, cs.xi_top) if f is not None]
    for f in fields:
        if f.values.shape != X.shape or not (np.array_equal(f.xs, xs) and np.allclose(f.ys, ys, atol=1e-15)):
            raise ValueError("corrector grid does not match the requested grid")
        u = u + f.values
    u = u + cs.theta(X, Y)
    phi0 = cs.phi_bottom.values[0][None, :] + cs.phi_top.values[0][None, :]
    u = u - phi0 * _exp(-X / cs.eps)
    return u


def expansion_error(eps, n=512):
    """``||u_ref - I u_as||_eps`` with the reference and the expansion on one layer grid."""
    xs = layer_grid(1.0, eps, n, ("lo",))
    ys = layer_grid(1.0, math.sqrt(eps), n, ("lo", "hi"))
    ref = tensor_galerkin(xs, ys, eps, 1.0)
    cs = build_correctors(eps, xs, ys)
    uas = u_as_channel(cs, xs, ys)
    return TensorField(xs, ys, ref.values - uas).eps_norm(eps)


# -- interpolant coefficients ----------------------------------------------------------
@dataclass
class InterpolantCoefficients:
    """Coefficients over the bottom (B), top (T) and outflow-column (L) index sets.

    Keys are ``(i, j)`` with half-integer entries for patch bubbles; element
    ``T_{i,j}`` has its lower-left corner at ``(1 - i h, (j - 1) h)``.
    """
    N: int
    alpha: dict

    @property
    def h(self):
        return 1.0 / self.N

    def sets(self):
        N = self.N
        B = [(float(i), 1.0) for i in range(1, N)] + [(i + 0.5, 1.0) for i in range(1, N)]
        T = [(float(i), float(N)) for i in range(1, N)] + [(i + 0.5, float(N)) for i in range(1, N)]
        L = [(float(N), float(j)) for j in range(1, N + 1)] + [(float(N), j + 0.5) for j in range(1, N)]
        return {"B": B, "T": T, "L": L}


def interpolant_coefficients(N) -> InterpolantCoefficients:
    if N < 2:
        raise ValueError("N must be at least 2")
    a = {}
    for j in (1.0, float(N)):
        for i in range(1, N + 1):
            a[(float(i), j)] = 2.0 - 2 * i
        for i in range(1, N):
            a[(i + 0.5, j)] = float(i)
    for j in range(2, N):
        a[(float(N), float(j))] = -float(N)
    for j in range(1, N):
        a[(float(N), j + 0.5)] = float(N)
    return InterpolantCoefficients(N, a)


def _psi0(lam, N, x, y):
    """Zeroth-order bubble ``psi0_lambda`` (zero outside its closed support)."""
    h = 1.0 / N
    i, j = lam
    if i == N and j != int(j):
        # horizontal patch of the outflow column, edge at y = (j - 1/2) h
        inside = (x >= 0) & (x <= h) & (y >= (j - 1.5) * h) & (y <= (j + 0.5) * h)
        return np.where(inside, h - x, 0.0)
    if j == 1:
        l, y0, y1 = 1 - y / h, 0.0, h
    elif j == N:
        l, y0, y1 = 1 - (1 - y) / h, 1 - h, 1.0
    else:
        l, y0, y1 = 1.0, (j - 1) * h, j * h
    if i == int(i):
        xl, xr = 1 - i * h, 1 - (i - 1) * h
    else:
        k = int(i - 0.5)  # edge at x_k shared by T_k and T_{k+1}
        xl, xr = 1 - (k + 1) * h, 1 - (k - 1) * h
    inside = (x >= xl) & (x <= xr) & (y >= y0) & (y <= y1)
    return np.where(inside, l * (xr - x), 0.0)


def u_b0(coeffs: InterpolantCoefficients, x, y):
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    out = np.zeros(x.shape)
    for lam, a in coeffs.alpha.items():
        if a:
            out += a * _psi0(lam, coeffs.N, x, y)
    return out


def u_l(N, x, y):
    """Bilinear interpolant of u0 = 1 - x with zero boundary values."""
    h = 1.0 / N
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    ux = np.where(x < h, (1 - h) * x / h, 1 - x)
    gy = np.minimum(np.minimum(y / h, (1 - y) / h), 1.0)
    return ux * gy


def _element_samples(N, k):
    """Points strictly inside every element (k x k per element)."""
    h = 1.0 / N
    t = (np.arange(k) + 0.5) / k
    p = (np.arange(N)[:, None] + t[None, :]).ravel() * h
    return np.meshgrid(p, p, indexing="ij")


@dataclass
class IdentityReport:
    N: int
    strip: float
    trace: float
    total: float
    theta: float

    def max(self):
        return max(self.strip, self.trace, self.total, self.theta)


def verify_zeroth_order_identities(N, coeffs: InterpolantCoefficients | None = None,
                                   samples=5, eps=1e-3) -> IdentityReport:
    """Max residuals of the strip, edge-trace, total and theta-cancellation identities."""
    coeffs = coeffs or interpolant_coefficients(N)
    h = 1.0 / N
    a = coeffs.alpha
    X, Y = _element_samples(N, samples)
    # (a) bottom and top strips, h <= x <= 1
    bot = (Y < h) & (X > h)
    top = (Y > 1 - h) & (X > h)
    res_strip = 0.0
    ub = u_b0(coeffs, X, Y)
    if bot.any():
        res_strip = max(res_strip, np.abs(ub[bot] - (1 - Y[bot] / h) * (1 - X[bot])).max())
    if top.any():
        res_strip = max(res_strip, np.abs(ub[top] - (1 - (1 - Y[top]) / h) * (1 - X[top])).max())
    # (b) traces on the edges, approached from inside the outflow-side element
    t = (np.arange(samples) + 0.5) / samples
    res_tr = 0.0
    for j in (1.0, float(N)):
        yy = t * h if j == 1.0 else 1 - h + t * h
        for i in range(2, N):
            xe = np.full_like(yy, 1 - i * h)
            lam1 = (i - 0.5, j)
            lam2 = (float(i), j)
            v = a.get(lam1, 0) * _psi0(lam1, N, xe, yy) + a.get(lam2, 0) * _psi0(lam2, N, xe, yy)
            res_tr = max(res_tr, np.abs(v).max())
    xx = t * h
    for j in range(2, N):
        for side, lam in ((j * h, (float(N), j - 0.5)), ((j - 1) * h, (float(N), j + 0.5))):
            ye = np.full_like(xx, side)
            own = (float(N), float(j))
            v = a[own] * _psi0(own, N, xx, ye) + a[lam] * _psi0(lam, N, xx, ye)
            res_tr = max(res_tr, np.abs(v).max())
    # (c) u0 - u_L - u_B0 on the whole square
    res_tot = np.abs(u0_channel(X, Y) - u_l(N, X, Y) - ub).max()
    # theta-cancellation on the outflow column
    col = X < h
    yc = Y[col]
    ub0 = u_b0(coeffs, np.zeros_like(yc), yc)
    xs = X[col]
    res_th = np.abs(-u0_channel(0.0, yc) * _exp(-xs / eps) + ub0 * _exp(-xs / eps)).max()
    return IdentityReport(N, float(res_strip), float(res_tr), float(res_tot), float(res_th))


# -- sweeps ----------------------------------------------------------------------------
def fit_exponent(eps_list, values):
    """Least-squares slope of log(value) against log(eps)."""
    e = np.log(np.asarray(eps_list, dtype=float))
    v = np.log(np.asarray(values, dtype=float))
    if e.size < 2:
        raise ValueError("need at least two points")
    return float(np.polyfit(e, v, 1)[0])


def corrector_norms(eps, n=256, scheme="cn"):
    """Norms of phi, d_y phi, zeta and xi on layer grids of n cells."""
    xs = np.linspace(0.0, 1.0, 401)
    ys = layer_grid(1.0, math.sqrt(eps), n, ("lo",))
    phi = phi_march(eps, xs, ys, scheme=scheme)
    xi = xi_solve(eps, "bottom", n=n)
    return {"phi_L2": phi.l2(), "dy_phi_L2": phi.dy_l2(),
            "zeta_L2": zeta_l2(eps, phi), "xi_eps": xi.eps_norm(eps)}


DEFAULT_SWEEP = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4)


def corrector_sweep(eps_list=DEFAULT_SWEEP, n=256, jobs=1):
    """Rows ``(epsilon, norm_name, value, fitted_exponent)`` plus the exponents."""
    eps_list = list(eps_list)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            per = list(ex.map(corrector_norms, eps_list, [n] * len(eps_list)))
    else:
        per = [corrector_norms(e, n) for e in eps_list]
    names = list(per[0])
    slopes = {k: fit_exponent(eps_list, [p[k] for p in per]) for k in names}
    rows = [(e, k, p[k], slopes[k]) for k in names for e, p in zip(eps_list, per)]
    return rows, slopes


def expansion_sweep(eps_list=(1e-2, 3e-3, 1e-3), n=512):
    vals = [expansion_error(e, n) for e in eps_list]
    slope = fit_exponent(eps_list, vals)
    return [(e, "u_ref_minus_u_as_eps", v, slope) for e, v in zip(eps_list, vals)], slope


def write_report(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "norm_name", "value", "fitted_exponent"])
        for e, name, v, s in rows:
            w.writerow([f"{e:.6e}", name, f"{v:.9e}", f"{s:.6f}"])
