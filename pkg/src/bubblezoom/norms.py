"""Exact solutions, reduced-domain error norms, EOC and maxima.

The error of a discrete solution is split on every level-1 sub-cell as
``u - u_h = (u - u_I) + (u_I - u_h)`` with ``u_I`` the bilinear interpolant of
``u`` at the sub-cell corners.  The discrete part ``u_I - u_h`` is a
combination of the child pieces, so its norms are evaluated exactly with the
child cell tensor; ``u - u_I`` and the cross terms use composite Gauss rules
(graded where ``u`` declares layers), the cross terms seeing ``u_I - u_h``
through its sub-cell interpolant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import CORNERS, DIFF, MASS, STREAM
from .quadrature import SubcellQuadrature, hat_grads_at, hats_at

_EXP_CUT = -700.0


def _exp(z):
    """exp with large negative arguments flushed to zero."""
    z = np.asarray(z, dtype=float)
    return np.where(z < _EXP_CUT, 0.0, np.exp(np.maximum(z, _EXP_CUT)))


def layer_profile(eps):
    """psi with -eps psi'' - psi' = 1 on (0, 1), psi(0) = psi(1) = 0, and derivatives."""
    tail = math.exp(-1 / eps) if 1 / eps < 700 else 0.0
    den = 1 - tail

    def psi(s):
        return 1 - s - (_exp(-np.asarray(s) / eps) - tail) / den

    def dpsi(s):
        return -1 + _exp(-np.asarray(s) / eps) / (eps * den)

    def d2psi(s):
        return -_exp(-np.asarray(s) / eps) / (eps * eps * den)

    return psi, dpsi, d2psi


@dataclass
class ExactSolution:
    value: callable
    gradient: callable  # (x, y) -> (ux, uy)
    rhs: callable
    tag: str = ""
    layer_bands: dict = field(default_factory=dict)


def _with_bands(fn, bands):
    fn.layer_bands = bands
    return fn


def manufactured(eps):
    """``u = psi(x) psi(y^2)`` for ``-eps lap u - u_x = f``."""
    psi, dpsi, d2psi = layer_profile(eps)
    bands = {"x": [(0.0, eps)], "y": [(0.0, math.sqrt(eps))]}

    def value(x, y):
        return psi(x) * psi(y * y)

    def gradient(x, y):
        return dpsi(x) * psi(y * y), 2 * y * psi(x) * dpsi(y * y)

    def rhs(x, y):
        s = y * y
        return psi(s) - eps * psi(x) * (2 * dpsi(s) + 4 * s * d2psi(s))

    return ExactSolution(_with_bands(value, bands), gradient, _with_bands(rhs, bands),
                         "manufactured", bands)


def manufactured_rhs(eps):
    return manufactured(eps).rhs


def constant_rhs(c=1.0):
    def f(x, y):
        return np.full(np.broadcast(x, y).shape, float(c))

    return f


def operator_fd(u, eps, wind, x, y, step=1e-4):
    """``-eps lap u + a . grad u`` by second-order central differences."""
    ax, ay = wind
    c = u(x, y)
    uxx = (u(x + step, y) - 2 * c + u(x - step, y)) / step**2
    uyy = (u(x, y + step) - 2 * c + u(x, y - step)) / step**2
    ux = (u(x + step, y) - u(x - step, y)) / (2 * step)
    uy = (u(x, y + step) - u(x, y - step)) / (2 * step)
    return -eps * (uxx + uyy) + ax * ux + ay * uy


def bilinear_exact(c=(0.0, 1.0, 1.0, 1.0)):
    """``c0 + c1 x + c2 y + c3 x y`` and its gradient (no boundary conditions)."""
    def value(x, y):
        return c[0] + c[1] * x + c[2] * y + c[3] * x * y

    def gradient(x, y):
        return c[1] + c[3] * y + 0 * x, c[2] + c[3] * x + 0 * y

    return ExactSolution(value, gradient, None, "bilinear")


def zero_exact():
    z = lambda x, y: np.zeros(np.broadcast(x, y).shape)
    return ExactSolution(z, lambda x, y: (z(x, y), z(x, y)), z, "zero")


# -- evaluation ---------------------------------------------------------------------
def evaluate_solution(u, x, y, grad=False):
    return u.evaluate(x, y, grad=grad)


@dataclass
class ErrorReport:
    N: int
    method: str
    L2: float
    H1: float
    eps_norm: float
    stab: float
    max_value: float
    region: tuple
    eps: float
    eoc: dict = field(default_factory=dict)

    def as_dict(self):
        return dict(N=self.N, method=self.method, L2=self.L2, H1=self.H1,
                    eps_norm=self.eps_norm, stab=self.stab, max_value=self.max_value)


def _region_cells(N, region):
    lo, hi = region
    a0 = lo * N
    a1 = hi * N
    if abs(a0 - round(a0)) > 1e-9 or abs(a1 - round(a1)) > 1e-9:
        raise ValueError("region must be aligned with element boundaries")
    return int(round(a0)), int(round(a1))


def reduced_region(N, layers=2):
    return (layers / N, 1 - layers / N)


def error_norms(u, exact: ExactSolution, region=None, quad=4, resolution="submesh") -> ErrorReport:
    """L2, H1-semi, eps- and stability-norm errors over ``region`` (a square
    ``(lo, hi)^2``, default ``(2h, 1-2h)^2``).

    ``resolution="submesh"`` measures ``u_h`` through its bilinear interpolant on
    the level-1 sub-mesh (the bubble sub-mesh); ``"exact"`` keeps every level
    of the bubbles.
    """
    if resolution not in ("submesh", "exact"):
        raise ValueError(f"unknown resolution {resolution!r}")
    mesh = u.mesh
    N, h, eps = mesh.N, mesh.h, mesh.spec.eps
    ax, ay = mesh.spec.wind
    region = reduced_region(N) if region is None else region
    c0, c1 = _region_cells(N, region)
    fam = u.space.family
    M = fam.M
    hs = h / M
    cells = np.array([a + N * b for b in range(c0, c1) for a in range(c0, c1)], dtype=int)
    loc = u.local()
    childT = fam.child_T
    KD = childT[DIFF].sum(-1)
    KS = childT[STREAM].sum(-1)
    KM = childT[MASS].sum(-1)
    # exact part: sum over sub-cells of e^T K e
    sq = np.zeros(3)  # diff, stream, mass
    eI = np.zeros((N * N, M * M, 4))
    cx = np.array([d[0] for d in CORNERS])
    cy = np.array([d[1] for d in CORNERS])
    s = np.arange(M * M)
    for chunk in np.array_split(cells, max(1, len(cells) // 512)):
        if chunk.size == 0:
            continue
        e = -np.einsum("ci,isp->csp", loc[chunk], fam.G, optimize=True)
        a = chunk % N
        b = chunk // N
        X = (a[:, None, None] * M + (s % M)[None, :, None] + cx) * hs
        Y = (b[:, None, None] * M + (s // M)[None, :, None] + cy) * hs
        if resolution == "submesh":
            e[:, :, 4:] = 0.0
        e[:, :, :4] += exact.value(X, Y)
        for k, K in enumerate((KD, KS, KM)):
            sq[k] += np.einsum("csp,pq,csq->", e, K, e, optimize=True)
        eI[chunk] = e[:, :, :4]
    sq[2] *= hs * hs
    # u - u_I and cross terms by quadrature
    quadr = SubcellQuadrature(N, M, exact.layer_bands, quad)
    cols = np.arange(c0 * M, c1 * M)
    rows = set(range(c0 * M, c1 * M))
    rest = np.zeros(3)
    cross = np.zeros(3)
    for q in quadr.batches(lambda j: cols if j in rows else []):
        X, Y, W = q["X"], q["Y"], q["W"]
        cc, ss = q["cells"], q["s"]
        phi = hats_at(q["u"], q["v"])
        gx, gy = hat_grads_at(q["u"], q["v"], hs)
        ucorn = eI[cc, ss]  # corner values of u_I - u_h
        uv = exact.value(X, Y)
        ux, uy = exact.gradient(X, Y)
        ux = np.broadcast_to(ux, X.shape)
        uy = np.broadcast_to(uy, X.shape)
        # interpolant of u on the sub-cell from its corner values
        xs = (X - q["u"] * hs)[:, :1, :1]
        ys = (Y - q["v"] * hs)[:, :1, :1]
        uc = np.stack([exact.value(xs[:, 0, 0] + dx * hs, ys[:, 0, 0] + dy * hs)
                       for dx, dy in CORNERS], axis=-1)
        r = uv - np.einsum("kxyn,kn->kxy", phi, uc)
        rx = ux - np.einsum("kxyn,kn->kxy", gx, uc)
        ry = uy - np.einsum("kxyn,kn->kxy", gy, uc)
        ev = np.einsum("kxyn,kn->kxy", phi, ucorn)
        ex = np.einsum("kxyn,kn->kxy", gx, ucorn)
        ey = np.einsum("kxyn,kn->kxy", gy, ucorn)
        ra = ax * rx + ay * ry
        ea = ax * ex + ay * ey
        rest += [np.sum(W * (rx * rx + ry * ry)), np.sum(W * ra * ra), np.sum(W * r * r)]
        cross += [np.sum(W * (rx * ex + ry * ey)), np.sum(W * ra * ea), np.sum(W * r * ev)]
    tot = np.maximum(sq + rest + 2 * cross, 0.0)
    H1 = math.sqrt(tot[0])
    L2 = math.sqrt(tot[2])
    stab = math.sqrt(eps * tot[0] + h * tot[1])
    epsn = math.sqrt(eps * tot[0] + tot[2])
    return ErrorReport(N, u.config.method, L2, H1, epsn, stab, max_value(u), region, eps)


def eoc(errors, Ns):
    errors = np.asarray(errors, dtype=float)
    Ns = np.asarray(Ns, dtype=float)
    if errors.shape != Ns.shape or errors.size < 2:
        raise ValueError("need matching sequences of length >= 2")
    if np.any(np.diff(Ns) <= 0):
        raise ValueError("Ns must increase")
    if np.any(errors <= 0):
        raise ValueError("errors must be positive")
    return np.log(errors[:-1] / errors[1:]) / np.log(Ns[1:] / Ns[:-1])


def max_value(u):
    """Maximum over the values at the level-1 nodes of every element.

    These are exact nodal values of ``u_h`` on the mesh the bubbles were
    computed on; the discrete solution is bilinear between them.
    """
    return float(u.fine_values().max())
