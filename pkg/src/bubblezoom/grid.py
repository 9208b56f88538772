"""Uniform square meshes of the unit square.

Internally cells are addressed by ``(a, b)`` counted from the lower-left corner,
cell ``(a, b)`` being ``[a h, (a+1) h] x [b h, (b+1) h]``.  The analysis of the
channel problem numbers elements right to left instead: ``T_{i,j}`` has lower
left vertex ``(x_i, y_j) = (1 - i h, (j - 1) h)``, so ``a = N - i`` and
``b = j - 1``.  Edge labels follow the same convention with half-integer
indices: the vertical edge between ``T_{i,j}`` and ``T_{i+1,j}`` is
``S_{i+1/2, j}`` and the horizontal edge between ``T_{i,j}`` and ``T_{i,j+1}``
is ``S_{i, j+1/2}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

EPS0 = 0.5


class UnsupportedWind(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    N: int
    eps: float
    wind: tuple = (-1.0, 0.0)
    eps0: float = EPS0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("N must be an integer >= 2")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.eps > self.eps0:
            raise ValueError(f"eps must not exceed eps0 = {self.eps0}")
        w = tuple(float(v) for v in self.wind)
        if len(w) != 2 or abs(math.hypot(*w) - 1) > 1e-12:
            raise ValueError("wind must be a unit 2-vector")
        object.__setattr__(self, "wind", w)

    @property
    def h(self):
        return 1.0 / self.N


@dataclass(frozen=True, order=True)
class ElementId:
    """Paper label ``T_{i,j}``."""

    i: int
    j: int

    def cell(self, N):
        return N - self.i, self.j - 1

    @classmethod
    def from_cell(cls, a, b, N):
        return cls(N - a, b + 1)


@dataclass(frozen=True, order=True)
class EdgeId:
    """Edge label ``S_{i,j}`` with exactly one half-integer index.

    ``vertical`` edges carry a half-integer ``i``; horizontal ones a half-integer
    ``j``.  ``elements`` are the adjacent elements (two for interior edges).
    """

    vertical: bool
    i: Fraction
    j: Fraction
    elements: tuple = field(compare=False, default=())
    interior: bool = field(compare=False, default=True)
    outflow: bool = field(compare=False, default=False)

    @property
    def label(self):
        return f"S_{{{_fmt(self.i)},{_fmt(self.j)}}}"


def _fmt(q):
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator // 2}+1/2"


def paper_corner(e: ElementId, spec: GridSpec):
    if not (1 <= e.i <= spec.N and 1 <= e.j <= spec.N):
        raise IndexError("element index out of range")
    return (1 - e.i * spec.h, (e.j - 1) * spec.h)


@dataclass
class Mesh:
    spec: GridSpec
    elements: list
    edges: list
    nodes: np.ndarray  # ((N+1)^2, 2), node (p, q) at index p + (N+1) q
    boundary: np.ndarray  # bool per node

    @property
    def N(self):
        return self.spec.N

    @property
    def h(self):
        return self.spec.h

    def interior_edges(self):
        return [e for e in self.edges if e.interior]

    def patch(self, edge: EdgeId):
        """Rectangle ``(x0, x1, y0, y1)`` covered by the two elements of ``edge``."""
        xs, ys = [], []
        for el in edge.elements:
            x, y = paper_corner(el, self.spec)
            xs += [x, x + self.h]
            ys += [y, y + self.h]
        return min(xs), max(xs), min(ys), max(ys)

    def element_of_cell(self, a, b):
        return ElementId.from_cell(a, b, self.N)

    def vertical_edge(self, p, b):
        """Vertical edge on ``x = p h`` in cell row ``b``."""
        return self._vert[(p, b)]

    def horizontal_edge(self, a, q):
        return self._horiz[(a, q)]


def _touches_outflow(vertical, p, q, N):
    """Edge touching {x=0} u {y=0} u {y=1} (outflow and parabolic boundaries)."""
    if vertical:  # from (p, q) to (p, q+1)
        return q == 0 or q + 1 == N or p == 0
    return p == 0 or q == 0 or q == N  # from (p, q) to (p+1, q)


def build_mesh(spec: GridSpec) -> Mesh:
    N = spec.N
    h = spec.h
    elements = [ElementId.from_cell(a, b, N) for b in range(N) for a in range(N)]
    p, q = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="xy")
    nodes = np.stack([p.ravel() * h, q.ravel() * h], axis=-1)
    nodes[p.ravel() == N, 0] = 1.0
    nodes[q.ravel() == N, 1] = 1.0
    boundary = (p.ravel() == 0) | (p.ravel() == N) | (q.ravel() == 0) | (q.ravel() == N)
    edges = []
    vert, horiz = {}, {}
    for b in range(N):
        for pp in range(N + 1):
            els = tuple(ElementId.from_cell(a, b, N) for a in (pp - 1, pp) if 0 <= a < N)
            interior = 0 < pp < N
            e = EdgeId(True, Fraction(2 * (N - pp) + 1, 2), Fraction(b + 1), els, interior,
                       interior and _touches_outflow(True, pp, b, N))
            edges.append(e)
            vert[(pp, b)] = e
    for qq in range(N + 1):
        for a in range(N):
            els = tuple(ElementId.from_cell(a, b, N) for b in (qq - 1, qq) if 0 <= b < N)
            interior = 0 < qq < N
            e = EdgeId(False, Fraction(N - a), Fraction(2 * qq + 1, 2), els, interior,
                       interior and _touches_outflow(False, a, qq, N))
            edges.append(e)
            horiz[(a, qq)] = e
    mesh = Mesh(spec, elements, edges, nodes, boundary)
    mesh._vert = vert
    mesh._horiz = horiz
    return mesh


def outflow_edges(mesh: Mesh):
    """Interior edges touching the outflow or characteristic boundary.

    Only defined for the wind ``(-1, 0)``.
    """
    if mesh.spec.wind != (-1.0, 0.0):
        raise UnsupportedWind("outflow classification requires wind (-1, 0)")
    return {e for e in mesh.edges if e.interior and e.outflow}


def outflow_masks(N):
    """Boolean masks over the interior ``x`` and ``y`` edges of a
    :class:`~bubblezoom.lattice.CellLayout` (its natural edge order)."""
    a, b = np.meshgrid(np.arange(1, N), np.arange(N), indexing="xy")
    mx = ((b == 0) | (b == N - 1)).ravel()
    a, b = np.meshgrid(np.arange(N), np.arange(1, N), indexing="xy")
    my = (a == 0).ravel()
    return mx, my
