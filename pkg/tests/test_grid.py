from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bubblezoom.grid import (ElementId, GridSpec, UnsupportedWind, build_mesh, outflow_edges,
                             outflow_masks, paper_corner)


def mesh(N, eps=1e-2, wind=(-1.0, 0.0)):
    return build_mesh(GridSpec(N, eps, wind))


@pytest.mark.parametrize("N, elements, interior, nodes", [(2, 4, 4, 9), (3, 9, 12, 16),
                                                          (50, 2500, 4900, 2601)])
def test_counts(N, elements, interior, nodes):
    m = mesh(N)
    assert len(m.elements) == elements
    assert len(m.interior_edges()) == interior
    assert m.nodes.shape == (nodes, 2)


def test_interior_edges_enumerated_by_hand():
    # 3x3 grid: vertical interior lines x = 1/3, 2/3 in 3 rows, same for horizontal
    m = mesh(3)
    got = sorted((e.vertical, e.i, e.j) for e in m.interior_edges())
    want = sorted([(True, Fraction(2 * i + 1, 2), Fraction(j)) for i in (1, 2) for j in (1, 2, 3)]
                  + [(False, Fraction(i), Fraction(2 * j + 1, 2)) for i in (1, 2, 3) for j in (1, 2)])
    assert got == want


@pytest.mark.parametrize("ij, corner", [((1, 1), (0.75, 0.0)), ((4, 1), (0.0, 0.0)),
                                        ((1, 4), (0.75, 0.75))])
def test_paper_corner(ij, corner):
    assert paper_corner(ElementId(*ij), GridSpec(4, 0.1)) == pytest.approx(corner, abs=1e-15)


@pytest.mark.parametrize("ij", [(0, 1), (5, 1), (1, 0), (1, 5)])
def test_paper_corner_range(ij):
    with pytest.raises(IndexError):
        paper_corner(ElementId(*ij), GridSpec(4, 0.1))


@pytest.mark.parametrize("kw", [dict(N=1, eps=0.1), dict(N=4, eps=0.0), dict(N=4, eps=-1.0),
                                dict(N=4, eps=0.1, wind=(1.0, 1.0)), dict(N=4, eps=0.9)])
def test_spec_rejects(kw):
    with pytest.raises(ValueError):
        GridSpec(**kw)


def test_outflow_edges_small():
    assert len(outflow_edges(mesh(2))) == 3
    m3 = outflow_edges(mesh(3))
    assert len(m3) == 6
    # vertical members touch y = 0 or y = 1, horizontal ones touch x = 0
    for e in m3:
        if e.vertical:
            assert e.j in (1, 3)
        else:
            assert e.i == 3


def test_outflow_requires_channel_wind():
    with pytest.raises(UnsupportedWind):
        outflow_edges(mesh(3, wind=(0.0, -1.0)))


def test_outflow_masks_match_edges():
    N = 5
    mx, my = outflow_masks(N)
    assert mx.sum() + my.sum() == 3 * (N - 1)


@given(st.integers(2, 12))
def test_mesh_properties(N):
    m = mesh(N)
    h = m.h
    inner = m.interior_edges()
    assert len(inner) == 2 * N * (N - 1)
    assert len(outflow_edges(m)) == 3 * (N - 1)
    assert m.boundary.sum() == 4 * N
    assert (~m.boundary).sum() == (N - 1) ** 2
    for e in inner:
        assert len(e.elements) == 2
        x0, x1, y0, y1 = m.patch(e)
        assert (x1 - x0) * (y1 - y0) == pytest.approx(2 * h * h)
        assert sorted([x1 - x0, y1 - y0]) == pytest.approx([h, 2 * h])
    for e in m.edges:
        if not e.interior:
            assert len(e.elements) == 1 and not e.outflow
    # index round trip and bijection of corners
    corners = set()
    for el in m.elements:
        a, b = el.cell(N)
        assert ElementId.from_cell(a, b, N) == el
        assert m.element_of_cell(a, b) == el
        x, y = paper_corner(el, m.spec)
        assert np.isclose(x, a * h) and np.isclose(y, b * h)
        assert -1e-12 <= x <= 1 - h + 1e-12 and -1e-12 <= y <= 1 - h + 1e-12
        corners.add((round(x * N), round(y * N)))
    assert len(corners) == N * N
    for p in range(1, N):
        for b in range(N):
            e = m.vertical_edge(p, b)
            assert e.vertical and e.interior


def test_deterministic():
    a, b = mesh(4), mesh(4)
    assert a.elements == b.elements
    assert [e.label for e in a.edges] == [e.label for e in b.edges]
    np.testing.assert_array_equal(a.nodes, b.nodes)
    assert mesh(4).edges[0].label.startswith("S_{")
