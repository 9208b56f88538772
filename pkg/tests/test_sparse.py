import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from bubblezoom.sparse import (CsrMatrix, NoConvergence, SingularMatrix, SolveOptions, Triplets,
                               compress, matvec, solve_linear)


def poisson(n):
    t = Triplets(n, n)
    for i in range(n):
        t.add(i, i, 2.0)
        if i:
            t.add(i, i - 1, -1.0)
        if i + 1 < n:
            t.add(i, i + 1, -1.0)
    return compress(t)


def test_duplicates_summed():
    t = Triplets(1, 1)
    t.add(0, 0, 1.0)
    t.add(0, 0, 2.0)
    A = compress(t)
    assert A.nnz == 1 and A.data[0] == 3.0


def test_empty():
    A = compress(Triplets(3, 3))
    assert A.nnz == 0
    np.testing.assert_array_equal(A.toarray(), np.zeros((3, 3)))


def test_explicit_zero_kept():
    t = Triplets(2, 2)
    t.add(1, 0, 0.0)
    assert compress(t).nnz == 1


def test_poisson_stencil():
    np.testing.assert_array_equal(poisson(3).toarray(),
                                  [[2, -1, 0], [-1, 2, -1], [0, -1, 2]])


def test_out_of_range():
    t = Triplets(2, 2)
    t.add(2, 0, 1.0)
    with pytest.raises(IndexError):
        compress(t)


def test_matvec_examples():
    x = np.array([1.0, 1.0, 1.0])
    np.testing.assert_array_equal(matvec(poisson(3), x), [1, 0, 1])
    eye = CsrMatrix.from_scipy(sp.identity(3))
    np.testing.assert_array_equal(matvec(eye, x), x)
    np.testing.assert_array_equal(matvec(compress(Triplets(3, 3)), x), 0 * x)
    with pytest.raises(ValueError):
        matvec(eye, np.ones(2))


def test_solve_examples():
    b = np.arange(5.0)
    np.testing.assert_allclose(solve_linear(CsrMatrix.from_scipy(sp.identity(5)), b), b)
    x = solve_linear(poisson(3), np.ones(3))
    np.testing.assert_allclose(x, np.linalg.solve(poisson(3).toarray(), np.ones(3)), rtol=1e-14)
    np.testing.assert_allclose(x, [1.5, 2.0, 1.5], rtol=1e-14)


def test_singular():
    with pytest.raises(SingularMatrix):
        solve_linear(compress(Triplets(3, 3)), np.ones(3))
    t = Triplets(2, 2)
    for i in range(2):
        for j in range(2):
            t.add(i, j, 1.0)
    with pytest.raises(SingularMatrix):
        solve_linear(compress(t), np.array([1.0, 0.0]))


def test_options_validated():
    for kw in (dict(tol=0.0), dict(tol=1.0), dict(max_iter=0)):
        with pytest.raises(ValueError):
            SolveOptions(**kw)


def test_error_types():
    assert issubclass(SingularMatrix, ArithmeticError)
    assert issubclass(NoConvergence, RuntimeError)


@st.composite
def sparse_case(draw):
    n = draw(st.integers(1, 50))
    k = draw(st.integers(0, 4 * n))
    rows = draw(hnp.arrays(np.int64, k, elements=st.integers(0, n - 1)))
    cols = draw(hnp.arrays(np.int64, k, elements=st.integers(0, n - 1)))
    vals = draw(hnp.arrays(float, k, elements=st.floats(-10, 10)))
    x = draw(hnp.arrays(float, n, elements=st.floats(-10, 10)))
    return n, rows, cols, vals, x


@given(sparse_case())
def test_matvec_matches_dense(case):
    n, rows, cols, vals, x = case
    t = Triplets(n, n)
    t.extend(rows, cols, vals)
    A = compress(t)
    dense = np.zeros((n, n))
    np.add.at(dense, (rows, cols), vals)
    np.testing.assert_allclose(A.toarray(), dense, rtol=1e-14, atol=1e-13)
    ref = dense @ x
    got = matvec(A, x)
    scale = np.abs(dense) @ np.abs(x)
    assert np.all(np.abs(got - ref) <= 1e-14 * np.maximum(scale, 1e-300) * 10)
    # structure invariants
    assert np.all(np.diff(A.indptr) >= 0)
    for r in range(n):
        seg = A.indices[A.indptr[r]:A.indptr[r + 1]]
        assert np.all(np.diff(seg) > 0)
    assert A.data.size == A.indptr[-1]


@given(st.integers(0, 2**32 - 1))
def test_residual_contract(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 60))
    A = sp.random(n, n, density=0.2, random_state=rng) + sp.diags(n + rng.random(n))
    b = rng.standard_normal(n)
    M = CsrMatrix.from_scipy(A)
    x = solve_linear(M, b)
    assert np.linalg.norm(matvec(M, x) - b) <= 1e-12 * np.linalg.norm(b)
    np.testing.assert_array_equal(x, solve_linear(M, b))


def test_two_hundred_systems():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        A = sp.random(n, n, density=0.3, random_state=rng) + sp.diags(n + rng.random(n))
        b = rng.standard_normal(n)
        x = solve_linear(A, b)
        assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)
