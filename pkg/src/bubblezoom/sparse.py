"""Triplet assembly, CSR storage and a linear solve with a residual check.

Factorization and the iterative fallback are delegated to SciPy (SuperLU with
a COLAMD ordering, then restarted GMRES); this module only fixes the data
layout, the summation order and the error contract.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrix(ArithmeticError):
    pass


class NoConvergence(RuntimeError):
    pass


@dataclass
class Triplets:
    n_rows: int
    n_cols: int
    rows: list = field(default_factory=list)
    cols: list = field(default_factory=list)
    vals: list = field(default_factory=list)

    def add(self, i, j, v):
        self.rows.append(int(i))
        self.cols.append(int(j))
        self.vals.append(float(v))

    def extend(self, rows, cols, vals):
        self.rows.extend(np.asarray(rows, dtype=np.int64).ravel().tolist())
        self.cols.extend(np.asarray(cols, dtype=np.int64).ravel().tolist())
        self.vals.extend(np.asarray(vals, dtype=float).ravel().tolist())

    def __len__(self):
        return len(self.vals)


@dataclass(frozen=True)
class CsrMatrix:
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    shape: tuple

    @property
    def n(self):
        return self.shape[0]

    @property
    def nnz(self):
        return int(self.indptr[-1])

    def to_scipy(self):
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    def toarray(self):
        return self.to_scipy().toarray()

    @classmethod
    def from_scipy(cls, A):
        A = sp.csr_matrix(A)
        A.sum_duplicates()
        A.sort_indices()
        return cls(A.indptr.astype(np.int64), A.indices.astype(np.int64),
                   A.data.astype(float), A.shape)


def compress(t: Triplets) -> CsrMatrix:
    """CSR matrix of ``t`` with duplicates summed in insertion order."""
    r = np.asarray(t.rows, dtype=np.int64)
    c = np.asarray(t.cols, dtype=np.int64)
    v = np.asarray(t.vals, dtype=float)
    if r.size and (r.min() < 0 or r.max() >= t.n_rows or c.min() < 0 or c.max() >= t.n_cols):
        raise IndexError("triplet index out of range")
    key = r * t.n_cols + c
    order = np.argsort(key, kind="stable")
    key = key[order]
    v = v[order]
    uniq, start = np.unique(key, return_index=True)
    # sequential summation inside each group keeps results order-deterministic
    sums = np.add.reduceat(v, start) if v.size else v
    rows = uniq // t.n_cols
    cols = uniq % t.n_cols
    indptr = np.zeros(t.n_rows + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    return CsrMatrix(indptr, cols.astype(np.int64), sums, (t.n_rows, t.n_cols))


def matvec(A: CsrMatrix, x) -> np.ndarray:
    """Row-by-row product; each row is summed left to right."""
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[1],):
        raise ValueError("dimension mismatch")
    prod = A.data * x[A.indices]
    out = np.zeros(A.shape[0])
    nz = np.diff(A.indptr) > 0
    if prod.size:
        out[nz] = np.add.reduceat(prod, A.indptr[:-1][nz])
    return out


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-12
    max_iter: int = 2000
    pivot_threshold: float = 1.0

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


def _as_scipy(A):
    if isinstance(A, CsrMatrix):
        return A.to_scipy()
    return sp.csr_matrix(A)


def _residual(A, x, b):
    return np.linalg.norm(A @ x - b)


def solve_linear(A, b, opts: SolveOptions | None = None) -> np.ndarray:
    """Solve ``A x = b`` with ``||A x - b|| <= tol ||b||``.

    ``A`` may be a :class:`CsrMatrix` or any SciPy sparse matrix.
    """
    opts = opts or SolveOptions()
    As = _as_scipy(A)
    b = np.asarray(b, dtype=float)
    n = As.shape[0]
    if As.shape != (n, n) or b.shape != (n,):
        raise ValueError("dimension mismatch")
    bn = np.linalg.norm(b)
    if n == 0 or bn == 0:
        return np.zeros(n)
    if As.nnz == 0:
        raise SingularMatrix("zero matrix")
    try:
        lu = spla.splu(As.tocsc(), permc_spec="COLAMD",
                       diag_pivot_thresh=opts.pivot_threshold)
    except RuntimeError as exc:  # "Factor is exactly singular"
        raise SingularMatrix(str(exc)) from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularMatrix("non-finite solution")
    r = b - As @ x
    # a couple of refinement steps usually bring the residual to round-off
    for _ in range(3):
        if np.linalg.norm(r) <= opts.tol * bn:
            return x
        x = x + lu.solve(r)
        r = b - As @ x
    if np.linalg.norm(r) <= opts.tol * bn:
        return x
    x, info = spla.gmres(As, b, x0=x, rtol=opts.tol, atol=0.0, maxiter=opts.max_iter,
                         M=spla.LinearOperator(As.shape, lu.solve))
    if info != 0 or _residual(As, x, b) > opts.tol * bn:
        rel = _residual(As, x, b) / bn
        if rel > 1e-6:
            raise SingularMatrix(f"relative residual {rel:.2e}: matrix numerically singular")
        raise NoConvergence(f"relative residual {rel:.2e} above {opts.tol:.1e}")
    return x
