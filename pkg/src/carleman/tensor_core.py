"""Sparse real matrices, Kronecker products/powers and spectral norms.

All Kronecker products follow the row-major convention

    x (x) y = (x_1 y_1, x_1 y_2, ..., x_1 y_m, x_2 y_1, ..., x_n y_m)

so entry ``(iA * rowsB + iB, jA * colsB + jB)`` of ``A (x) B`` is
``A[iA, jA] * B[iB, jB]``. Every block offset elsewhere in the package relies
on this single convention.

Dense vectors are plain one-dimensional ``numpy`` float arrays.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ConvergenceError, DimensionError

DEFAULT_MAX_ENTRIES = 50_000_000
SPECTRAL_TOL = 1e-10
SPECTRAL_MAXITER = 10_000
SPECTRAL_SEED = 20230517
SPECTRAL_BLOCK = 8

_INDEX_MAX = np.iinfo(np.int64).max


def max_entries():
    """Element-count ceiling, overridable through ``CARLEMAN_MAX_ENTRIES``."""
    value = os.environ.get("CARLEMAN_MAX_ENTRIES")
    if value is None:
        return DEFAULT_MAX_ENTRIES
    return int(float(value))


def check_capacity(count, what="object"):
    count = int(count)
    limit = max_entries()
    if count > limit:
        raise CapacityError(
            f"{what} needs {count} entries, above the ceiling of {limit} "
            "(set CARLEMAN_MAX_ENTRIES to raise it)"
        )
    return count


class SparseMatrix:
    """Immutable real sparse matrix with explicit dimensions.

    Stored in canonical compressed-row form: duplicate coordinates are summed,
    explicit zeros dropped and column indices sorted. Values must be finite.
    """

    __slots__ = ("_csr",)

    def __init__(self, matrix, shape=None):
        csr = sp.csr_array(matrix, shape=shape, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        if not np.all(np.isfinite(csr.data)):
            raise ValueError("sparse matrix entries must be finite")
        for arr in (csr.data, csr.indices, csr.indptr):
            arr.flags.writeable = False
        self._csr = csr

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_triplets(cls, rows, cols, triplets):
        rows, cols = int(rows), int(cols)
        if rows < 0 or cols < 0:
            raise DimensionError("dimensions must be non-negative")
        trip = np.asarray(list(triplets), dtype=np.float64).reshape(-1, 3)
        r = trip[:, 0]
        c = trip[:, 1]
        if np.any(r != np.round(r)) or np.any(c != np.round(c)):
            raise DimensionError("triplet indices must be integers")
        r = r.astype(np.int64)
        c = c.astype(np.int64)
        if trip.shape[0] and (r.min() < 0 or r.max() >= rows or c.min() < 0 or c.max() >= cols):
            raise DimensionError(f"triplet index outside a {rows}x{cols} matrix")
        coo = sp.coo_array((trip[:, 2], (r, c)), shape=(rows, cols))
        return cls(coo)

    @classmethod
    def from_dense(cls, array):
        array = np.atleast_2d(np.asarray(array, dtype=np.float64))
        return cls(array)

    @classmethod
    def identity(cls, n):
        return cls(sp.identity(int(n), format="csr"))

    @classmethod
    def zeros(cls, rows, cols):
        return cls(sp.csr_array((int(rows), int(cols))))

    @classmethod
    def column(cls, values):
        values = np.asarray(values, dtype=np.float64).reshape(-1, 1)
        return cls(values)

    # -- queries ----------------------------------------------------------
    @property
    def csr(self):
        """Read-only compressed-row view (do not mutate)."""
        return self._csr

    @property
    def shape(self):
        return self._csr.shape

    @property
    def rows(self):
        return self._csr.shape[0]

    @property
    def cols(self):
        return self._csr.shape[1]

    @property
    def nnz(self):
        return self._csr.nnz

    def triplets(self):
        """Return ``(row, col, value)`` arrays in row-major order."""
        coo = self._csr.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.copy()

    def row_sparsity(self):
        if self.nnz == 0:
            return 0
        return int(np.diff(self._csr.indptr).max())

    def col_sparsity(self):
        if self.nnz == 0:
            return 0
        return int(np.bincount(self._csr.indices, minlength=self.cols).max())

    def sparsity(self):
        """Max number of nonzeros in any row or column."""
        return max(self.row_sparsity(), self.col_sparsity())

    def is_zero(self):
        return self.nnz == 0

    def is_diagonal(self):
        r, c, _ = self.triplets()
        return bool(np.all(r == c))

    def toarray(self):
        return self._csr.toarray()

    def max_abs(self):
        return float(np.abs(self._csr.data).max()) if self.nnz else 0.0

    # -- algebra ----------------------------------------------------------
    @property
    def T(self):
        return SparseMatrix(self._csr.T)

    def __matmul__(self, other):
        if isinstance(other, SparseMatrix):
            if self.cols != other.rows:
                raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
            return SparseMatrix(self._csr @ other._csr)
        other = np.asarray(other, dtype=np.float64)
        if other.shape[0] != self.cols:
            raise DimensionError(f"cannot multiply {self.shape} by vector of length {other.shape[0]}")
        return self._csr @ other

    def __add__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if self.shape != other.shape:
            raise DimensionError(f"cannot add {self.shape} and {other.shape}")
        return SparseMatrix(self._csr + other._csr)

    def __sub__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if self.shape != other.shape:
            raise DimensionError(f"cannot subtract {other.shape} from {self.shape}")
        return SparseMatrix(self._csr - other._csr)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return SparseMatrix(self._csr * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __neg__(self):
        return self * -1.0

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if self.shape != other.shape or self.nnz != other.nnz:
            return False
        a, b = self._csr, other._csr
        return (
            np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )

    __hash__ = None

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def as_vector(x, name="vector"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def kron(A, B):
    """Kronecker product ``A (x) B`` of two sparse matrices."""
    rows = A.rows * B.rows
    cols = A.cols * B.cols
    if rows > _INDEX_MAX or cols > _INDEX_MAX:
        raise CapacityError(f"kron dimensions {rows}x{cols} overflow the index range")
    check_capacity(A.nnz * B.nnz, "kron result")
    if A.nnz == 0 or B.nnz == 0:
        return SparseMatrix.zeros(rows, cols)
    return SparseMatrix(sp.kron(A.csr, B.csr, format="csr"))


def kron_all(*factors):
    out = factors[0]
    for f in factors[1:]:
        out = kron(out, f)
    return out


def identity_power(n, p):
    """``I_n^{[p]}``, the identity of order ``n**p`` (``p = 0`` gives 1x1)."""
    size = check_capacity(int(n) ** int(p), "identity power")
    return SparseMatrix.identity(size)


def kron_vec(x, y):
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    check_capacity(x.size * y.size, "kron_vec result")
    return np.outer(x, y).ravel()


def kron_power_vec(x, i):
    """``x^{[i]}``; ``x^{[0]}`` is the length-1 vector ``(1,)``."""
    if i < 0:
        raise ValueError("Kronecker power must be non-negative")
    x = as_vector(x, "x")
    check_capacity(x.size ** i, "Kronecker power")
    out = np.ones(1)
    for _ in range(i):
        out = np.outer(x, out).ravel()
    return out


def spectral_norm(A, tol=SPECTRAL_TOL, maxiter=SPECTRAL_MAXITER, seed=SPECTRAL_SEED, block=SPECTRAL_BLOCK):
    """Largest singular value of ``A`` by block power iteration on ``A^T A``.

    A block of ``block`` vectors is iterated with a Rayleigh-Ritz step, so a
    cluster of nearly equal leading singular values does not stall the
    iteration. Matrices with at most one nonzero per row and column
    (diagonal, scaled permutations, the selector matrices of the benchmark)
    have a diagonal Gram matrix; their norm is the largest absolute entry and
    is returned exactly.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if A.nnz == 0:
        return 0.0
    if A.row_sparsity() <= 1 and A.col_sparsity() <= 1:
        return A.max_abs()

    # normalise so the Gram products neither underflow nor overflow
    scale = A.max_abs()
    M = A.csr / scale
    # iterate on the smaller Gram matrix; both share the nonzero spectrum
    if M.shape[0] < M.shape[1]:
        M = M.T.tocsr()
    Mt = M.T.tocsr()
    dim = M.shape[1]
    width = max(1, min(block, dim))
    rng = np.random.default_rng(seed)
    X, _ = np.linalg.qr(rng.standard_normal((dim, width)))

    sigma = 0.0
    prev_delta = None
    for it in range(1, maxiter + 1):
        Y = M @ X
        # Ritz step: the best approximation to sigma_max within span(X)
        _, sv, vt = np.linalg.svd(Y, full_matrices=False)
        new_sigma = float(sv[0])
        if new_sigma == 0.0:
            # X lies in the null space; restart along fresh directions
            X, _ = np.linalg.qr(rng.standard_normal((dim, width)))
            continue
        X, _ = np.linalg.qr(Mt @ (Y @ vt.T))
        delta = abs(new_sigma - sigma) / new_sigma
        sigma = new_sigma
        if delta == 0.0 or width == dim:
            return sigma * scale
        if prev_delta is not None and it > 2:
            rho = min(delta / prev_delta, 0.999999) if prev_delta > 0 else 0.0
            # geometric tail of the remaining increments
            if delta * rho / (1.0 - rho) <= tol and delta <= tol:
                return sigma * scale
        prev_delta = delta
    raise ConvergenceError(
        f"spectral_norm did not converge in {maxiter} iterations", last_iterate=X[:, 0], estimate=sigma * scale
    )
