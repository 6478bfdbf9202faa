import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carleman.errors import CapacityError, ConvergenceError, DimensionError
from carleman.tensor_core import (
    SparseMatrix,
    check_capacity,
    identity_power,
    kron,
    kron_all,
    kron_power_vec,
    kron_vec,
    max_entries,
    spectral_norm,
)

from strategies import as_sparse, dense_kron, dense_kron_power, sparse_dense, vectors


# -- SparseMatrix ------------------------------------------------------------

def test_triplets_sum_duplicates_and_drop_zeros():
    M = SparseMatrix.from_triplets(2, 3, [(0, 1, 2.0), (0, 1, 3.0), (1, 2, 0.0), (1, 0, -1.0)])
    assert M.nnz == 2
    np.testing.assert_array_equal(M.toarray(), [[0, 5, 0], [-1, 0, 0]])


def test_triplet_index_out_of_range():
    with pytest.raises(DimensionError):
        SparseMatrix.from_triplets(2, 2, [(2, 0, 1.0)])


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        SparseMatrix.from_dense([[np.nan, 0.0]])


def test_storage_is_read_only():
    M = SparseMatrix.from_dense([[1.0, 2.0]])
    with pytest.raises(ValueError):
        M.csr.data[0] = 5.0


def test_sparsity_counts_rows_and_columns():
    M = SparseMatrix.from_dense([[1, 0, 0], [1, 0, 0], [1, 1, 0]])
    assert M.row_sparsity() == 2
    assert M.col_sparsity() == 3
    assert M.sparsity() == 3


def test_matmul_dimension_mismatch():
    with pytest.raises(DimensionError):
        SparseMatrix.identity(2) @ np.ones(3)


@given(sparse_dense(), sparse_dense())
def test_canonical_equality_matches_dense(a, b):
    A, B = as_sparse(a), as_sparse(b)
    assert (A == B) == (a.shape == b.shape and np.array_equal(a, b))


# -- kron ----------------------------------------------------------------------

def test_kron_identity():
    assert kron(SparseMatrix.identity(2), SparseMatrix.identity(2)) == SparseMatrix.identity(4)


def test_kron_small_example():
    A = SparseMatrix.from_dense([[1, 2], [3, 4]])
    B = SparseMatrix.from_dense([[0, 1], [1, 0]])
    K = kron(A, B).toarray()
    np.testing.assert_array_equal(K[0], [0, 1, 0, 2])
    np.testing.assert_array_equal(K[:2, :2], [[0, 1], [1, 0]])


def test_kron_random_rectangular_against_loop():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((3, 2)) * (rng.random((3, 2)) < 0.6)
    b = rng.standard_normal((2, 3)) * (rng.random((2, 3)) < 0.6)
    np.testing.assert_array_equal(kron(as_sparse(a), as_sparse(b)).toarray(), dense_kron(a, b))


@given(sparse_dense(), sparse_dense())
def test_kron_matches_loop_oracle(a, b):
    K = kron(as_sparse(a), as_sparse(b))
    assert K.shape == (a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])
    np.testing.assert_array_equal(K.toarray(), dense_kron(a, b))


@given(sparse_dense(3, 3), sparse_dense(3, 3), sparse_dense(2, 2))
def test_kron_associative(a, b, c):
    A, B, C = map(as_sparse, (a, b, c))
    left = kron(kron(A, B), C).toarray()
    right = kron(A, kron(B, C)).toarray()
    np.testing.assert_allclose(left, right, rtol=1e-15, atol=0)


@given(sparse_dense(3, 3), sparse_dense(3, 3), sparse_dense(3, 3), sparse_dense(3, 3))
def test_kron_mixed_product(a, b, c, d):
    if a.shape[1] != c.shape[0] or b.shape[1] != d.shape[0]:
        return
    A, B, C, D = map(as_sparse, (a, b, c, d))
    lhs = (kron(A, B) @ kron(C, D)).toarray()
    rhs = kron(A @ C, B @ D).toarray()
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_kron_all_and_identity_power():
    assert identity_power(3, 0).shape == (1, 1)
    assert kron_all(*[SparseMatrix.identity(2)] * 3) == identity_power(2, 3)


def test_kron_capacity(monkeypatch):
    monkeypatch.setenv("CARLEMAN_MAX_ENTRIES", "10")
    assert max_entries() == 10
    A = SparseMatrix.from_dense(np.ones((4, 4)))
    with pytest.raises(CapacityError):
        kron(A, A)
    with pytest.raises(CapacityError):
        check_capacity(11)


# -- vectors -------------------------------------------------------------------

def test_kron_vec_examples():
    np.testing.assert_array_equal(kron_vec([1, 0], [5, 7]), [5, 7, 0, 0])
    np.testing.assert_array_equal(kron_vec([1, 2], [3, 4]), [3, 4, 6, 8])


@given(vectors(), vectors())
def test_kron_vec_norm_multiplicative(x, y):
    lhs = np.linalg.norm(kron_vec(x, y))
    assert lhs == pytest.approx(np.linalg.norm(x) * np.linalg.norm(y), rel=1e-12, abs=1e-300)


def test_kron_power_examples():
    np.testing.assert_array_equal(kron_power_vec([3.0, 4.0], 0), [1.0])
    np.testing.assert_array_equal(kron_power_vec([2.0, 1.0], 2), [4, 2, 2, 1])


@given(vectors(max_size=3), st.integers(0, 4))
def test_kron_power_against_loop_and_norm(x, i):
    p = kron_power_vec(x, i)
    np.testing.assert_allclose(p, dense_kron_power(x, i), rtol=1e-14, atol=0)
    assert np.linalg.norm(p) == pytest.approx(np.linalg.norm(x) ** i, rel=1e-12, abs=1e-300)


@given(vectors(max_size=3), st.integers(0, 3))
def test_kron_power_recursion_is_exact(x, i):
    np.testing.assert_array_equal(kron_power_vec(x, i + 1), kron_vec(x, kron_power_vec(x, i)))


def test_kron_power_negative():
    with pytest.raises(ValueError):
        kron_power_vec([1.0], -1)


# -- spectral norm -------------------------------------------------------------

def test_spectral_norm_examples():
    assert spectral_norm(SparseMatrix.from_dense(np.diag([3.0, -5.0]))) == 5.0
    assert spectral_norm(SparseMatrix.from_dense([[0.0, 1.0], [0.0, 0.0]])) == 1.0
    assert spectral_norm(SparseMatrix.zeros(3, 2)) == 0.0


@settings(max_examples=60)
@given(sparse_dense(5, 5))
def test_spectral_norm_matches_svd(a):
    expected = np.linalg.norm(a, 2)
    got = spectral_norm(as_sparse(a), tol=1e-10)
    assert got == pytest.approx(expected, rel=1e-6, abs=1e-12)


@settings(max_examples=60)
@given(sparse_dense(3, 3), sparse_dense(3, 3))
def test_spectral_norm_kron_multiplicative(a, b):
    A, B = as_sparse(a), as_sparse(b)
    tol = 1e-10
    lhs = spectral_norm(kron(A, B), tol=tol)
    rhs = spectral_norm(A, tol=tol) * spectral_norm(B, tol=tol)
    assert abs(lhs - rhs) <= 1e-6 * max(1.0, rhs)


def test_spectral_norm_clustered_top_values():
    # leading singular values 1 and 1 - 1e-4 stall single-vector iteration
    rng = np.random.default_rng(2)
    U, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    V, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    sv = np.concatenate([[1.0, 1.0 - 1e-4], np.linspace(0.9, 0.1, 28)])
    A = SparseMatrix.from_dense(U @ np.diag(sv) @ V.T)
    assert spectral_norm(A, tol=1e-10) == pytest.approx(1.0, rel=1e-10)


def test_kron_sparsity_counts():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((4, 3)) * (rng.random((4, 3)) < 0.5)
    b = rng.standard_normal((3, 5)) * (rng.random((3, 5)) < 0.5)
    A, B = as_sparse(a), as_sparse(b)
    K = kron(A, B)
    assert K.nnz == A.nnz * B.nnz
    assert K.row_sparsity() == A.row_sparsity() * B.row_sparsity()


def test_spectral_norm_nonconvergence_reports_iterate():
    rng = np.random.default_rng(1)
    A = SparseMatrix.from_dense(rng.standard_normal((60, 60)))
    with pytest.raises(ConvergenceError) as info:
        spectral_norm(A, tol=1e-16, maxiter=2)
    assert info.value.last_iterate.shape == (60,)
    assert info.value.estimate > 0
