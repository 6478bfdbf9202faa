"""Transfer matrices and the truncated Carleman linear system.

With ``z_i = x^[i]`` the polynomial ODE lifts to

    z_i' = sum_{j=0..k} A^i_{i+j-1} z_{i+j-1},
    A^i_{i+j-1} = sum_{p=1..i} I^[p-1] (x) F_j (x) I^[i-p].

Null closure at level ``N`` drops every coupling to ``z_c`` with ``c > N``.
The ``j = 0`` coupling of block row 1 multiplies ``z_0 = 1`` and becomes the
constant forcing ``b``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import DimensionError
from .tensor_core import (
    SparseMatrix,
    check_capacity,
    identity_power,
    kron,
    kron_power_vec,
)


def carleman_dimension(n, N):
    """``sum_{i=1..N} n**i``."""
    return sum(n**i for i in range(1, N + 1))


def block_offsets(n, N):
    dims = [n**i for i in range(1, N + 1)]
    return dims, list(np.concatenate([[0], np.cumsum(dims)]).astype(int))


@dataclass(frozen=True, eq=False)
class CarlemanSystem:
    """Truncated system ``z' = A_N z + b`` with ``z(0) = z0``."""

    N: int
    n: int
    block_dims: tuple
    block_offsets: tuple
    A_N: SparseMatrix
    b: np.ndarray
    z0: np.ndarray

    @property
    def n_c(self):
        return self.block_offsets[-1]

    def block(self, z, i):
        """Slice of ``z`` belonging to block ``i`` (1-based)."""
        return z[self.block_offsets[i - 1] : self.block_offsets[i]]

    def block_pattern(self):
        """Set of ``(i, c)`` block coordinates holding a nonzero entry of ``A_N``."""
        r, c, _ = self.A_N.triplets()
        offs = np.asarray(self.block_offsets)
        bi = np.searchsorted(offs, r, side="right")
        bc = np.searchsorted(offs, c, side="right")
        return set(zip(bi.tolist(), bc.tolist()))

    def is_block_upper_hessenberg(self):
        return all(c >= i - 1 for i, c in self.block_pattern())


def transfer_matrix(ode, i, j):
    """``A^i_{i+j-1}`` of dims ``n**i x n**(i+j-1)``, summed over the slot of ``F_j``."""
    if i < 1:
        raise ValueError("block index i must be >= 1")
    if not 0 <= j <= ode.k:
        raise ValueError(f"degree j={j} outside 0..{ode.k}")
    Fj = ode.F[j]
    if i == 1:
        return Fj
    n = ode.n
    check_capacity(Fj.nnz * n ** (i - 1), f"A^{i}_{i + j - 1}")
    out = None
    for p in range(1, i + 1):
        term = kron(kron(identity_power(n, p - 1), Fj), identity_power(n, i - p))
        out = term if out is None else out + term
    return out


def transfer_matrix_recursive(ode, i, j):
    """``A^{i-1}_{i+j-2} (x) I + I^[i-1] (x) F_j``, recursing down to ``A^1_j = F_j``."""
    if i < 2:
        raise ValueError("the recurrence starts at i = 2")
    if not 0 <= j <= ode.k:
        raise ValueError(f"degree j={j} outside 0..{ode.k}")
    n = ode.n
    prev = ode.F[j] if i == 2 else transfer_matrix_recursive(ode, i - 1, j)
    return kron(prev, SparseMatrix.identity(n)) + kron(identity_power(n, i - 1), ode.F[j])


def surviving_couplings(k, N):
    """Block couplings ``(i, j)`` kept by null closure (``j = 0`` on row 1 is the forcing)."""
    kept = []
    for i in range(1, N + 1):
        # full sum for i <= N-k+1, shortened to l = min(k, N+1-i) after that
        for j in range(0, min(k, N + 1 - i) + 1):
            if i == 1 and j == 0:
                continue
            kept.append((i, j))
    return kept


def assemble_truncated(ode, N):
    """Assemble ``A_N``, ``b`` and ``z0`` at truncation level ``N``."""
    if N < 1:
        raise ValueError("truncation level N must be >= 1")
    if N < ode.k - 1:
        warnings.warn(
            f"N={N} < k-1={ode.k - 1}: some block rows keep no nonlinear couplings",
            RuntimeWarning,
            stacklevel=2,
        )
    n = ode.n
    dims, offs = block_offsets(n, N)
    n_c = offs[-1]
    check_capacity(n_c, "Carleman state")

    rows, cols, vals = [], [], []
    for i, j in surviving_couplings(ode.k, N):
        if ode.F[j].is_zero():
            continue
        c = i + j - 1
        block = transfer_matrix(ode, i, j)
        r, cc, v = block.triplets()
        rows.append(r + offs[i - 1])
        cols.append(cc + offs[c - 1])
        vals.append(v)
    nnz = sum(v.size for v in vals)
    check_capacity(nnz, "A_N")
    if vals:
        A = sp.coo_array(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_c, n_c)
        )
    else:
        A = sp.csr_array((n_c, n_c))

    b = np.zeros(n_c)
    b[:n] = ode.forcing
    z0 = np.concatenate([kron_power_vec(ode.x0, i) for i in range(1, N + 1)])
    for arr in (b, z0):
        arr.flags.writeable = False
    return CarlemanSystem(
        N=N,
        n=n,
        block_dims=tuple(dims),
        block_offsets=tuple(int(o) for o in offs),
        A_N=SparseMatrix(A),
        b=b,
        z0=z0,
    )


def carleman_rhs(system, z):
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (system.n_c,):
        raise DimensionError(f"z has shape {z.shape}, expected ({system.n_c},)")
    return system.A_N @ z + system.b


def export_matrix_market(system, path, comment="truncated Carleman generator A_N"):
    scipy.io.mmwrite(str(path), sp.coo_matrix(system.A_N.csr), comment=comment, field="real", precision=17)


def import_matrix_market(path):
    return SparseMatrix(sp.csr_array(scipy.io.mmread(str(path))))
