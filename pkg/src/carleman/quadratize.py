"""Rewrite a degree-k polynomial ODE as a quadratic ODE in ``x~ = (x, x^[2], ..., x^[k-1])``.

Segment ``i`` of the lifted state obeys ``(x^[i])' = sum_j A^i_{i+j-1} x^[i+j-1]``.
Couplings that land on a segment ``c <= k-1`` go into the linear matrix
``F~1``; the rest (``c >= k``) are quadratic and are written as
``x~_m (x) x~_{k-1}`` with ``m = c - k + 1``, which fixes their columns in
``F~2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .engine import assemble_truncated, transfer_matrix
from .errors import DimensionError
from .polyode import PolynomialODE, evaluate_rhs
from .tensor_core import SparseMatrix, as_vector, check_capacity, kron_power_vec

CONSISTENCY_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class QuadraticODE:
    ode: PolynomialODE
    source_n: int
    source_k: int
    segment_offsets: tuple

    @property
    def lift_dim(self):
        return self.segment_offsets[-1]

    def segment(self, xt, i):
        return xt[self.segment_offsets[i - 1] : self.segment_offsets[i]]


def lift_dimension(n, k):
    """``sum_{i=1..k-1} n**i``."""
    return sum(n**i for i in range(1, k))


def lift_state(x, k):
    """Concatenate ``x^[1], ..., x^[k-1]``."""
    if k < 2:
        raise ValueError("lift_state needs k >= 2")
    x = as_vector(x, "x")
    return np.concatenate([kron_power_vec(x, i) for i in range(1, k)])


def quadratize(ode):
    k, n = ode.k, ode.n
    if k < 2:
        raise ValueError("quadratization needs a polynomial of degree k >= 2")
    dims = [n**i for i in range(1, k)]
    offs = [0, *itertools.accumulate(dims)]
    nq = offs[-1]
    check_capacity(nq, "lifted state")
    last = offs[k - 2]  # start of segment k-1
    tail = n ** (k - 1)

    r1, c1, v1 = [], [], []
    r2, c2, v2 = [], [], []
    for i in range(1, k):
        for j in range(0, k + 1):
            c = i + j - 1
            if c < 1 or ode.F[j].is_zero():
                continue  # c = 0 is the forcing of segment 1
            r, cc, v = transfer_matrix(ode, i, j).triplets()
            if c <= k - 1:
                r1.append(r + offs[i - 1])
                c1.append(cc + offs[c - 1])
                v1.append(v)
            else:
                m = c - k + 1
                a, bb = np.divmod(cc, tail)
                r2.append(r + offs[i - 1])
                c2.append((offs[m - 1] + a) * nq + last + bb)
                v2.append(v)

    def build(rows, cols, vals, shape):
        if not vals:
            return SparseMatrix.zeros(*shape)
        check_capacity(sum(v.size for v in vals), "quadratized coefficient")
        return SparseMatrix(
            sp.coo_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)
        )

    F0 = np.zeros((nq, 1))
    F0[:n, 0] = ode.forcing
    Ft = (
        SparseMatrix(F0),
        build(r1, c1, v1, (nq, nq)),
        build(r2, c2, v2, (nq, nq * nq)),
    )
    qode = PolynomialODE(Ft, lift_state(ode.x0, k))
    return QuadraticODE(ode=qode, source_n=n, source_k=k, segment_offsets=tuple(offs))


def lifted_diagonal_spectrum(eigenvalues, k):
    """Sums ``sum_j alpha_j lambda_j`` with ``|alpha| = i`` for ``i = 1..k-1``.

    For diagonal ``F1`` and no forcing these are exactly the diagonal
    entries (and eigenvalues) of ``F~1``.
    """
    eigenvalues = np.asarray(eigenvalues)
    out = []
    for i in range(1, k):
        for combo in itertools.combinations_with_replacement(range(eigenvalues.size), i):
            out.append(eigenvalues[list(combo)].sum())
    return np.array(out)


def rhs_consistency_check(ode, q, trials=10, seed=0):
    """Compare the quadratized right-hand side against the original one at random states."""
    if q.source_n != ode.n or q.source_k != ode.k:
        raise DimensionError("quadratic system does not match the given ODE")
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_segments = 0.0
    for _ in range(trials):
        x = rng.standard_normal(ode.n)
        xt = lift_state(x, ode.k)
        got = evaluate_rhs(q.ode, xt)
        ref = evaluate_rhs(ode, x)
        scale = max(1.0, float(np.abs(ref).max()))
        worst = max(worst, float(np.abs(got[: ode.n] - ref).max()) / scale)
        # every segment i must carry d/dt x^[i]
        for i in range(1, ode.k):
            seg_ref = sum(
                transfer_matrix(ode, i, j) @ kron_power_vec(x, i + j - 1) for j in range(ode.k + 1)
            )
            seg = q.segment(got, i)
            s = max(1.0, float(np.abs(seg_ref).max()))
            worst_segments = max(worst_segments, float(np.abs(seg - seg_ref).max()) / s)
    return {
        "max_discrepancy": worst,
        "max_segment_discrepancy": worst_segments,
        "trials": int(trials),
        "rtol": CONSISTENCY_RTOL,
        "passed": bool(worst <= CONSISTENCY_RTOL and worst_segments <= CONSISTENCY_RTOL),
    }


def _euler_first_block(system, T, steps):
    from .solver import euler_integrate

    return euler_integrate(system, T, steps).x_extract


def equivalence_check(ode, N, T, h):
    """Forward-Euler comparison of CL(quadratize(ode), N) and CL(ode, N(k-1)).

    Both runs use the same step; the report holds the largest l2 gap
    between their first ``n`` components over all time steps.
    """
    if ode.k < 2:
        raise ValueError("equivalence_check needs k >= 2")
    if N < 1:
        raise ValueError("N must be >= 1")
    steps = max(1, int(round(T / h)))
    N_prime = N * (ode.k - 1)
    q = quadratize(ode)
    quad = assemble_truncated(q.ode, N)
    direct = assemble_truncated(ode, N_prime)
    xq = _euler_first_block(quad, T, steps)[:, : ode.n]
    xd = _euler_first_block(direct, T, steps)
    gap = np.linalg.norm(xq - xd, axis=1)
    return {
        "max_discrepancy": float(gap.max()),
        "trials": 1,
        "N": int(N),
        "N_prime": int(N_prime),
        "T": float(T),
        "h": float(T / steps),
        "steps": int(steps),
        "quadratic_cl_dim": int(quad.n_c),
        "direct_cl_dim": int(direct.n_c),
    }
