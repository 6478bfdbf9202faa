"""Forward-Euler discretisation of the truncated Carleman system and its block solve.

Step ``j`` holds ``z^j ~ z(j h)`` with ``z^0 = z0`` (steps are counted from
zero, so ``z^m`` sits at ``t = T``). The ``p`` padding steps copy ``z^m``.

The stacked system ``L Z = B`` is unit block lower-bidiagonal: identity
blocks on the diagonal, ``-(I + h A_N)`` below it for steps ``1..m`` and
``-I`` for the padding steps. Block forward substitution solves it exactly and
stands in for a quantum linear-systems solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BlowUpError, DimensionError, ResidualError, ZeroNormError
from .tensor_core import SparseMatrix, check_capacity, spectral_norm

SOLVE_RTOL = 1e-12
GMRES_RTOL = 1e-10
STABILITY_TARGET = 0.1


@dataclass(frozen=True, eq=False)
class BlockEulerSystem:
    m: int
    p: int
    h: float
    T: float
    n: int
    n_c: int
    L: SparseMatrix
    B: np.ndarray

    @property
    def num_blocks(self):
        return self.m + self.p + 1


@dataclass(frozen=True, eq=False)
class CarlemanSolution:
    """Per-step Carleman states; ``x_extract`` holds the leading ``n`` entries."""

    times: np.ndarray
    z_blocks: np.ndarray
    n: int
    m: int
    p: int = 0

    @property
    def x_extract(self):
        return self.z_blocks[:, : self.n]

    @property
    def final(self):
        return self.z_blocks[self.m, : self.n]


def default_step_count(system, T, target=STABILITY_TARGET):
    """Smallest ``m`` with ``h * ||A_N||_2 <= target``."""
    norm = spectral_norm(system.A_N, tol=1e-4)
    return max(1, math.ceil(T * norm / target))


def _step_times(T, m, p):
    h = T / m
    return np.concatenate([np.arange(m + 1) * h, np.full(p, float(T))])


def euler_integrate(system, T, m):
    """``z^{j+1} = (I + h A_N) z^j + h b`` for ``j = 0..m-1``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    h = T / m
    A = system.A_N.csr
    b = system.b
    out = np.empty((m + 1, system.n_c))
    z = np.array(system.z0, dtype=np.float64)
    out[0] = z
    for j in range(m):
        z = z + h * (A @ z + b)
        if not np.all(np.isfinite(z)):
            raise BlowUpError(f"non-finite Carleman state at step {j + 1}", last_finite_time=j * h, step=j + 1)
        out[j + 1] = z
    return CarlemanSolution(times=_step_times(T, m, 0), z_blocks=out, n=system.n, m=m, p=0)


def rk4_integrate(system, T, steps):
    """Fixed-step RK4 on the truncated Carleman ODE.

    Not part of the linear-system pipeline; used to measure truncation error
    with a time discretisation error far below it.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    h = T / steps
    A = system.A_N.csr
    b = system.b
    f = lambda z: A @ z + b  # noqa: E731
    out = np.empty((steps + 1, system.n_c))
    z = np.array(system.z0, dtype=np.float64)
    out[0] = z
    for j in range(steps):
        k1 = f(z)
        k2 = f(z + 0.5 * h * k1)
        k3 = f(z + 0.5 * h * k2)
        k4 = f(z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise BlowUpError(f"non-finite Carleman state at step {j + 1}", last_finite_time=j * h, step=j + 1)
        out[j + 1] = z
    return CarlemanSolution(times=_step_times(T, steps, 0), z_blocks=out, n=system.n, m=steps, p=0)


def assemble_block(system, T, m, p=None):
    """Stack ``m`` Euler steps and ``p`` copy steps into ``L Z = B`` (``p`` defaults to ``m``)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    p = m if p is None else p
    if p < 0:
        raise ValueError("p must be >= 0")
    nc = system.n_c
    nb = m + p + 1
    total = nb * nc
    check_capacity(total, "block Euler state")
    A = system.A_N.csr
    check_capacity(nb * nc + m * (A.nnz + nc) + p * nc, "L")
    h = T / m

    step = (sp.identity(nc, format="csr") + h * A).tocsr()
    euler_shift = sp.coo_array((np.ones(m), (np.arange(1, m + 1), np.arange(0, m))), shape=(nb, nb))
    copy_shift = sp.coo_array((np.ones(p), (np.arange(m + 1, nb), np.arange(m, nb - 1))), shape=(nb, nb))
    L = (
        sp.identity(total, format="csr")
        - sp.kron(euler_shift, step, format="csr")
        - sp.kron(copy_shift, sp.identity(nc), format="csr")
    )

    B = np.zeros(total)
    B[:nc] = system.z0
    hb = h * system.b
    for j in range(1, m + 1):
        B[j * nc : (j + 1) * nc] = hb
    B.flags.writeable = False
    return BlockEulerSystem(m=m, p=p, h=h, T=float(T), n=system.n, n_c=nc, L=SparseMatrix(L), B=B)


def _forward_substitution(bes):
    nc = bes.n_c
    L = bes.L.csr
    Z = np.zeros(L.shape[0])
    Z[:nc] = bes.B[:nc]
    for j in range(1, bes.num_blocks):
        rows = slice(j * nc, (j + 1) * nc)
        # diagonal block is I and Z_j is still zero, so this is L_{j,j-1} Z_{j-1}
        Z[rows] = bes.B[rows] - L[rows] @ Z
        if not np.all(np.isfinite(Z[rows])):
            raise BlowUpError(f"non-finite block {j} in forward substitution", last_finite_time=(j - 1) * bes.h, step=j)
    return Z


def solve_block(bes, method="substitution"):
    """Solve ``L Z = B``; ``method`` is ``"substitution"`` (exact) or ``"gmres"``."""
    L = bes.L.csr
    if method == "substitution":
        Z = _forward_substitution(bes)
        rtol = SOLVE_RTOL
    elif method == "gmres":
        Z, info = spla.gmres(L, bes.B, rtol=GMRES_RTOL, restart=min(200, L.shape[0]), maxiter=L.shape[0])
        if info != 0:
            raise ResidualError(f"GMRES stopped with info={info}", residual=float("nan"))
        rtol = 10 * GMRES_RTOL
    else:
        raise ValueError(f"unknown method {method!r}")

    bnorm = np.linalg.norm(bes.B)
    residual = np.linalg.norm(L @ Z - bes.B) / (bnorm if bnorm > 0 else 1.0)
    if residual > rtol:
        raise ResidualError(f"relative residual {residual:.3e} exceeds {rtol:.0e}", residual=float(residual))
    blocks = Z.reshape(bes.num_blocks, bes.n_c)
    return CarlemanSolution(times=_step_times(bes.T, bes.m, bes.p), z_blocks=blocks, n=bes.n, m=bes.m, p=bes.p)


def state_preparation_norm(system, T, m):
    """``B_m = ||z_in||^2 + m h^2 ||b||^2``, the squared norm of the right-hand side."""
    h = T / m
    return float(np.dot(system.z0, system.z0) + m * h * h * np.dot(system.b, system.b))


def _unit(v, what):
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ZeroNormError(f"{what} has zero norm")
    return v / norm


def solution_error(sol, ref):
    """Absolute l2 error per step ``0..m`` and the normalised endpoint error.

    ``ref`` is linearly interpolated onto the solution's time grid.
    """
    times = sol.times[: sol.m + 1]
    x = sol.x_extract[: sol.m + 1]
    if ref.states.shape[1] != sol.n:
        raise DimensionError("reference and solution have different state dimensions")
    if times[-1] > ref.times[-1] * (1 + 1e-12) or times[0] < ref.times[0]:
        raise ValueError("reference trajectory does not cover the solution time span")
    ref_x = np.column_stack([np.interp(times, ref.times, col) for col in ref.states.T])
    per_time = np.linalg.norm(x - ref_x, axis=1)
    eps = float(np.linalg.norm(_unit(ref_x[-1], "reference endpoint") - _unit(x[-1], "Carleman endpoint")))
    return per_time, eps


def measured_p(sol, m=None, p=None):
    """``||Z_g||^2 / ||Z||^2`` with ``Z_g`` the first-block entries of steps ``m..m+p``."""
    m = sol.m if m is None else m
    p = sol.p if p is None else p
    if sol.z_blocks.shape[0] != m + p + 1:
        raise DimensionError("solution does not hold m + p + 1 steps")
    total = float(np.sum(sol.z_blocks**2))
    if total == 0.0:
        raise ZeroNormError("solution vector is zero")
    good = float(np.sum(sol.x_extract[m : m + p + 1] ** 2))
    return good / total
