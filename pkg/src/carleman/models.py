"""Benchmark systems: the 1-D reaction-diffusion equation with an Allee reaction,
and small synthetic polynomial ODEs for tests.

The semi-discrete Allee model on ``y_i = (i-1) dy``, ``dy = L/(n-1)`` is

    u' = F1 u + F2 u^[2] + F3 u^[3],

with ``F1`` the zero-flux Neumann Laplacian ``kappa/dy^2 * tridiag(1, -2, 1)``
(boundary diagonals ``-1``) plus the linear reaction coefficient on the
diagonal, ``F2 = (1 + a)`` on the ``u_i^2`` columns and ``F3 = -1`` on the
``u_i^3`` columns.

Two conventions are selectable:

* ``reaction="expanded"`` puts ``-a`` on the diagonal, the linear coefficient
  of ``u(1-u)(u-a) = -a u + (1+a) u^2 - u^3``. ``"literal"`` uses ``+a``
  (diagonal ``a - 2 beta``, endpoints ``a - beta``); its top eigenvalue is
  ``+a``, so that model is not dissipative.
* ``initial="inclusive"`` sets ``u_in`` on ``0 <= y < y*``; ``"strict"``
  uses ``0 < y < y*`` and leaves ``y_1 = 0`` at zero.

The presets use ``expanded``/``inclusive``, which give ``R_k^0 = 0.94``
for ``fig1`` and ``20.62`` for ``fig2``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .polyode import PolynomialODE
from .tensor_core import SparseMatrix


@dataclass(frozen=True)
class RDParams:
    n: int = 10
    L: float = 1.0
    a: float = 0.25
    kappa: float | None = None  # None: kappa = dy**2
    u_in: float = 0.03
    y_star: float = 0.3
    T: float = 1.0
    reaction: str = "expanded"
    initial: str = "inclusive"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two grid points")
        if not 0.0 <= self.a <= 0.5:
            raise ValueError("Allee parameter a must lie in [0, 1/2]")
        if not 0.0 < self.y_star < self.L:
            raise ValueError("y_star must lie in (0, L)")
        if self.kappa is not None and self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.reaction not in ("expanded", "literal"):
            raise ValueError("reaction must be 'expanded' or 'literal'")
        if self.initial not in ("inclusive", "strict"):
            raise ValueError("initial must be 'inclusive' or 'strict'")

    @property
    def dy(self):
        return self.L / (self.n - 1)

    @property
    def diffusion(self):
        return self.dy**2 if self.kappa is None else self.kappa

    @property
    def beta(self):
        return self.diffusion / self.dy**2

    def grid(self):
        return np.arange(self.n) * self.dy


PRESETS = {
    "fig1": RDParams(u_in=0.03),
    "fig2": RDParams(u_in=0.5),
    "fig2-alt": RDParams(u_in=0.3),
}


def preset(name, **overrides):
    try:
        base = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides) if overrides else base


def linear_reaction_matrix(p):
    n, beta = p.n, p.beta
    lin = -p.a if p.reaction == "expanded" else p.a
    main = np.full(n, lin - 2.0 * beta)
    main[0] = main[-1] = lin - beta
    off = np.full(n - 1, beta)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def initial_profile(p):
    y = p.grid()
    lower = y >= 0.0 if p.initial == "inclusive" else y > 0.0
    return np.where(lower & (y < p.y_star), p.u_in, 0.0)


def build_reaction_diffusion(p):
    n = p.n
    idx = np.arange(n)
    F2 = sp.coo_array((np.full(n, 1.0 + p.a), (idx, idx * n + idx)), shape=(n, n**2))
    F3 = sp.coo_array((np.full(n, -1.0), (idx, idx * n * n + idx * n + idx)), shape=(n, n**3))
    F = (
        SparseMatrix.zeros(n, 1),
        SparseMatrix(linear_reaction_matrix(p)),
        SparseMatrix(F2),
        SparseMatrix(F3),
    )
    return PolynomialODE(F, initial_profile(p))


def linear_decay_from_reaction(p):
    """Largest eigenvalue of the symmetric tridiagonal ``F1``."""
    return float(np.linalg.eigvalsh(linear_reaction_matrix(p).toarray()).max())


# -- small systems --------------------------------------------------------

def scalar_ode(coeffs, x0):
    """Scalar ``x' = c0 + c1 x + ... + ck x^k``."""
    return PolynomialODE.from_dense([[[c]] for c in coeffs], [x0])


def scalar_logistic(x0=0.5):
    """``x' = -x + x^2``."""
    return scalar_ode([0.0, -1.0, 1.0], x0)


def scalar_cubic(lam=-1.0, c=-0.5, x0=0.8):
    """``x' = lam x + c x^3``."""
    return scalar_ode([0.0, lam, 0.0, c], x0)


def random_polynomial_ode(
    n,
    k,
    seed=0,
    density=0.5,
    scale=0.25,
    dissipation=1.5,
    x0_scale=0.5,
    forcing=True,
):
    """Random sparse system with ``F1 = -dissipation * I + noise``.

    Off-linear coefficients are uniform in ``[-scale, scale]`` on a random
    ``density`` fraction of entries (at least one per matrix).
    """
    rng = np.random.default_rng(seed)
    mats = []
    for i in range(k + 1):
        shape = (n, n**i)
        size = shape[0] * shape[1]
        count = max(1, int(round(density * size)))
        flat = rng.choice(size, size=count, replace=False)
        vals = rng.uniform(-scale, scale, size=count)
        dense = np.zeros(size)
        dense[flat] = vals
        dense = dense.reshape(shape)
        if i == 0 and not forcing:
            dense[:] = 0.0
        if i == 1:
            dense -= dissipation * np.eye(n)
        mats.append(SparseMatrix.from_dense(dense))
    x0 = rng.uniform(-x0_scale, x0_scale, size=n)
    return PolynomialODE(tuple(mats), x0)


def linear_ode(n=2, seed=0, x0_scale=1.0):
    """Stable linear system (``k = 1``) with a symmetric negative-definite ``F1``."""
    rng = np.random.default_rng(seed)
    M = rng.uniform(-0.3, 0.3, size=(n, n))
    F1 = -np.eye(n) + 0.5 * (M + M.T)
    x0 = rng.uniform(-x0_scale, x0_scale, size=n)
    return PolynomialODE.from_dense([np.zeros((n, 1)), F1], x0)
