"""Scalar diagnostics of the Carleman/QLSA complexity analysis.

Every norm is the spectral norm computed by :func:`tensor_core.spectral_norm`.
The complexity expressions are reported numbers only: the ``poly(...)``
factor is represented by the product of its logarithms, each floored at 1.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .engine import assemble_truncated, carleman_dimension
from .errors import DissipationError, SingularMatrixError, ZeroNormError
from .polyode import PolynomialODE, direct_integrate
from .quadratize import lift_dimension, quadratize
from .solver import assemble_block, default_step_count
from .tensor_core import spectral_norm

DENSE_EIG_LIMIT = 64
DENSE_EIG_LIMIT_LIFTED = 256


def _norm(M):
    return spectral_norm(M)


def _check_dissipative(value, what="Re(lambda_1)"):
    if not value < 0:
        raise DissipationError(f"{what} = {value:.6g} is not negative; the linear part is not dissipative")


def _lifted_norm(x0, k):
    """``sqrt(sum_{i=1..k-1} ||x0||^(2i))``."""
    r = float(np.linalg.norm(x0))
    if k == 2:
        return r  # keeps R_k bit-identical to R2 for quadratic systems
    return math.sqrt(sum(r ** (2 * i) for i in range(1, k)))


def _nonlinear_term(ode):
    """``(k-1) sum_{j>=2} ||F_j|| sqrt(sum_i ||x0||^2i)``, shared by R_k and R_k^0."""
    nonlinear = sum(_norm(ode.F[j]) for j in range(2, ode.k + 1))
    return (ode.k - 1) * nonlinear * _lifted_norm(ode.x0, ode.k)


def leading_real_part(M, limit=DENSE_EIG_LIMIT):
    """Largest real part of the eigenvalues of a square sparse matrix.

    Diagonal matrices are read off directly; otherwise a dense eigensolve is
    used up to ``limit`` rows.
    """
    if M.is_diagonal():
        diag = M.csr.diagonal()
        return float(diag.max())
    if M.rows > limit:
        raise ValueError(f"{M.rows}x{M.rows} matrix is too large for a dense eigensolve; pass the value explicitly")
    dense = M.toarray()
    if np.array_equal(dense, dense.T):
        return float(np.linalg.eigvalsh(dense).max())
    return float(np.linalg.eigvals(dense).real.max())


def re_lambda1(ode):
    return leading_real_part(ode.F[1])


def re_lambda1_tilde(ode):
    """Leading real part for the quadratized linear matrix.

    Without forcing it equals ``Re(lambda_1)`` of ``F1``; with forcing the
    lifted matrix is eigensolved densely.
    """
    if ode.is_homogeneous():
        return re_lambda1(ode)
    nq = lift_dimension(ode.n, ode.k)
    if nq > DENSE_EIG_LIMIT_LIFTED:
        raise ValueError(f"lifted dimension {nq} is too large; pass Re(lambda~_1) explicitly")
    return leading_real_part(quadratize(ode).ode.F[1], limit=DENSE_EIG_LIMIT_LIFTED)


def compute_R2(ode, re_lambda1_value=None):
    """``(||x0|| ||F2|| + ||F0|| / ||x0||) / |Re(lambda_1)|`` for a quadratic system."""
    if ode.k != 2:
        raise ValueError("R2 is defined for quadratic systems (k = 2)")
    lam = re_lambda1(ode) if re_lambda1_value is None else float(re_lambda1_value)
    _check_dissipative(lam)
    r = float(np.linalg.norm(ode.x0))
    if r == 0.0:
        raise ZeroNormError("R2 needs a nonzero initial state")
    return (r * _norm(ode.F[2]) + _norm(ode.F[0]) / r) / abs(lam)


def compute_Rk(ode, re_lambda1_tilde_value=None):
    if ode.k < 2:
        raise ValueError("R_k needs k >= 2")
    lam = re_lambda1_tilde(ode) if re_lambda1_tilde_value is None else float(re_lambda1_tilde_value)
    _check_dissipative(lam, "Re(lambda~_1)")
    lifted = _lifted_norm(ode.x0, ode.k)
    if lifted == 0.0:
        raise ZeroNormError("R_k needs a nonzero initial state")
    return (_nonlinear_term(ode) + _norm(ode.F[0]) / lifted) / abs(lam)


def compute_Rk0(ode, re_lambda1_value=None):
    """Homogeneous ratio ``(k-1) sqrt(sum ||x0||^2i) sum_{i>=2} ||F_i|| / |Re(lambda_1)|``."""
    if ode.k < 2:
        raise ValueError("R_k^0 needs k >= 2")
    if not ode.is_homogeneous():
        raise ValueError("R_k^0 is defined only for F0 = 0")
    lam = re_lambda1(ode) if re_lambda1_value is None else float(re_lambda1_value)
    _check_dissipative(lam)
    return _nonlinear_term(ode) / abs(lam)


def rescale_gamma(ode, re_lambda1_value=None):
    """Rescale ``x -> x / gamma`` so that ``||F2|| + ||F0|| < |Re(lambda_1)|`` and ``||x(0)|| < 1``.

    Returns ``(gamma, rescaled_ode)``. A warning is issued when ``R2 >= 1``
    or the resulting system misses either condition.
    """
    if ode.k != 2:
        raise ValueError("gamma rescaling applies to quadratic systems")
    lam = re_lambda1(ode) if re_lambda1_value is None else float(re_lambda1_value)
    _check_dissipative(lam)
    f0, f2 = _norm(ode.F[0]), _norm(ode.F[2])
    r = float(np.linalg.norm(ode.x0))
    if r == 0.0:
        raise ZeroNormError("rescaling needs a nonzero initial state")
    if f2 == 0.0:
        raise ValueError("rescaling is undefined when F2 = 0")
    disc = lam * lam - 4.0 * f2 * f0
    if disc < 0:
        raise ValueError(f"negative discriminant {disc:.6g}: (Re lambda_1)^2 < 4 ||F2|| ||F0||")
    r_plus = (-lam + math.sqrt(disc)) / (2.0 * f2)
    gamma = 1.0 / math.sqrt(r * r_plus)

    rescaled = PolynomialODE((ode.F[0] * gamma, ode.F[1], ode.F[2] / gamma), ode.x0 * gamma)

    r2 = compute_R2(ode, lam)
    if r2 >= 1.0:
        warnings.warn(f"R2 = {r2:.4g} >= 1; the rescaled system need not meet the norm conditions", RuntimeWarning, stacklevel=2)
    elif not (_norm(rescaled.F[2]) + _norm(rescaled.F[0]) < abs(lam) and np.linalg.norm(rescaled.x0) < 1.0):
        warnings.warn("rescaled system misses the norm conditions", RuntimeWarning, stacklevel=2)
    return gamma, rescaled


def decay_ratios(x0, xT, k):
    """``q = ||x0|| / ||xT||`` and its lifted analogue ``q_k``."""
    x0 = np.asarray(x0, dtype=np.float64)
    xT = np.asarray(xT, dtype=np.float64)
    rT = float(np.linalg.norm(xT))
    if rT == 0.0:
        raise ZeroNormError("x(T) is zero; decay ratios are undefined")
    q = float(np.linalg.norm(x0)) / rT
    kk = max(k, 2)
    q_k = _lifted_norm(x0, kk) / _lifted_norm(xT, kk)
    return q, q_k


def p_measure_bound(m, p, N, q):
    """Lower bound ``(p+1) / (9 (m+p+1) N q^2)`` on the post-selection probability."""
    for name, v in (("m", m), ("p", p), ("N", N), ("q", q)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    return (p + 1) / (9.0 * (m + p + 1) * N * q * q)


def _log_floor(x):
    return max(1.0, math.log(x)) if x > 0 else 1.0


def complexity_expression(s_k, T, q_k, eps, k, n):
    """``s_k T^2 q_k / eps * log T * (k-1) log n * log(1/eps)``, logs floored at 1."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    leading = s_k * T * T * q_k / eps
    poly = _log_floor(T) * (k - 1) * _log_floor(n) * _log_floor(1.0 / eps)
    return leading * poly


def condition_estimate(L, tol=1e-6):
    """``||L||_2 ||L^-1||_2``; the inverse norm comes from power iteration on sparse LU solves."""
    if L.rows != L.cols:
        raise ValueError("condition_estimate needs a square matrix")
    norm = spectral_norm(L, tol=tol)
    try:
        lu = spla.splu(L.csr.tocsc())
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from None

    rng = np.random.default_rng(0)
    x = rng.standard_normal(L.rows)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(10_000):
        y = lu.solve(x)
        w = lu.solve(y, trans="T")
        sigma = math.sqrt(float(np.dot(x, w)))
        wn = np.linalg.norm(w)
        if not np.isfinite(wn) or wn == 0.0:
            raise SingularMatrixError("L^-1 application failed")
        x = w / wn
        if est and abs(sigma - est) <= tol * sigma:
            est = sigma
            break
        est = sigma
    return norm * est


@dataclass
class DiagnosticsReport:
    n: int
    k: int
    N: int
    T: float
    re_lambda1: float
    q: float
    q_k: float
    s: int
    s_k: int
    n_c: int
    p_measure_bound: float
    complexity_expr: float
    eps: float
    m: int
    r2: float | None = None
    rk: float | None = None
    rk0: float | None = None
    gamma: float | None = None
    re_lambda1_tilde: float | None = None
    s_quadratized: int | None = None
    cond_estimate: float | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "re_lambda1", "r2", "rk", "rk0", "gamma", "q", "q_k", "s", "s_k",
        "n_c", "cond_estimate", "p_measure_bound", "complexity_expr",
    ],
    "properties": {
        "re_lambda1": {"type": "number"},
        "r2": {"type": ["number", "null"], "minimum": 0},
        "rk": {"type": ["number", "null"], "minimum": 0},
        "rk0": {"type": ["number", "null"], "minimum": 0},
        "gamma": {"type": ["number", "null"]},
        "q": {"type": "number", "minimum": 0},
        "q_k": {"type": "number", "minimum": 0},
        "s": {"type": "integer", "minimum": 0},
        "s_k": {"type": "integer", "minimum": 0},
        "n_c": {"type": "integer", "minimum": 1},
        "cond_estimate": {"type": ["number", "null"]},
        "p_measure_bound": {"type": "number", "minimum": 0},
        "complexity_expr": {"type": "number"},
    },
}


def sparsity(ode):
    return max(F.sparsity() for F in ode.F)


def diagnose(ode, N=3, T=1.0, m=None, eps=0.1, rk4_steps=10_000, re_lambda1_value=None, with_condition=False):
    """Collect every diagnostic scalar for one system into a report."""
    notes = []
    lam = re_lambda1(ode) if re_lambda1_value is None else float(re_lambda1_value)
    if lam >= 0:
        notes.append(f"Re(lambda_1) = {lam:.6g} >= 0: ratios R are undefined")

    def guarded(fn, *args):
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                value = fn(*args)
            notes.extend(str(w.message) for w in caught)
            return value
        except (DissipationError, ZeroNormError, ValueError) as exc:
            notes.append(f"{fn.__name__}: {exc}")
            return None

    r2 = guarded(compute_R2, ode, lam) if ode.k == 2 else None
    gamma = None
    if ode.k == 2:
        res = guarded(rescale_gamma, ode, lam)
        gamma = None if res is None else res[0]
    lam_t = guarded(re_lambda1_tilde, ode) if ode.k >= 2 else None
    rk = guarded(compute_Rk, ode, lam_t) if lam_t is not None else None
    rk0 = guarded(compute_Rk0, ode, lam) if ode.k >= 2 and ode.is_homogeneous() else None
    for name, value in (("R2", r2), ("R_k", rk), ("R_k^0", rk0)):
        if value is not None and value >= 1.0:
            notes.append(f"{name} = {value:.4g} >= 1: outside the sufficient convergence condition")

    traj = direct_integrate(ode, T, rk4_steps)
    q, q_k = decay_ratios(ode.x0, traj.final, ode.k)

    s = sparsity(ode)
    s_k = s * ode.k * (ode.k - 1) // 2 if ode.k >= 2 else s
    s_quad = None
    if ode.k >= 2:
        qd = quadratize(ode).ode
        s_quad = max(qd.F[1].sparsity(), qd.F[2].sparsity())

    system = assemble_truncated(ode, N)
    if m is None:
        m = default_step_count(system, T)
    cond = None
    if with_condition:
        cond = condition_estimate(assemble_block(system, T, m, m).L)

    return DiagnosticsReport(
        n=ode.n,
        k=ode.k,
        N=N,
        T=float(T),
        re_lambda1=lam,
        q=q,
        q_k=q_k,
        s=s,
        s_k=s_k,
        n_c=carleman_dimension(ode.n, N),
        p_measure_bound=p_measure_bound(m, m, N, q),
        complexity_expr=complexity_expression(s_k, T, q_k, eps, max(ode.k, 2), ode.n),
        eps=eps,
        m=int(m),
        r2=r2,
        rk=rk,
        rk0=rk0,
        gamma=gamma,
        re_lambda1_tilde=lam_t,
        s_quadratized=s_quad,
        cond_estimate=cond,
        warnings=notes,
    )
