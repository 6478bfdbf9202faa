"""Degree-k polynomial ODE systems ``x' = F0 + F1 x + F2 x^[2] + ... + Fk x^[k]``."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .errors import BlowUpError, DimensionError, SpecError
from .tensor_core import SparseMatrix, as_vector, check_capacity, kron_power_vec

DEFAULT_RK4_STEPS = 10_000

ODE_SPEC_SCHEMA = {
    "type": "object",
    "required": ["n", "k", "F", "x0"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 1},
        "F": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["degree", "rows", "cols", "triplets"],
                "properties": {
                    "degree": {"type": "integer", "minimum": 0},
                    "rows": {"type": "integer", "minimum": 1},
                    "cols": {"type": "integer", "minimum": 1},
                    "triplets": {
                        "type": "array",
                        "items": {
                            "type": "array",
                            "minItems": 3,
                            "maxItems": 3,
                            "prefixItems": [
                                {"type": "integer", "minimum": 0},
                                {"type": "integer", "minimum": 0},
                                {"type": "number"},
                            ],
                        },
                    },
                },
            },
        },
        "x0": {"type": "array", "items": {"type": "number"}},
    },
}


@dataclass(frozen=True, eq=False)
class PolynomialODE:
    """Coefficients ``F[i]`` (``n x n**i``) and initial state ``x0``.

    ``F[0]`` is stored as an ``n x 1`` matrix so every degree shares one
    carrier type.
    """

    F: tuple
    x0: np.ndarray

    def __post_init__(self):
        F = tuple(self.F)
        if len(F) < 2:
            raise DimensionError("need at least F0 and F1 (degree k >= 1)")
        x0 = as_vector(self.x0, "x0").copy()
        x0.flags.writeable = False
        n = x0.size
        for i, Fi in enumerate(F):
            if not isinstance(Fi, SparseMatrix):
                raise TypeError(f"F[{i}] must be a SparseMatrix")
            if Fi.shape != (n, n**i):
                raise DimensionError(f"F[{i}] has dims {Fi.rows}x{Fi.cols}, expected {n}x{n**i}")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "x0", x0)

    @property
    def n(self):
        return self.x0.size

    @property
    def k(self):
        return len(self.F) - 1

    @property
    def forcing(self):
        """``F0`` as a dense vector of length ``n``."""
        return self.F[0].toarray().ravel()

    def is_homogeneous(self):
        return self.F[0].is_zero()

    def with_x0(self, x0):
        return PolynomialODE(self.F, x0)

    @classmethod
    def from_dense(cls, F, x0):
        x0 = np.asarray(x0, dtype=np.float64)
        n = x0.size
        mats = []
        for i, Fi in enumerate(F):
            Fi = np.asarray(Fi, dtype=np.float64).reshape(n, n**i)
            mats.append(SparseMatrix.from_dense(Fi))
        return cls(tuple(mats), x0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim != 2 or states.shape[0] != times.size:
            raise DimensionError("states must be (len(times), n)")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def final(self):
        return self.states[-1]

    def at(self, t):
        """State at ``t`` by linear interpolation between samples."""
        return np.array([np.interp(t, self.times, col) for col in self.states.T]).T

    def write_csv(self, path):
        write_series_csv(path, self.times, self.states, [f"x{i + 1}" for i in range(self.states.shape[1])])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0] != "t":
                raise SpecError(f"{path}: trajectory CSV must start with a 't' column")
            rows = [[float(v) for v in row] for row in reader if row]
        data = np.array(rows, dtype=np.float64).reshape(-1, len(header))
        return cls(data[:, 0], data[:, 1:])


def write_series_csv(path, times, values, names):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *names])
        for t, row in zip(times, values):
            writer.writerow([f"{t:.17g}", *(f"{v:.17g}" for v in row)])


def ode_to_dict(ode):
    blocks = []
    for i, Fi in enumerate(ode.F):
        r, c, v = Fi.triplets()
        blocks.append(
            {
                "degree": i,
                "rows": Fi.rows,
                "cols": Fi.cols,
                "triplets": [[int(a), int(b), float(x)] for a, b, x in zip(r, c, v)],
            }
        )
    return {"n": ode.n, "k": ode.k, "F": blocks, "x0": [float(v) for v in ode.x0]}


def ode_from_dict(data):
    try:
        jsonschema.validate(data, ODE_SPEC_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SpecError(f"schema violation at {where}: {exc.message}") from None

    n, k = data["n"], data["k"]
    x0 = np.asarray(data["x0"], dtype=np.float64)
    if x0.size != n:
        raise SpecError(f"x0 has length {x0.size}, expected n={n}")
    if not np.all(np.isfinite(x0)):
        raise SpecError("x0 has non-finite entries")

    by_degree = {}
    for block in data["F"]:
        deg = block["degree"]
        if deg > k:
            raise SpecError(f"F[{deg}] exceeds declared degree k={k}")
        if deg in by_degree:
            raise SpecError(f"F[{deg}] given twice")
        expected = (n, n**deg)
        if (block["rows"], block["cols"]) != expected:
            raise SpecError(
                f"F[{deg}] has dims {block['rows']}x{block['cols']}, expected {expected[0]}x{expected[1]}"
            )
        values = [t[2] for t in block["triplets"]]
        if not np.all(np.isfinite(values)):
            raise SpecError(f"F[{deg}] has non-finite entries")
        try:
            by_degree[deg] = SparseMatrix.from_triplets(block["rows"], block["cols"], block["triplets"])
        except (DimensionError, ValueError) as exc:
            raise SpecError(f"F[{deg}]: {exc}") from None

    F = []
    for deg in range(k + 1):
        check_capacity(n ** deg, f"F[{deg}] columns")
        F.append(by_degree.get(deg, SparseMatrix.zeros(n, n**deg)))
    return PolynomialODE(tuple(F), x0)


def load_ode_spec(path):
    """Read and validate an ODE spec JSON file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1].strip() if 0 < exc.lineno <= len(lines) else ""
        raise SpecError(f"{exc.msg} near {context!r}", line=exc.lineno) from None
    return ode_from_dict(data)


def save_ode_spec(ode, path):
    Path(path).write_text(json.dumps(ode_to_dict(ode), indent=1))


def evaluate_rhs(ode, x):
    """``F0 + sum_i F_i x^[i]``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ode.n,):
        raise DimensionError(f"state has shape {x.shape}, expected ({ode.n},)")
    return _rhs(ode.forcing, [F.csr if F.nnz else None for F in ode.F[1:]], x)


def _rhs(forcing, mats, x):
    out = forcing
    power = np.ones(1)
    for Fi in mats:
        # outer().ravel() is the Kronecker product of two vectors, without np.kron's overhead
        power = np.outer(x, power).ravel()
        if Fi is not None:
            out = out + Fi @ power
    return out


def direct_integrate(ode, T, steps=DEFAULT_RK4_STEPS):
    """Classic fixed-step RK4 over ``[0, T]``; returns every intermediate state."""
    if T <= 0:
        raise ValueError("T must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    h = T / steps
    forcing = ode.forcing
    mats = [F.csr if F.nnz else None for F in ode.F[1:]]
    f = lambda y: _rhs(forcing, mats, y)  # noqa: E731
    states = np.empty((steps + 1, ode.n))
    x = np.array(ode.x0, dtype=np.float64)
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore"):  # blow-up is detected below
        for s in range(steps):
            k1 = f(x)
            k2 = f(x + 0.5 * h * k1)
            k3 = f(x + 0.5 * h * k2)
            k4 = f(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise BlowUpError(f"non-finite state at step {s + 1}", last_finite_time=s * h, step=s + 1)
            states[s + 1] = x
    times = np.linspace(0.0, T, steps + 1)
    return Trajectory(times, states)
