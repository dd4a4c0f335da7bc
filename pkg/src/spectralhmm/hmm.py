"""Hidden Markov model types, validation, sampling and stationary distributions.

Matrices follow the column-stochastic convention throughout:

* ``T[i, j] = Pr[x_{k+1} = i | x_k = j]`` (column j is the source state),
* ``O[i, j] = Pr[y_k = i | x_k = j]`` (column j is the hidden state).

Observation symbols are 1-based (``1..Y``) in every public type and file;
kernels work on zero-based copies.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .errors import (
    GenerationFailureError,
    ModelStructureError,
    ModelValidationError,
    NonUniqueStationaryError,
    NumericalFailureError,
)
from .rng import derive_seed, make_rng

DEFAULT_TOL = 1e-12
LOADED_MODEL_TOL = 1e-9


@dataclass(frozen=True)
class Violation:
    location: str
    constraint: str
    magnitude: float

    def to_dict(self):
        return {"location": self.location, "constraint": self.constraint, "magnitude": self.magnitude}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def valid(self):
        return not self.violations

    def to_dict(self):
        return {"valid": self.valid, "violations": [v.to_dict() for v in self.violations]}


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HmmModel:
    """A discrete HMM ``(T, O, pi0)``.

    Construction checks shapes only; call :func:`validate_model` (or
    :meth:`validated`) to check the stochasticity constraints.
    """

    T: np.ndarray
    O: np.ndarray
    pi0: np.ndarray

    def __post_init__(self):
        T = _frozen(self.T)
        O = _frozen(self.O)
        pi0 = _frozen(self.pi0)
        if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] < 1:
            raise ModelStructureError(f"T must be a non-empty square matrix, got shape {T.shape}")
        if O.ndim != 2 or O.shape[1] != T.shape[0] or O.shape[0] < 1:
            raise ModelStructureError(f"O must be Y x {T.shape[0]}, got shape {O.shape}")
        if pi0.shape != (T.shape[0],):
            raise ModelStructureError(f"pi0 must have length {T.shape[0]}, got shape {pi0.shape}")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "O", O)
        object.__setattr__(self, "pi0", pi0)

    @property
    def X(self):
        return self.T.shape[0]

    @property
    def Y(self):
        return self.O.shape[0]

    def validated(self, tol=DEFAULT_TOL):
        report = validate_model(self, tol)
        if not report.valid:
            raise ModelValidationError(f"model violates stochasticity constraints: {report.to_dict()}", report=report)
        return self

    def permuted(self, perm):
        """Relabel hidden states: new state k is old state ``perm[k]``."""
        perm = np.asarray(perm)
        return HmmModel(self.T[np.ix_(perm, perm)], self.O[:, perm], self.pi0[perm])

    def to_dict(self):
        return {
            "X": self.X,
            "Y": self.Y,
            "T": self.T.tolist(),
            "O": self.O.tolist(),
            "pi0": self.pi0.tolist(),
        }

    def __eq__(self, other):
        if not isinstance(other, HmmModel):
            return NotImplemented
        return (
            np.array_equal(self.T, other.T)
            and np.array_equal(self.O, other.O)
            and np.array_equal(self.pi0, other.pi0)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ObservationSequence:
    """Consecutive observations with symbols in ``1..Y``."""

    symbols: np.ndarray
    Y: int
    seed: Optional[int] = None
    model_id: Optional[str] = field(default=None)

    def __post_init__(self):
        s = np.array(self.symbols, dtype=np.int64).reshape(-1)
        if s.size and (s.min() < 1 or s.max() > self.Y):
            raise ValueError(f"symbols must lie in 1..{self.Y}")
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)

    def __len__(self):
        return self.symbols.shape[0]

    def zero_based(self):
        return self.symbols - 1

    def to_dict(self):
        return {"Y": self.Y, "seed": self.seed, "model_id": self.model_id, "symbols": self.symbols.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["symbols"], dtype=np.int64), int(d["Y"]), d.get("seed"), d.get("model_id"))


def validate_model(model, tol=DEFAULT_TOL):
    """Check every stochasticity constraint of ``model``.

    Reports each column whose sum is off by more than ``tol`` and each entry
    outside ``[-tol, 1 + tol]``, together with the size of the violation.
    """
    if not isinstance(model, HmmModel):
        raise ModelStructureError("validate_model expects an HmmModel")
    violations = []
    for name, M in (("T", model.T), ("O", model.O)):
        dev = np.abs(M.sum(axis=0) - 1.0)
        for j in np.flatnonzero(dev > tol):
            violations.append(Violation(f"{name}[:, {j}]", "column_sum", float(dev[j])))
    pi_dev = abs(model.pi0.sum() - 1.0)
    if pi_dev > tol:
        violations.append(Violation("pi0", "sum", float(pi_dev)))
    for name, M in (("T", model.T), ("O", model.O), ("pi0", model.pi0)):
        below = -M
        above = M - 1.0
        for idx in zip(*np.nonzero(below > tol)):
            violations.append(Violation(f"{name}{list(map(int, idx))}", "nonnegative", float(below[idx])))
        for idx in zip(*np.nonzero(above > tol)):
            violations.append(Violation(f"{name}{list(map(int, idx))}", "at_most_one", float(above[idx])))
    if not all(np.isfinite(M).all() for M in (model.T, model.O, model.pi0)):
        violations.append(Violation("model", "finite", float("inf")))
    return ValidationReport(tuple(violations))


def stationary_distribution(T, tol=1e-10):
    """Stationary distribution of a column-stochastic ``T``.

    Solves ``(T - I) pi = 0`` together with ``sum(pi) = 1``.  Raises
    :class:`NonUniqueStationaryError` when ``T - I`` has a null space of
    dimension above one.
    """
    T = np.asarray(T, dtype=np.float64)
    X = T.shape[0]
    A = T - np.eye(X)
    sv = np.linalg.svd(A, compute_uv=False)
    if X > 1 and sv[-2] <= tol:
        raise NonUniqueStationaryError("non-unique stationary distribution: eigenvalue 1 is not simple")
    lhs = np.vstack([A, np.ones((1, X))])
    rhs = np.zeros(X + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if np.any(pi < -tol) or not np.all(np.isfinite(pi)):
        raise NumericalFailureError(f"stationary solve produced negative mass: {pi}")
    pi = np.clip(pi, 0.0, None)
    total = pi.sum()
    if total <= 0:
        raise NumericalFailureError("stationary solve produced zero mass")
    pi = pi / total
    residual = np.max(np.abs(T @ pi - pi))
    if residual > tol:
        raise NumericalFailureError(f"stationary residual {residual:.3e} exceeds tol {tol:.1e}")
    return pi


_CHUNK = 1 << 20


def sample_sequence(model, length, seed, model_id=None):
    """Sample ``length`` consecutive observations from ``model``.

    ``x_1 ~ pi0``, ``x_{k+1} ~ T[:, x_k]``, ``y_k ~ O[:, x_k]``.  State and
    emission draws come from two independent streams derived from ``seed``.
    """
    model.validated(LOADED_MODEL_TOL)
    length = int(length)
    if length < 1:
        raise ValueError("length must be >= 1")
    cum_T = kernels.cumulative_columns(model.T)
    cum_O = kernels.cumulative_columns(model.O)
    cum_pi = kernels.cumulative_columns(model.pi0)
    rng_x = make_rng(derive_seed(seed, "states"))
    rng_y = make_rng(derive_seed(seed, "emissions"))

    x0 = min(int(np.searchsorted(cum_pi, rng_x.random(), side="right")), model.X - 1)
    states = np.empty(length, dtype=np.int64)
    states[0] = x0
    pos = 1
    while pos < length:
        m = min(_CHUNK, length - pos)
        states[pos:pos + m] = kernels.markov_states(cum_T, states[pos - 1], rng_x.random(m))
        pos += m

    symbols = np.empty(length, dtype=np.int64)
    for start in range(0, length, _CHUNK):
        stop = min(start + _CHUNK, length)
        symbols[start:stop] = kernels.emit_symbols(cum_O, states[start:stop], rng_y.random(stop - start))
    return ObservationSequence(symbols + 1, model.Y, seed=int(seed), model_id=model_id)


def _simplex_columns(rng, rows, cols):
    E = rng.exponential(size=(rows, cols))
    return E / E.sum(axis=0)


def random_model(X, Y, seed, max_retries=8):
    """A random valid model with columns uniform on the simplex.

    ``pi0`` is the stationary distribution of the drawn ``T``.
    """
    if X < 1 or Y < 1:
        raise ValueError("X and Y must be positive")
    for attempt in range(max_retries + 1):
        rng = make_rng(seed if attempt == 0 else derive_seed(seed, "random_model", attempt))
        T = _simplex_columns(rng, X, X)
        O = _simplex_columns(rng, Y, X)
        try:
            pi = stationary_distribution(T)
        except (NonUniqueStationaryError, NumericalFailureError):
            continue
        model = HmmModel(T, O, pi)
        if validate_model(model, DEFAULT_TOL).valid:
            return model
    raise GenerationFailureError(f"could not draw a model with a unique stationary distribution (seed={seed})")


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def model_from_dict(d, tol=LOADED_MODEL_TOL):
    """Build and validate a model from the JSON layout.

    ``T`` and ``O`` are given row-major (``T[i][j]`` is row i).  A missing
    ``pi0`` defaults to the stationary distribution of ``T``.
    """
    try:
        T = np.asarray(d["T"], dtype=np.float64)
        O = np.asarray(d["O"], dtype=np.float64)
    except KeyError as exc:
        raise ModelStructureError(f"model file is missing field {exc}") from None
    X = int(d.get("X", T.shape[0]))
    Y = int(d.get("Y", O.shape[0]))
    if T.shape != (X, X) or O.shape != (Y, X):
        raise ModelStructureError(f"declared X={X}, Y={Y} but T has shape {T.shape} and O has shape {O.shape}")
    if d.get("pi0") is not None:
        pi0 = np.asarray(d["pi0"], dtype=np.float64)
    else:
        probe = HmmModel(T, O, np.full(X, 1.0 / X))
        report = validate_model(probe, tol)
        if not report.valid:
            raise ModelValidationError("model file failed validation", report=report)
        pi0 = stationary_distribution(T)
    model = HmmModel(T, O, pi0)
    report = validate_model(model, tol)
    if not report.valid:
        raise ModelValidationError("model file failed validation", report=report)
    return model


def load_model(path, tol=LOADED_MODEL_TOL):
    with open(path) as fh:
        return model_from_dict(json.load(fh), tol)


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_sequence(path):
    """Read a sequence from JSON (``{"Y", "symbols", ...}``) or CSV.

    The CSV layout is a ``symbol`` header followed by one symbol per line;
    ``Y`` is then taken as the largest symbol seen.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return ObservationSequence.from_dict(json.loads(text))
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if lines and not lines[0].lstrip("-").isdigit():
        lines = lines[1:]
    symbols = np.asarray([int(v) for v in lines], dtype=np.int64)
    return ObservationSequence(symbols, int(symbols.max()) if symbols.size else 1)


def save_sequence(seq, path, fmt="json"):
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(seq.to_dict()) + "\n")
    else:
        with open(path, "w") as fh:
            fh.write("symbol\n")
            np.savetxt(fh, seq.symbols, fmt="%d")
