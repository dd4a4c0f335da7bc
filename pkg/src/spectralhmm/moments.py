"""Exact and empirical low-order moments of an HMM observation process.

Index conventions (all 0-based in arrays):

* ``S1[i]       = Pr[y1 = i]``
* ``S21[i, j]   = Pr[y2 = i, y1 = j]``
* ``S31[i, j]   = Pr[y3 = i, y1 = j]``
* ``S3y1[y][i, j] = Pr[y3 = i, y2 = y, y1 = j]``
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InsufficientDataError
from .hmm import DEFAULT_TOL, LOADED_MODEL_TOL


@dataclass(frozen=True, eq=False)
class MomentSet:
    S1: np.ndarray
    S21: np.ndarray
    S31: np.ndarray
    S3y1: np.ndarray  # shape (Y, Y, Y), S3y1[y] is the Y x Y slice for middle symbol y
    sample_count: int = 0

    @property
    def Y(self):
        return self.S1.shape[0]

    @property
    def exact(self):
        return self.sample_count == 0

    def to_dict(self):
        return {
            "Y": self.Y,
            "n": int(self.sample_count),
            "S1": self.S1.tolist(),
            "S21": self.S21.tolist(),
            "S31": self.S31.tolist(),
            "S3y1": self.S3y1.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        Y = int(d["Y"])
        m = cls(
            np.asarray(d["S1"], dtype=np.float64),
            np.asarray(d["S21"], dtype=np.float64),
            np.asarray(d["S31"], dtype=np.float64),
            np.asarray(d["S3y1"], dtype=np.float64),
            int(d.get("n", 0)),
        )
        if m.S1.shape != (Y,) or m.S21.shape != (Y, Y) or m.S31.shape != (Y, Y) or m.S3y1.shape != (Y, Y, Y):
            raise ValueError(f"moment arrays do not match Y={Y}")
        return m


@dataclass(frozen=True, eq=False)
class TripletMultiset:
    """Triplets ``(y1, y2, y3)`` stored column-wise, symbols in ``1..Y``.

    The columns are usually strided views into the source sequence, so
    building a multiset from a long sequence does not copy it.
    """

    y1: np.ndarray
    y2: np.ndarray
    y3: np.ndarray
    Y: int

    def __len__(self):
        return self.y1.shape[0]

    @property
    def triples(self):
        return np.column_stack([self.y1, self.y2, self.y3])

    @classmethod
    def from_triples(cls, triples, Y):
        t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 1 or t.max() > Y):
            raise ValueError(f"triplet symbols must lie in 1..{Y}")
        return cls(t[:, 0], t[:, 1], t[:, 2], int(Y))


def exact_moments(model):
    """Analytic moments of a model started in ``pi0``."""
    model.validated(LOADED_MODEL_TOL)
    T, O, pi = model.T, model.O, model.pi0
    D = np.diag(pi)
    OT = O @ T
    S1 = O @ pi
    S21 = OT @ D @ O.T
    S31 = OT @ T @ D @ O.T
    right = T @ D @ O.T
    S3y1 = np.einsum("ix,yx,xj->yij", OT, O, right)
    return MomentSet(S1, S21, S31, S3y1, 0)


def _require_length(seq, n=3):
    if len(seq) < n:
        raise InsufficientDataError(f"need at least {n} observations, got {len(seq)}")


def triplets_sliding(seq):
    """All overlapping windows ``(y_k, y_{k+1}, y_{k+2})``."""
    _require_length(seq)
    s = seq.symbols
    return TripletMultiset(s[:-2], s[1:-1], s[2:], seq.Y)


def triplets_independent(seq):
    """Disjoint consecutive windows ``(y_{3k+1}, y_{3k+2}, y_{3k+3})``."""
    _require_length(seq)
    m = len(seq) // 3
    s = seq.symbols[: 3 * m]
    return TripletMultiset(s[0::3], s[1::3], s[2::3], seq.Y)


TRIPLET_SCHEMES = {"sliding": triplets_sliding, "independent": triplets_independent}


def estimate_moments(triples, check=__debug__):
    """Relative frequencies of singletons, pairs and triplets."""
    n = len(triples)
    if n == 0:
        raise InsufficientDataError("cannot estimate moments from an empty triplet multiset")
    Y = triples.Y
    c1, c21, c31, c3y1 = kernels.count_triplets(
        np.ascontiguousarray(triples.y1) - 1,
        np.ascontiguousarray(triples.y2) - 1,
        np.ascontiguousarray(triples.y3) - 1,
        Y,
    )
    if check:
        assert np.array_equal(c3y1.sum(axis=0), c31), "sum over middle symbol must reproduce S31 counts"
    return MomentSet(c1 / n, c21 / n, c31 / n, c3y1 / n, n)


def check_moment_set(m, tol=1e-9):
    """Return a list of violated MomentSet invariants (empty when consistent)."""
    problems = []
    if np.any(m.S1 < -DEFAULT_TOL):
        problems.append("S1 has negative entries")
    for name, total in (("S1", m.S1.sum()), ("S21", m.S21.sum()), ("S31", m.S31.sum()), ("S3y1", m.S3y1.sum())):
        if abs(total - 1.0) > tol:
            problems.append(f"{name} sums to {total!r}")
    gap = np.max(np.abs(m.S3y1.sum(axis=0) - m.S31))
    if gap > 1e-12:
        problems.append(f"sum_y S3y1 differs from S31 by {gap:.3e}")
    return problems


def save_moments(m, path):
    Path(path).write_text(json.dumps(m.to_dict()) + "\n")


def load_moments(path):
    return MomentSet.from_dict(json.loads(Path(path).read_text()))
