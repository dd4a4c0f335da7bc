"""Permutation alignment, error measures and conditioning diagnostics."""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError

MAX_ALIGN_STATES = 10


def mse(A, A_hat):
    """Mean of ``|A - A_hat|**2`` over all entries (complex modulus)."""
    A = np.asarray(A)
    A_hat = np.asarray(A_hat)
    if A.shape != A_hat.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {A_hat.shape}")
    if A.size == 0:
        return 0.0
    return float(np.mean(np.abs(A - A_hat) ** 2))


@dataclass(frozen=True, eq=False)
class AlignedEstimate:
    """An estimate relabelled to the truth's hidden-state order.

    ``permutation[k]`` is the estimate's state that lines up with true
    state ``k``.
    """

    permutation: tuple
    O_aligned: np.ndarray
    T_aligned: np.ndarray
    pi_aligned: np.ndarray
    mse_O: float
    mse_T: float
    mse_pi: float

    def unpermute(self):
        """Undo the relabelling, returning ``(O_hat, T_hat, pi_hat)``."""
        inv = np.argsort(self.permutation)
        return self.O_aligned[:, inv], self.T_aligned[np.ix_(inv, inv)], self.pi_aligned[inv]

    def summary(self):
        return {
            "permutation": list(self.permutation),
            "mse_O": self.mse_O,
            "mse_T": self.mse_T,
            "mse_pi": self.mse_pi,
        }


def _estimate_arrays(est):
    if hasattr(est, "O_hat"):
        return np.asarray(est.O_hat), np.asarray(est.T_hat), np.asarray(est.pi_hat)
    return np.asarray(est.O), np.asarray(est.T), np.asarray(est.pi0)


def align_permutation(truth, est):
    """Relabel ``est`` to minimize ``mse_O + mse_T`` against ``truth``.

    Every one of the ``X!`` permutations is tried in lexicographic order
    and the first minimizer wins.
    """
    O_hat, T_hat, pi_hat = _estimate_arrays(est)
    X = truth.X
    if O_hat.shape != truth.O.shape or T_hat.shape != truth.T.shape or pi_hat.shape != truth.pi0.shape:
        raise AlignmentError(
            f"estimate shapes {O_hat.shape}, {T_hat.shape} do not match truth {truth.O.shape}, {truth.T.shape}"
        )
    if X > MAX_ALIGN_STATES:
        raise AlignmentError(f"refusing exhaustive alignment over {X}! permutations")

    # Squared errors of every (true column, estimated column) pairing for O,
    # and of every entry pairing for T, so each candidate is a cheap gather.
    dO = (np.abs(truth.O[:, :, None] - O_hat[:, None, :]) ** 2).sum(axis=0)
    dT = np.abs(truth.T[:, None, :, None] - T_hat[None, :, None, :]) ** 2

    best = None
    best_perm = None
    rows = np.arange(X)
    for perm in itertools.permutations(range(X)):
        p = np.asarray(perm)
        cost = dO[rows, p].sum() / O_hat.size + dT[rows[:, None], p[:, None], rows[None, :], p[None, :]].sum() / T_hat.size
        # costs equal up to summation-order rounding count as ties
        if best is None or cost < best * (1 - 1e-12):
            best = cost
            best_perm = p
    p = best_perm
    O_al = O_hat[:, p]
    T_al = T_hat[np.ix_(p, p)]
    pi_al = pi_hat[p]
    return AlignedEstimate(
        tuple(int(i) for i in p),
        O_al,
        T_al,
        pi_al,
        mse(truth.O, O_al),
        mse(truth.T, T_al),
        mse(truth.pi0, pi_al),
    )


def cond_OT(model):
    """2-norm condition number of ``O @ T``; ``inf`` when numerically rank deficient."""
    M = model.O @ model.T
    s = np.linalg.svd(M, compute_uv=False)
    smax, smin = s[0], s[-1]
    if smin < 1e-300 or smin <= smax * max(M.shape) * np.finfo(float).eps:
        return float("inf")
    return float(smax / smin)


def validity_fraction(reports):
    """Fraction of reports flagged as not stochastically valid."""
    reports = list(reports)
    if not reports:
        raise ValueError("validity_fraction needs at least one report")
    return sum(not r.stochastic_valid for r in reports) / len(reports)
