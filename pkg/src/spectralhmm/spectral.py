"""Spectral (method-of-moments) recovery of ``O``, ``T`` and ``pi0``.

Pipeline:

1. ``U`` = top-``X`` left singular vectors of ``S21``.
2. ``M_y = (U^T S3y1[y]) (U^T S31)^+`` for each symbol ``y``.  In exact
   arithmetic ``M_y = B diag(O[y, :]) B^{-1}`` with ``B = U^T O T``.
3. Eigendecompose a random combination ``sum_y g_y M_y`` (``g ~ N(0, I)``)
   to get ``B`` up to column scale and order.
4. Row ``y`` of ``O`` is the diagonal of ``B^{-1} M_y B``.  The same ``B`` is
   used for every ``y`` so all rows share one hidden-state order.
5. ``pi = O^+ S1`` and ``T = O^+ S21 (O^+)^T diag(pi)^{-1}``.

Estimates are complex and are never clipped or renormalized.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConditioningError,
    DegenerateEigenvalueError,
    HmmError,
    InsufficientDataError,
    NearSingularPiError,
    NumericalFailureError,
)
from .rng import derive_seed, make_rng

RANK_WARN_RATIO = 1e-13


class RankDeficiencyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SpectralOptions:
    pinv_tol: float = 1e-12
    eig_gap_tol: float = 1e-8
    # g is redrawn while the relative eigenvalue gap is below this target;
    # the widest-gap draw is kept when no draw reaches it.
    eig_gap_target: float = 0.1
    max_resamples: int = 5
    tol_neg: float = 1e-10
    tol_imag: float = 1e-10
    max_cond_B: float = 1e12
    # Replacement for the top-singular-vector projection; called as
    # projection(S21, X) -> Y x X matrix.  None uses top_left_singular.
    projection: object = None


@dataclass(frozen=True)
class ValidityReport:
    stochastic_valid: bool
    max_negative_excess: float
    max_imag_magnitude: float
    max_column_sum_deviation: float
    tol_neg: float
    tol_imag: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class SpectralEstimate:
    O_hat: np.ndarray
    T_hat: np.ndarray
    pi_hat: np.ndarray
    validity: ValidityReport
    g: np.ndarray
    seed: int
    resamples: int = 0
    rank_deficient: bool = False

    @property
    def X(self):
        return self.T_hat.shape[0]

    @property
    def Y(self):
        return self.O_hat.shape[0]

    def to_dict(self):
        def cplx(a):
            return {"real": np.real(a).tolist(), "imag": np.imag(a).tolist()}

        return {
            "X": self.X,
            "Y": self.Y,
            "seed": self.seed,
            "O": cplx(self.O_hat),
            "T": cplx(self.T_hat),
            "pi0": cplx(self.pi_hat),
            "g": self.g.tolist(),
            "resamples": self.resamples,
            "rank_deficient": self.rank_deficient,
            "validity": self.validity.to_dict(),
        }


def _sign_normalize(V):
    """Scale columns to unit norm with the first nonzero entry real positive."""
    V = np.array(V, dtype=np.complex128 if np.iscomplexobj(V) else np.float64)
    norms = np.linalg.norm(V, axis=0)
    norms[norms == 0] = 1.0
    V = V / norms
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size:
            lead = col[nz[0]]
            V[:, j] = col * (np.conj(lead) / abs(lead))
    return V


def _top_left_singular(S21, X):
    S21 = np.asarray(S21, dtype=np.float64)
    if not np.all(np.isfinite(S21)):
        raise NumericalFailureError("S21 has non-finite entries")
    if X > S21.shape[0]:
        raise ValueError(f"X={X} exceeds Y={S21.shape[0]}")
    U, s, _ = np.linalg.svd(S21)
    U = _sign_normalize(U[:, :X])
    ratio = s[X - 1] / s[0] if s[0] > 0 else 0.0
    return U, ratio


def top_left_singular(S21, X):
    """Orthonormal basis of the leading ``X``-dim left singular subspace."""
    U, ratio = _top_left_singular(S21, X)
    if ratio < RANK_WARN_RATIO:
        warnings.warn(
            f"S21 is numerically rank deficient: sigma_X/sigma_1 = {ratio:.2e}",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return U


def pseudo_inverse(M, rel_tol=1e-12):
    """Moore-Penrose pseudo-inverse dropping singular values below ``rel_tol * s_max``."""
    M = np.asarray(M)
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(M.shape[::-1], dtype=M.dtype)
    keep = s >= rel_tol * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (Vh.conj().T * inv) @ U.conj().T


def observable_operators(moments, U, rel_tol=1e-12):
    """The per-symbol products ``(U^T S3y1[y]) (U^T S31)^+``, stacked on axis 0."""
    P = pseudo_inverse(U.T @ moments.S31, rel_tol)
    return np.einsum("ai,yij,jb->yab", U.T, moments.S3y1, P)


def _min_eig_gap(w):
    d = np.abs(w[:, None] - w[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return d.min() if len(w) > 1 else np.inf


def _diagonalize(Ms, B):
    Binv = np.linalg.inv(B)
    return np.einsum("ab,ybc,cd->yad", Binv, Ms, B)


def recover_O(moments, X, seed, opts=None, U=None):
    """Recover the observation matrix through a shared eigenbasis.

    Returns ``(O_hat, B)`` where ``B`` holds the unit-norm eigenvectors of
    the random combination ``sum_y g_y M_y``.  ``g`` is redrawn from a
    derived seed (at most ``opts.max_resamples`` times) while the smallest
    eigenvalue gap is below ``opts.eig_gap_target`` times the spectral
    radius, and the widest-gap draw is used.  If even that draw has a gap
    below ``opts.eig_gap_tol`` the eigenbasis is not identifiable and
    :class:`DegenerateEigenvalueError` is raised.
    """
    O_hat, B, _, _ = _recover_O(moments, X, seed, opts or SpectralOptions(), U)
    return O_hat, B


def _recover_O(moments, X, seed, opts, U=None):
    Y = moments.Y
    if X > Y:
        raise ValueError(f"X={X} exceeds Y={Y}")
    if U is None:
        U = top_left_singular(moments.S21, X)
    Ms = observable_operators(moments, U, opts.pinv_tol)
    if not np.all(np.isfinite(Ms)):
        raise NumericalFailureError("observable operators are not finite")

    best = None
    for attempt in range(opts.max_resamples + 1):
        g_seed = seed if attempt == 0 else derive_seed(seed, "g-resample", attempt)
        g = make_rng(g_seed).standard_normal(Y)
        w, V = np.linalg.eig(np.tensordot(g, Ms, axes=1))
        radius = np.max(np.abs(w))
        rel_gap = _min_eig_gap(w) / radius if radius > 0 else 0.0
        if best is None or rel_gap > best[0]:
            best = (rel_gap, g, V, attempt)
        if rel_gap >= opts.eig_gap_target:
            break
    rel_gap, g, V, attempt = best
    if rel_gap < opts.eig_gap_tol:
        raise DegenerateEigenvalueError(
            f"eigenvalue gap stayed below {opts.eig_gap_tol:g} x spectral radius after {opts.max_resamples} resamples"
        )

    # eig returns a real basis when every eigenvalue is real; staying real keeps imaginary parts exactly zero
    B = _sign_normalize(V)
    condB = np.linalg.cond(B)
    if not np.isfinite(condB) or condB > opts.max_cond_B:
        raise ConditioningError(f"eigenvector matrix is numerically singular (cond={condB:.3e})")
    D = _diagonalize(Ms, B)
    O_hat = np.einsum("yaa->ya", D).astype(np.complex128)
    return O_hat, B.astype(np.complex128), g, attempt


def diagonalization_residual(moments, U, B, rel_tol=1e-12):
    """Largest off-diagonal magnitude of ``B^{-1} M_y B`` over all symbols."""
    D = _diagonalize(observable_operators(moments, U, rel_tol), B)
    off = D.copy()
    idx = np.arange(D.shape[1])
    off[:, idx, idx] = 0
    return float(np.max(np.abs(off)))


def recover_pi_T(O_hat, moments, rel_tol=1e-12):
    """Initial distribution and transition matrix from a recovered ``O``."""
    O_hat = np.asarray(O_hat)
    if np.iscomplexobj(O_hat) and not np.any(O_hat.imag):
        O_hat = O_hat.real
    if not np.all(np.isfinite(O_hat)):
        raise NumericalFailureError("O_hat has non-finite entries")
    Op = pseudo_inverse(O_hat, rel_tol)
    pi_hat = Op @ moments.S1
    scale = max(np.max(np.abs(pi_hat)), 1.0) if pi_hat.size else 1.0
    small = np.flatnonzero(np.abs(pi_hat) < rel_tol * scale)
    if small.size:
        raise NearSingularPiError(f"recovered pi has near-zero entries at {small.tolist()}")
    T_hat = (Op @ moments.S21 @ Op.T) / pi_hat[None, :]
    return pi_hat, T_hat


def validity_check(est, tol_neg=1e-10, tol_imag=1e-10):
    """Summarize sign, imaginary leakage and column-sum drift of an estimate."""
    parts = [np.asarray(est.O_hat).ravel(), np.asarray(est.T_hat).ravel(), np.asarray(est.pi_hat).ravel()]
    allv = np.concatenate(parts)
    neg = float(max(np.max(-np.real(allv)), 0.0)) if allv.size else 0.0
    imag = float(np.max(np.abs(np.imag(allv)))) if allv.size else 0.0
    col_dev = max(
        float(np.max(np.abs(np.sum(est.O_hat, axis=0) - 1.0))),
        float(np.max(np.abs(np.sum(est.T_hat, axis=0) - 1.0))),
        float(abs(np.sum(est.pi_hat) - 1.0)),
    )
    return ValidityReport(
        stochastic_valid=bool(neg <= tol_neg and imag <= tol_imag),
        max_negative_excess=neg,
        max_imag_magnitude=imag,
        max_column_sum_deviation=col_dev,
        tol_neg=tol_neg,
        tol_imag=tol_imag,
    )


def _staged(stage, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except HmmError as exc:
        if exc.stage is None:
            exc.stage = stage
        raise
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(str(exc), stage=stage) from exc


def spectral_learn(moments, X, seed, opts=None):
    """Full spectral estimate of ``(O, T, pi0)`` from a moment set."""
    opts = opts or SpectralOptions()
    if moments.Y < X:
        raise InsufficientDataError(f"need Y >= X, got Y={moments.Y}, X={X}", stage="top_left_singular")
    if opts.projection is None:
        U, ratio = _staged("top_left_singular", _top_left_singular, moments.S21, X)
    else:
        U = _staged("top_left_singular", opts.projection, moments.S21, X)
        ratio = 1.0
    rank_deficient = bool(ratio < RANK_WARN_RATIO)
    O_hat, _, g, attempts = _staged("recover_O", _recover_O, moments, X, seed, opts, U)
    pi_hat, T_hat = _staged("recover_pi_T", recover_pi_T, O_hat, moments, opts.pinv_tol)
    O_hat = O_hat.astype(np.complex128)
    T_hat = np.asarray(T_hat, dtype=np.complex128)
    pi_hat = np.asarray(pi_hat, dtype=np.complex128)
    stub = SpectralEstimate(O_hat, T_hat, pi_hat, None, g, int(seed), attempts, rank_deficient)
    report = validity_check(stub, opts.tol_neg, opts.tol_imag)
    return SpectralEstimate(O_hat, T_hat, pi_hat, report, g, int(seed), attempts, rank_deficient)
