"""Baum-Welch (EM) estimation with a per-step scaled forward-backward pass."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InsufficientDataError, LikelihoodUnderflowError
from .hmm import HmmModel, LOADED_MODEL_TOL, validate_model
from .rng import make_rng

DEFAULT_MAX_ITER = 500
DEFAULT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class EmResult:
    model: HmmModel
    log_likelihood_trace: tuple
    iterations: int
    converged: bool
    reset_columns: int = 0  # zero-posterior columns replaced by uniform, summed over iterations

    @property
    def log_likelihood(self):
        return self.log_likelihood_trace[-1] if self.log_likelihood_trace else float("nan")


def _run_pass(model, obs):
    T = np.ascontiguousarray(model.T)
    O = np.ascontiguousarray(model.O)
    pi = np.ascontiguousarray(model.pi0)
    alpha, beta, c, bad = kernels.forward_backward_pass(T, O, pi, obs)
    if bad >= 0:
        raise LikelihoodUnderflowError(
            f"observation at step {bad + 1} (symbol {obs[bad] + 1}) has zero probability under the model",
            step=int(bad) + 1,
        )
    return T, O, alpha, beta, c


def forward_backward(model, seq):
    """Posterior state marginals for one sequence.

    Returns ``(log_likelihood, gamma, xi)`` where ``gamma[k, j] =
    Pr[x_k = j | y]`` and ``xi[k, i, j] = Pr[x_{k+1} = i, x_k = j | y]``.
    ``xi`` has one slice per transition, so it is ``(n-1) x X x X``.
    """
    if len(seq) < 1:
        raise InsufficientDataError("forward_backward needs at least one observation")
    obs = seq.zero_based()
    T, O, alpha, beta, c = _run_pass(model, obs)
    gamma = alpha * beta
    w = O[obs[1:]] * beta[1:] / c[1:, None]
    xi = w[:, :, None] * T[None, :, :] * alpha[:-1, None, :]
    return float(np.log(c).sum()), gamma, xi


def log_likelihood(model, seq):
    obs = seq.zero_based()
    _, _, _, _, c = _run_pass(model, obs)
    return float(np.log(c).sum())


def _normalize_columns(M):
    sums = M.sum(axis=0)
    dead = sums <= 0
    out = np.empty_like(M)
    out[:, ~dead] = M[:, ~dead] / sums[~dead]
    out[:, dead] = 1.0 / M.shape[0]
    return out, int(dead.sum())


def _m_step(gamma0, trans, emit):
    T, dead_T = _normalize_columns(trans)
    O, dead_O = _normalize_columns(emit)
    pi = gamma0 / gamma0.sum()
    return HmmModel(T, O, pi), dead_T + dead_O


def baum_welch(init, seq, max_iter=DEFAULT_MAX_ITER, ll_rel_tol=DEFAULT_TOL):
    """Fit an HMM to ``seq`` by EM starting from ``init``.

    Each iteration re-estimates the model from the current posteriors and
    then runs the E-step of the new model; its log-likelihood goes into the
    trace, so ``trace[t]`` scores the model after ``t + 1`` re-estimations.
    Iteration stops after ``max_iter`` re-estimations or once the gain over
    the previous model (the initial one for the first step) falls below
    ``ll_rel_tol`` relative to it.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if len(seq) < 2:
        raise InsufficientDataError("baum_welch needs at least two observations")
    if init.Y < seq.Y:
        raise ValueError(f"initial model has Y={init.Y} but the sequence uses Y={seq.Y}")
    init.validated(LOADED_MODEL_TOL)
    obs = np.ascontiguousarray(seq.zero_based())

    T, O, alpha, beta, c = _run_pass(init, obs)
    prev = float(np.log(c).sum())
    trace = []
    resets = 0
    converged = False
    for _ in range(max_iter):
        gamma0, trans, emit = kernels.accumulate_counts(T, O, obs, alpha, beta, c)
        model, dead = _m_step(gamma0, trans, emit)
        resets += dead
        T, O, alpha, beta, c = _run_pass(model, obs)
        ll = float(np.log(c).sum())
        trace.append(ll)
        if ll - prev <= ll_rel_tol * abs(prev):
            converged = True
            break
        prev = ll
    return EmResult(model, tuple(trace), len(trace), converged, resets)


def random_init(X, Y, seed):
    """Random starting point: simplex-uniform columns, uniform ``pi0``."""
    rng = make_rng(seed)
    E = rng.exponential(size=(X, X))
    T = E / E.sum(axis=0)
    E = rng.exponential(size=(Y, X))
    O = E / E.sum(axis=0)
    model = HmmModel(T, O, np.full(X, 1.0 / X))
    assert validate_model(model).valid
    return model
