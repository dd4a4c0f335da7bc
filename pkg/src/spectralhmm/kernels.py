"""Hot inner loops, compiled with numba when available.

Every kernel has two implementations with identical semantics:

* ``*_numba``: explicit loops compiled with ``numba.njit``.
* ``*_numpy``: a pure NumPy/Python version used when numba is missing or
  disabled.

The dispatching names (``markov_states``, ``emit_symbols``,
``count_triplets``, ``forward_backward_pass``, ``accumulate_counts``) pick
one of the two at import time.  Set ``SPECTRALHMM_NUMBA=0`` in the
environment to force the NumPy path.

All kernels use zero-based state and symbol indices.
"""

import bisect
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _numba_requested():
    flag = os.environ.get("SPECTRALHMM_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


USE_NUMBA = HAVE_NUMBA and _numba_requested()
BACKEND = "numba" if USE_NUMBA else "numpy"


def _njit(func):
    if not HAVE_NUMBA:
        return None
    return numba.njit(cache=True, nogil=True)(func)


def cumulative_columns(P):
    """Column-wise cumulative sums with the tail pinned to exactly 1.

    Entries at and after the last positive row of each column are set to
    1.0 so a uniform draw in [0, 1) always lands on a symbol of positive
    probability.
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim == 1:
        return cumulative_columns(P[:, None])[:, 0]
    cum = np.cumsum(P, axis=0)
    for j in range(P.shape[1]):
        positive = np.flatnonzero(P[:, j] > 0)
        last = positive[-1] if positive.size else P.shape[0] - 1
        cum[last:, j] = 1.0
    return np.ascontiguousarray(cum)


# ---------------------------------------------------------------------------
# Markov chain sampling
# ---------------------------------------------------------------------------


def _markov_states_loop(cum_T, x_prev, u):
    n = u.shape[0]
    X = cum_T.shape[0]
    out = np.empty(n, dtype=np.int64)
    x = x_prev
    for k in range(n):
        v = u[k]
        i = 0
        while i < X - 1 and v >= cum_T[i, x]:
            i += 1
        out[k] = i
        x = i
    return out


def markov_states_numpy(cum_T, x_prev, u):
    """Draw ``len(u)`` successive states starting from ``x_prev``."""
    cols = [list(cum_T[:, j]) for j in range(cum_T.shape[1])]
    last = cum_T.shape[0] - 1
    out = np.empty(len(u), dtype=np.int64)
    x = int(x_prev)
    for k, v in enumerate(u.tolist()):
        x = min(bisect.bisect_right(cols[x], v), last)
        out[k] = x
    return out


markov_states_numba = _njit(_markov_states_loop)


def _emit_symbols_loop(cum_O, states, u):
    n = states.shape[0]
    Y = cum_O.shape[0]
    out = np.empty(n, dtype=np.int64)
    for k in range(n):
        x = states[k]
        v = u[k]
        i = 0
        while i < Y - 1 and v >= cum_O[i, x]:
            i += 1
        out[k] = i
    return out


def emit_symbols_numpy(cum_O, states, u):
    """Draw one symbol per state from the corresponding column of ``cum_O``."""
    out = np.empty(len(states), dtype=np.int64)
    last = cum_O.shape[0] - 1
    for j in range(cum_O.shape[1]):
        mask = states == j
        if mask.any():
            idx = np.searchsorted(cum_O[:, j], u[mask], side="right")
            out[mask] = np.minimum(idx, last)
    return out


emit_symbols_numba = _njit(_emit_symbols_loop)


# ---------------------------------------------------------------------------
# Triplet counting
# ---------------------------------------------------------------------------


def _count_triplets_loop(y1, y2, y3, Y):
    c1 = np.zeros(Y, dtype=np.int64)
    c21 = np.zeros((Y, Y), dtype=np.int64)
    c31 = np.zeros((Y, Y), dtype=np.int64)
    c3y1 = np.zeros((Y, Y, Y), dtype=np.int64)
    for k in range(y1.shape[0]):
        a = y1[k]
        b = y2[k]
        c = y3[k]
        c1[a] += 1
        c21[b, a] += 1
        c31[c, a] += 1
        c3y1[b, c, a] += 1
    return c1, c21, c31, c3y1


def count_triplets_numpy(y1, y2, y3, Y):
    """Integer counts of singletons, pairs and triplets.

    Returns ``(c1, c21, c31, c3y1)`` with ``c21[i, j] = #(y2=i, y1=j)``,
    ``c31[i, j] = #(y3=i, y1=j)`` and ``c3y1[y, i, j] = #(y3=i, y2=y, y1=j)``.
    """
    y1 = np.asarray(y1, dtype=np.int64)
    y2 = np.asarray(y2, dtype=np.int64)
    y3 = np.asarray(y3, dtype=np.int64)
    c1 = np.bincount(y1, minlength=Y)
    c21 = np.bincount(y2 * Y + y1, minlength=Y * Y).reshape(Y, Y)
    c31 = np.bincount(y3 * Y + y1, minlength=Y * Y).reshape(Y, Y)
    c3y1 = np.bincount((y2 * Y + y3) * Y + y1, minlength=Y ** 3).reshape(Y, Y, Y)
    return c1, c21, c31, c3y1


count_triplets_numba = _njit(_count_triplets_loop)


# ---------------------------------------------------------------------------
# Scaled forward-backward
# ---------------------------------------------------------------------------


def _forward_backward_loop(T, O, pi, obs):
    n = obs.shape[0]
    X = T.shape[0]
    alpha = np.zeros((n, X))
    beta = np.zeros((n, X))
    c = np.zeros(n)
    bad = -1

    s = 0.0
    for i in range(X):
        alpha[0, i] = pi[i] * O[obs[0], i]
        s += alpha[0, i]
    c[0] = s
    if s <= 0.0:
        return alpha, beta, c, 0
    for i in range(X):
        alpha[0, i] /= s

    for k in range(1, n):
        y = obs[k]
        s = 0.0
        for i in range(X):
            acc = 0.0
            for j in range(X):
                acc += T[i, j] * alpha[k - 1, j]
            acc *= O[y, i]
            alpha[k, i] = acc
            s += acc
        c[k] = s
        if s <= 0.0:
            return alpha, beta, c, k
        for i in range(X):
            alpha[k, i] /= s

    for i in range(X):
        beta[n - 1, i] = 1.0
    for k in range(n - 2, -1, -1):
        y = obs[k + 1]
        for j in range(X):
            acc = 0.0
            for i in range(X):
                acc += T[i, j] * O[y, i] * beta[k + 1, i]
            beta[k, j] = acc / c[k + 1]
    return alpha, beta, c, bad


def forward_backward_numpy(T, O, pi, obs):
    """Scaled forward and backward variables.

    Returns ``(alpha, beta, c, bad)``: ``alpha[k]`` is the filtered state
    distribution, ``c[k]`` the one-step predictive probability of ``obs[k]``
    and ``beta`` the matching scaled backward variables.  ``bad`` is the
    first step with ``c[k] == 0`` (alpha and beta are then incomplete), or
    -1.
    """
    n = obs.shape[0]
    X = T.shape[0]
    alpha = np.zeros((n, X))
    beta = np.zeros((n, X))
    c = np.zeros(n)
    a = pi * O[obs[0]]
    for k in range(n):
        if k > 0:
            a = (T @ alpha[k - 1]) * O[obs[k]]
        s = a.sum()
        c[k] = s
        if s <= 0.0:
            return alpha, beta, c, k
        alpha[k] = a / s
    beta[n - 1] = 1.0
    for k in range(n - 2, -1, -1):
        beta[k] = T.T @ (O[obs[k + 1]] * beta[k + 1]) / c[k + 1]
    return alpha, beta, c, -1


forward_backward_numba = _njit(_forward_backward_loop)


def _accumulate_loop(T, O, obs, alpha, beta, c):
    n = obs.shape[0]
    X = T.shape[0]
    Y = O.shape[0]
    trans = np.zeros((X, X))
    emit = np.zeros((Y, X))
    gamma0 = np.empty(X)
    for j in range(X):
        gamma0[j] = alpha[0, j] * beta[0, j]
    for k in range(n):
        y = obs[k]
        for j in range(X):
            emit[y, j] += alpha[k, j] * beta[k, j]
    for k in range(n - 1):
        y = obs[k + 1]
        inv = 1.0 / c[k + 1]
        for i in range(X):
            w = O[y, i] * beta[k + 1, i] * inv
            for j in range(X):
                trans[i, j] += alpha[k, j] * T[i, j] * w
    return gamma0, trans, emit


def accumulate_counts_numpy(T, O, obs, alpha, beta, c):
    """Expected sufficient statistics from scaled forward-backward output.

    Returns ``(gamma0, trans, emit)``: the posterior of the first state,
    ``trans[i, j] = sum_k Pr[x_{k+1}=i, x_k=j | y]`` and
    ``emit[y, j] = sum_{k: y_k=y} Pr[x_k=j | y]``.
    """
    gamma = alpha * beta
    emit = np.zeros((O.shape[0], T.shape[0]))
    np.add.at(emit, obs, gamma)
    w = O[obs[1:]] * beta[1:] / c[1:, None]
    trans = T * (w.T @ alpha[:-1])
    return gamma[0].copy(), trans, emit


accumulate_counts_numba = _njit(_accumulate_loop)


if USE_NUMBA:
    markov_states = markov_states_numba
    emit_symbols = emit_symbols_numba
    count_triplets = count_triplets_numba
    forward_backward_pass = forward_backward_numba
    accumulate_counts = accumulate_counts_numba
else:
    markov_states = markov_states_numpy
    emit_symbols = emit_symbols_numpy
    count_triplets = count_triplets_numpy
    forward_backward_pass = forward_backward_numpy
    accumulate_counts = accumulate_counts_numpy
