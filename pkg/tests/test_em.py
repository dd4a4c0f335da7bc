import itertools
import math

import numpy as np
import pytest

from spectralhmm.em import baum_welch, forward_backward, log_likelihood, random_init
from spectralhmm.errors import InsufficientDataError, LikelihoodUnderflowError
from spectralhmm.evaluation import align_permutation
from spectralhmm.hmm import HmmModel, ObservationSequence, random_model, sample_sequence, validate_model
from spectralhmm.systems import get_example


def brute_force_ll(model, symbols):
    """log Pr[y] summed over every hidden path."""
    y = np.asarray(symbols) - 1
    total = 0.0
    for path in itertools.product(range(model.X), repeat=len(y)):
        p = model.pi0[path[0]] * model.O[y[0], path[0]]
        for k in range(1, len(y)):
            p *= model.T[path[k], path[k - 1]] * model.O[y[k], path[k]]
        total += p
    return math.log(total)


def unscaled_forward_ll(model, symbols):
    y = np.asarray(symbols) - 1
    a = model.O[y[0]] * model.pi0
    for k in range(1, len(y)):
        a = model.O[y[k]] * (model.T @ a)
    return math.log(a.sum())


class TestForwardBackward:
    def test_forced_path(self, two_state):
        ll, gamma, xi = forward_backward(two_state, ObservationSequence([1, 1], 2))
        assert ll == pytest.approx(math.log(2 / 3 * 0.9), abs=1e-14)
        np.testing.assert_allclose(gamma, [[1, 0], [1, 0]], atol=1e-15)
        assert xi.shape == (1, 2, 2) and xi[0, 0, 0] == pytest.approx(1.0)

    def test_single_state(self):
        o = np.array([0.2, 0.3, 0.5])
        m = HmmModel([[1.0]], o[:, None], [1.0])
        s = ObservationSequence([1, 3, 3, 2, 1], 3)
        ll, gamma, _ = forward_backward(m, s)
        assert np.all(gamma == 1.0)
        assert ll == pytest.approx(np.log(o[s.zero_based()]).sum(), abs=1e-12)

    def test_posteriors_normalized_and_consistent(self, three_state):
        s = sample_sequence(three_state, 400, 1)
        _, gamma, xi = forward_backward(three_state, s)
        assert np.max(np.abs(gamma.sum(axis=1) - 1)) <= 1e-12
        # summing xi over the next state gives gamma at the current step, and over the current state the next
        np.testing.assert_allclose(xi.sum(axis=1), gamma[:-1], atol=1e-12)
        np.testing.assert_allclose(xi.sum(axis=2), gamma[1:], atol=1e-12)

    def test_underflow_names_step(self):
        m = HmmModel(np.eye(2), np.eye(2), [1.0, 0.0])
        with pytest.raises(LikelihoodUnderflowError) as err:
            forward_backward(m, ObservationSequence([1, 1, 2, 1], 2))
        assert err.value.step == 3
        assert "step 3" in str(err.value)

    def test_empty(self, two_state):
        with pytest.raises(InsufficientDataError):
            forward_backward(two_state, ObservationSequence([], 2))

    @pytest.mark.parametrize("seed", range(10))
    def test_scaled_matches_unscaled_up_to_20(self, seed):
        rng = np.random.default_rng(seed)
        m = random_model(int(rng.integers(1, 4)), int(rng.integers(2, 5)), seed)
        n = int(rng.integers(1, 21))
        symbols = rng.integers(1, m.Y + 1, n)
        s = ObservationSequence(symbols, m.Y)
        assert abs(log_likelihood(m, s) - unscaled_forward_ll(m, symbols)) <= 1e-10

    @pytest.mark.parametrize("seed", range(10))
    def test_brute_force_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        m = random_model(3, 3, 100 + seed)
        symbols = rng.integers(1, 4, int(rng.integers(1, 9)))
        assert abs(log_likelihood(m, ObservationSequence(symbols, 3)) - brute_force_ll(m, symbols)) <= 1e-10


class TestBaumWelch:
    def test_true_init_beats_random_init(self):
        truth = get_example("low-a").model
        s = sample_sequence(truth, 20000, 4)
        from_truth = baum_welch(truth, s)
        from_random = baum_welch(random_init(3, 3, 4), s)
        for r in (from_truth, from_random):
            assert np.all(np.diff(r.log_likelihood_trace) >= -1e-9)
        assert align_permutation(truth, from_truth.model).mse_O < align_permutation(truth, from_random.model).mse_O
        assert align_permutation(truth, from_truth.model).mse_O < 1e-3

    def test_single_state_closed_form(self):
        s = ObservationSequence([1, 2, 2, 3, 3, 3, 1, 2, 3, 3], 3)
        r = baum_welch(random_init(1, 3, 0), s)
        assert r.iterations <= 2 and r.converged
        np.testing.assert_allclose(r.model.O[:, 0], [0.2, 0.3, 0.5], atol=1e-12)

    def test_iteration_accounting(self, three_state):
        s = sample_sequence(three_state, 300, 2)
        r = baum_welch(three_state, s, max_iter=1)
        assert r.iterations == 1 and len(r.log_likelihood_trace) == 1
        with pytest.raises(ValueError):
            baum_welch(three_state, s, max_iter=0)

    def test_iterations_capped(self, three_state):
        s = sample_sequence(three_state, 300, 2)
        r = baum_welch(random_init(3, 3, 9), s, max_iter=7, ll_rel_tol=0.0)
        assert r.iterations == 7 and not r.converged

    def test_every_iterate_is_stochastic(self, three_state):
        s = sample_sequence(three_state, 500, 3)
        model = random_init(3, 3, 3)
        for _ in range(15):
            model = baum_welch(model, s, max_iter=1).model
            assert validate_model(model, 1e-9).valid
            assert np.max(np.abs(model.T.sum(axis=0) - 1)) <= 1e-9
            assert np.max(np.abs(model.O.sum(axis=0) - 1)) <= 1e-9

    def test_unseen_symbol_resets_column(self):
        # state 2 only ever emits symbol 3, which never occurs, so its posterior mass is zero
        O = np.array([[0.5, 0.0], [0.5, 0.0], [0.0, 1.0]])
        init = HmmModel(np.array([[1.0, 0.5], [0.0, 0.5]]), O, [1.0, 0.0])
        r = baum_welch(init, ObservationSequence([1, 2, 1, 1, 2], 3), max_iter=3)
        assert r.reset_columns > 0
        assert validate_model(r.model, 1e-9).valid
        np.testing.assert_allclose(r.model.O[:, 1], [1 / 3] * 3)

    def test_too_short(self, three_state):
        with pytest.raises(InsufficientDataError):
            baum_welch(three_state, ObservationSequence([1], 3))


class TestRandomInit:
    def test_valid_and_uniform_pi(self):
        m = random_init(3, 4, 1)
        assert validate_model(m, 1e-12).valid
        np.testing.assert_array_equal(m.pi0, [1 / 3] * 3)

    def test_distinct_and_deterministic(self):
        assert random_init(3, 3, 1) == random_init(3, 3, 1)
        assert not np.allclose(random_init(3, 3, 1).T, random_init(3, 3, 2).T)
