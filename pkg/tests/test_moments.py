import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectralhmm.errors import InsufficientDataError, ModelValidationError
from spectralhmm.hmm import HmmModel, ObservationSequence, random_model, sample_sequence
from spectralhmm.moments import (
    MomentSet,
    TripletMultiset,
    check_moment_set,
    estimate_moments,
    exact_moments,
    load_moments,
    save_moments,
    triplets_independent,
    triplets_sliding,
)


def seq(*symbols, Y=3):
    return ObservationSequence(list(symbols), Y)


def triples_of(tm):
    return [tuple(int(v) for v in t) for t in tm.triples]


class TestExactMoments:
    def test_two_state_by_hand(self, two_state):
        m = exact_moments(two_state)
        np.testing.assert_allclose(m.S1, [2 / 3, 1 / 3], atol=1e-15)
        np.testing.assert_allclose(m.S21, [[0.6, 1 / 15], [1 / 15, 4 / 15]], atol=1e-15)
        assert m.sample_count == 0 and m.exact

    def test_two_state_third_order(self, two_state):
        # O = I so S31 = T^2 diag(pi) and S3y1[y][i, j] = T[i, y] T[y, j] pi[j]
        T, pi = two_state.T, two_state.pi0
        m = exact_moments(two_state)
        np.testing.assert_allclose(m.S31, T @ T @ np.diag(pi), atol=1e-15)
        for y in range(2):
            np.testing.assert_allclose(m.S3y1[y], np.outer(T[:, y], T[y] * pi), atol=1e-15)

    def test_totals(self, three_state):
        m = exact_moments(three_state)
        assert check_moment_set(m) == []
        assert abs(m.S21.sum() - 1) <= 1e-12

    def test_single_state_outer_product(self):
        o = np.array([0.2, 0.5, 0.3])
        m = exact_moments(HmmModel([[1.0]], o[:, None], [1.0]))
        np.testing.assert_allclose(m.S21, np.outer(o, o), atol=1e-15)
        assert np.linalg.matrix_rank(m.S21) == 1

    def test_middle_sum_identity(self, three_state):
        m = exact_moments(three_state)
        assert np.max(np.abs(m.S3y1.sum(axis=0) - m.S31)) <= 1e-12

    def test_invalid_model(self):
        with pytest.raises(ModelValidationError):
            exact_moments(HmmModel([[0.6, 0.5], [0.6, 0.5]], np.eye(2), [0.5, 0.5]))


class TestTriplets:
    def test_sliding_enumeration(self):
        assert triples_of(triplets_sliding(seq(1, 2, 3, 1))) == [(1, 2, 3), (2, 3, 1)]

    def test_sliding_minimum(self):
        assert len(triplets_sliding(seq(1, 2, 3))) == 1

    def test_independent_enumeration(self):
        assert triples_of(triplets_independent(seq(1, 2, 3, 1))) == [(1, 2, 3)]
        assert triples_of(triplets_independent(seq(1, 2, 3, 1, 2, 3))) == [(1, 2, 3), (1, 2, 3)]

    def test_counts_at_one_million(self):
        s = ObservationSequence(np.ones(10**6, dtype=np.int64), 2)
        assert len(triplets_sliding(s)) == 10**6 - 2
        assert len(triplets_independent(s)) == 333333

    @pytest.mark.parametrize("extract", [triplets_sliding, triplets_independent])
    def test_too_short(self, extract):
        with pytest.raises(InsufficientDataError):
            extract(seq(1, 2))

    def test_from_triples_range(self):
        with pytest.raises(ValueError):
            TripletMultiset.from_triples([(1, 2, 4)], 3)


class TestEstimate:
    def test_single_triplet_indexing(self):
        m = estimate_moments(TripletMultiset.from_triples([(1, 2, 1)], 2))
        np.testing.assert_array_equal(m.S1, [1, 0])
        np.testing.assert_array_equal(m.S21, [[0, 0], [1, 0]])
        np.testing.assert_array_equal(m.S31, [[1, 0], [0, 0]])
        np.testing.assert_array_equal(m.S3y1[1], [[1, 0], [0, 0]])
        np.testing.assert_array_equal(m.S3y1[0], np.zeros((2, 2)))
        assert m.sample_count == 1

    def test_empty(self):
        with pytest.raises(InsufficientDataError):
            estimate_moments(TripletMultiset.from_triples(np.zeros((0, 3)), 2))

    def test_naive_recount(self):
        rng = np.random.default_rng(4)
        t = rng.integers(1, 4, (200, 3))
        m = estimate_moments(TripletMultiset.from_triples(t, 3))
        S3 = np.zeros((3, 3, 3))
        for a, b, c in t:
            S3[b - 1, c - 1, a - 1] += 1
        np.testing.assert_array_equal(m.S3y1, S3 / 200)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 6), st.lists(st.integers(0, 10**6), min_size=3, max_size=3), st.integers(1, 400))
    def test_totals_and_middle_identity(self, Y, seeds, n):
        rng = np.random.default_rng(seeds)
        m = estimate_moments(TripletMultiset.from_triples(rng.integers(1, Y + 1, (n, 3)), Y))
        for S in (m.S1, m.S21, m.S31, m.S3y1):
            assert abs(S.sum() - 1) <= 1e-9
        # counts agree exactly inside estimate_moments; after division only rounding remains
        assert np.max(np.abs(m.S3y1.sum(axis=0) - m.S31)) <= 1e-12

    def test_monte_carlo_S21(self, three_state):
        s = sample_sequence(three_state, 10**6 + 2, 11)
        m = estimate_moments(triplets_sliding(s))
        assert np.max(np.abs(m.S21 - exact_moments(three_state).S21)) <= 0.003

    def test_both_schemes_converge(self, three_state):
        exact = exact_moments(three_state)
        s = sample_sequence(three_state, 3 * 10**6, 12)
        for extract in (triplets_sliding, triplets_independent):
            m = estimate_moments(extract(s))
            for name in ("S1", "S21", "S31", "S3y1"):
                assert np.max(np.abs(getattr(m, name) - getattr(exact, name))) <= 0.005, (extract.__name__, name)

    def test_consistency_across_sizes(self):
        model = random_model(3, 3, 21)
        exact = exact_moments(model)

        def err(m):
            return max(np.max(np.abs(getattr(m, k) - getattr(exact, k))) for k in ("S1", "S21", "S31", "S3y1"))

        trials, better = 20, 0
        for t in range(trials):
            s = sample_sequence(model, 10**6 + 2, 1000 + t)
            small = estimate_moments(triplets_sliding(ObservationSequence(s.symbols[: 10**3 + 2], 3)))
            big = estimate_moments(triplets_sliding(s))
            better += err(big) < err(small)
        assert better >= 0.95 * trials


def test_json_round_trip(tmp_path, three_state):
    m = estimate_moments(triplets_sliding(sample_sequence(three_state, 500, 1)))
    path = tmp_path / "m.json"
    save_moments(m, path)
    back = load_moments(path)
    assert back.sample_count == m.sample_count == 498
    for k in ("S1", "S21", "S31", "S3y1"):
        np.testing.assert_array_equal(getattr(back, k), getattr(m, k))
    assert set(m.to_dict()) == {"Y", "n", "S1", "S21", "S31", "S3y1"}


def test_from_dict_rejects_wrong_shape():
    with pytest.raises(ValueError):
        MomentSet.from_dict({"Y": 2, "n": 1, "S1": [1, 0, 0], "S21": [[1, 0], [0, 0]], "S31": [[1, 0], [0, 0]], "S3y1": [[[0, 0], [0, 0]]] * 2})
