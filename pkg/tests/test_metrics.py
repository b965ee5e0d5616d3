import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_ap, brute_map, brute_prf
from puckit.metrics import average_precision, mean_ap, precision_recall_f1, rank_by_score

bits = st.lists(st.integers(0, 1), min_size=1, max_size=60)


class TestPRF:
    def test_perfect(self):
        assert precision_recall_f1([1, 0, 1], [1, 0, 1]) == (1.0, 1.0, 1.0)

    def test_counts(self):
        # tp=3, fp=1, fn=2
        preds = [1, 1, 1, 1, 0, 0, 0]
        golds = [1, 1, 1, 0, 1, 1, 0]
        p, r, f = precision_recall_f1(preds, golds)
        assert (p, r) == (0.75, 0.6)
        assert f == pytest.approx(2 * 0.45 / 1.35, abs=1e-15)

    def test_no_positive_predictions(self):
        assert precision_recall_f1([0, 0, 0], [1, 0, 1]) == (0.0, 0.0, 0.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            precision_recall_f1([1, 0], [1])

    @given(st.data())
    def test_matches_brute_force(self, data):
        golds = data.draw(bits)
        preds = data.draw(st.lists(st.integers(0, 1), min_size=len(golds), max_size=len(golds)))
        assert precision_recall_f1(preds, golds) == brute_prf(preds, golds)

    @given(st.floats(0.01, 1), st.floats(0.01, 1))
    def test_f1_symmetric(self, p, r):
        f = lambda a, b: 2 * a * b / (a + b)  # noqa: E731
        assert f(p, r) == f(r, p)
        assert f(p, p) == pytest.approx(p)


class TestAP:
    def test_ranks_one_and_three(self):
        assert average_precision([1, 0, 1]) == 5 / 6

    def test_perfect(self):
        assert average_precision([1, 1, 1, 0, 0]) == 1.0

    def test_single_positive_rank_four(self):
        assert average_precision([0, 0, 0, 1]) == 0.25

    def test_zero_positives(self):
        with pytest.raises(ValueError):
            average_precision([0, 0])

    @given(bits.filter(any))
    def test_matches_brute_force(self, ranked):
        assert average_precision(ranked) == brute_ap(ranked)

    @given(bits.filter(any), st.randoms(use_true_random=False))
    def test_tail_permutation_invariance(self, ranked, rnd):
        last = max(i for i, g in enumerate(ranked) if g)
        tail = ranked[last + 1 :]
        rnd.shuffle(tail)
        assert average_precision(ranked[: last + 1] + tail) == average_precision(ranked)

    def test_map(self):
        assert mean_ap([[1, 0, 1]]) == average_precision([1, 0, 1])
        assert mean_ap([[1], [0, 1]]) == 0.75
        with pytest.raises(ValueError):
            mean_ap([])

    @given(bits.filter(any), st.integers(1, 5))
    def test_map_of_identical_queries(self, q, n):
        assert mean_ap([q] * n) == average_precision(q)

    @given(st.lists(bits.filter(any), min_size=1, max_size=5))
    def test_map_matches_brute_force(self, qs):
        assert mean_ap(qs) == brute_map(qs)

    def test_large_ranking(self):
        ranked = [1, 0] * 5000
        assert average_precision(ranked) == brute_ap(ranked)

    @given(st.lists(bits.filter(any), min_size=1, max_size=5))
    def test_map_range(self, qs):
        assert 0 < mean_ap(qs) <= 1


def test_rank_by_score_ties():
    golds = rank_by_score([0.5, 0.9, 0.5], [10, 20, 30])
    assert golds.tolist() == [20, 10, 30]
    golds = rank_by_score([1, 1, 0], [10, 20, 30], tiebreak=[0.2, 0.7, 0.9])
    assert golds.tolist() == [20, 10, 30]
