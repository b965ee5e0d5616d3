
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TableClassifier, keyed_dataset
from oracles import brute_expectation, reference_puc
from puckit.data import BayesOracle, ScarConfig, generate_scar
from puckit.pu import (
    build_pu_training_set,
    build_puc_training_set,
    convert_by_weights,
    estimate,
    estimate_c,
    estimate_expectation,
    estimate_prior,
    puc_convert,
    raw_weight,
    weight,
)

probs = st.floats(1e-7, 1 - 1e-7)
cs = st.floats(1e-4, 1.0)


class TestEstimateC:
    def test_near_one(self):
        f = TableClassifier([1 - 1e-7, 1 - 1e-7])
        assert estimate_c(f, np.array([[0.0], [1.0]])) == pytest.approx(1.0, abs=1e-6)

    def test_mean(self):
        f = TableClassifier([0.8, 0.6, 0.7])
        assert estimate_c(f, np.array([[0.0], [1.0], [2.0]])) == pytest.approx(0.7, abs=1e-15)

    def test_uses_only_labelled_rows(self):
        ds = keyed_dataset([1, 0, 1])
        assert estimate_c(TableClassifier([0.9, 0.01, 0.5]), ds) == pytest.approx(0.7)

    def test_empty(self):
        with pytest.raises(ValueError):
            estimate_c(TableClassifier([0.5]), np.zeros((0, 1)))
        with pytest.raises(ValueError):
            estimate_c(TableClassifier([0.5]), keyed_dataset([0, 0]))

    def test_floor(self):
        assert estimate_c(TableClassifier([1e-7]), np.array([[0.0]])) == 1e-4


class TestWeight:
    def test_c_one(self):
        assert weight(0.37, 1.0) == 0.0

    def test_balanced(self):
        assert weight(0.5, 0.5) == 1.0

    def test_worked_value(self):
        assert weight(0.4, 0.8) == pytest.approx(1 / 6, abs=1e-15)

    def test_clamped_above(self):
        assert raw_weight(0.9, 0.5) == pytest.approx(9.0)
        assert weight(0.9, 0.5) == 1.0

    @pytest.mark.parametrize("c", [0.0, -0.5, 1.5])
    def test_bad_c(self, c):
        with pytest.raises(ValueError):
            weight(0.5, c)

    @given(probs, cs)
    def test_range(self, p, c):
        assert 0.0 <= weight(p, c) <= 1.0

    @given(probs, probs, cs)
    def test_monotone_in_p(self, p1, p2, c):
        lo, hi = sorted((p1, p2))
        assert raw_weight(lo, c) <= raw_weight(hi, c)

    @given(probs, cs, cs)
    def test_monotone_in_c(self, p, c1, c2):
        lo, hi = sorted((c1, c2))
        assert raw_weight(p, hi) <= raw_weight(p, lo)


class TestTrainingSet:
    def test_rows(self):
        ds = keyed_dataset([1, 0, 0])
        # c=0.5 makes w = odds(p_s); p_s = 0.3/1.3 gives w = 0.3
        f = TableClassifier([0.9, 0.3 / 1.3, 1e-7])
        ws = build_pu_training_set(ds, f, 0.5)
        assert ws.source.tolist() == [0, 1, 1, 2, 2]
        assert ws.target.tolist() == [1, 1, 0, 1, 0]
        np.testing.assert_allclose(ws.weight, [1.0, 0.3, 0.7, 1e-7 / (1 - 1e-7), 1 - 1e-7 / (1 - 1e-7)], rtol=1e-12)

    def test_zero_weight_pair(self):
        ws = build_pu_training_set(keyed_dataset([0]), TableClassifier([0.4]), 1.0)
        assert list(zip(ws.target.tolist(), ws.weight.tolist())) == [(1, 0.0), (0, 1.0)]

    def test_puc_rows(self):
        ds = keyed_dataset([1, 0, 0, 0])
        conv = convert_by_weights(ds, [0.9, 0.1, 0.0])
        ws = build_puc_training_set(conv, [0.9, 0.1, 0.0])
        assert conv.converted_ids == {1}
        assert ws.source.tolist() == [0, 1, 2, 2, 3, 3]
        assert ws.target.tolist() == [1, 1, 1, 0, 1, 0]
        assert ws.weight.tolist()[:2] == [1.0, 1.0]


class TestPrior:
    def test_labelled_fraction(self):
        ds = keyed_dataset([1, 1, 1, 1, 0, 0, 0, 0, 0, 0])
        assert estimate_prior(ds, [0.0] * 6) == 0.4

    def test_all_ones(self):
        assert estimate_prior(keyed_dataset([1, 0, 0, 0]), [1, 1, 1]) == 1.0

    def test_halves(self):
        assert estimate_prior(keyed_dataset([1, 0, 0]), {1: 0.5, 2: 0.5}) == pytest.approx(2 / 3, abs=1e-15)

    def test_weights_must_cover_unlabelled(self):
        with pytest.raises(ValueError):
            estimate_prior(keyed_dataset([1, 0, 0]), {1: 0.5})
        with pytest.raises(ValueError):
            estimate_prior(keyed_dataset([1, 0, 0]), {0: 0.1, 1: 0.5, 2: 0.5})

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=30), st.data())
    def test_range(self, s, data):
        ds = keyed_dataset(s)
        w = data.draw(st.lists(st.floats(0, 1), min_size=ds.unlabelled_ids.size, max_size=ds.unlabelled_ids.size))
        p = estimate_prior(ds, w)
        assert sum(s) / len(s) <= p <= 1.0 + 1e-15


class TestExpectation:
    def test_h_equals_y_gives_prior(self):
        rng = np.random.default_rng(0)
        s = rng.integers(0, 2, 50)
        ds = keyed_dataset(s)
        f = TableClassifier(rng.uniform(0.01, 0.6, 50))
        est = estimate(ds, f, 0.6)
        assert estimate_expectation(lambda x, y: y, ds, f, 0.6) == est.prior

    def test_c_one_is_pn_mean(self):
        s = [1, 0, 0, 1, 0]
        ds = keyed_dataset(s)
        h = lambda x, y: (x[0] + 1) * (2 if y else -1)  # noqa: E731
        pn = sum(h(np.array([float(i)]), si) for i, si in enumerate(s)) / 5
        assert estimate_expectation(h, ds, TableClassifier([0.3] * 5), 1.0) == pytest.approx(pn, abs=1e-15)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            k = int(rng.integers(1, 11))
            s = rng.integers(0, 2, k)
            p_s = rng.uniform(1e-3, 1 - 1e-3, k)
            c = float(rng.uniform(0.05, 1.0))
            a, b = rng.normal(size=2)
            h = lambda x, y, a=a, b=b: a * x[0] + b * y + a * b * x[0] * y  # noqa: E731
            got = estimate_expectation(h, keyed_dataset(s), TableClassifier(p_s), c)
            assert abs(got - brute_expectation(h, s, p_s, c)) < 1e-12


class TestPUC:
    def test_worked_example(self):
        ds = keyed_dataset([1, 0, 0, 0, 0])
        conv = convert_by_weights(ds, {1: 0.9, 2: 0.2, 3: 0.8, 4: 0.1})
        assert conv.prior == pytest.approx(0.6)
        assert conv.converted_ids == {1, 3}
        assert conv.labels.tolist() == [1, 1, 0, 1, 0]

    def test_nothing_to_convert(self):
        conv = convert_by_weights(keyed_dataset([1, 1, 0, 0]), [0.0, 0.0])
        assert conv.converted_ids == frozenset()

    def test_tie_break_by_id(self):
        conv = convert_by_weights(keyed_dataset([1, 0, 0, 0]), [0.5, 0.5, 0.0])
        assert conv.ranking[:2] == (1, 2)
        assert conv.converted_ids == {1}

    def test_raw_weights_rank_before_clamp(self):
        conv = convert_by_weights(keyed_dataset([1, 0, 0, 0, 0]), [3.0, 0.1, 7.0, 0.0])
        assert conv.ranking[0] == 3
        assert conv.prior == pytest.approx((1 + 1 + 0.1 + 1) / 5)

    def test_through_classifier(self):
        ds = keyed_dataset([1, 0, 0, 0])
        f = TableClassifier([0.5, 0.45, 0.05, 0.3])
        conv = puc_convert(ds, f, 0.5)
        assert conv.ranking == (1, 3, 2)

    @settings(max_examples=300)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=20), st.data())
    def test_matches_reference_and_minimal(self, s, data):
        n_u = s.count(0)
        raw = data.draw(st.lists(st.floats(0, 3), min_size=n_u, max_size=n_u))
        ds = keyed_dataset(s)
        conv = convert_by_weights(ds, raw)
        ref, prior = reference_puc(s, raw)
        assert conv.prior == prior
        assert list(conv.ranking[: len(ref)]) == ref
        assert conv.converted_ids == set(ref)
        k = len(s)
        assert (sum(s) + len(ref)) / k >= prior
        if ref:
            assert (sum(s) + len(ref) - 1) / k < prior

    @given(st.lists(st.integers(0, 1), min_size=2, max_size=20).filter(lambda s: 0 in s), st.data())
    def test_rank_invariance(self, s, data):
        n_u = s.count(0)
        p = np.array(data.draw(st.lists(st.floats(0.01, 0.99), min_size=n_u, max_size=n_u, unique=True)))
        ds = keyed_dataset(s)
        table = np.full(len(s), 0.5)
        table[ds.unlabelled_ids] = p
        a = puc_convert(ds, TableClassifier(table), 0.5)
        # a strictly increasing map of f's outputs that keeps every w inside [0, 1]
        table2 = table.copy()
        table2[ds.unlabelled_ids] = p**2 / 2
        b = puc_convert(ds, TableClassifier(table2), 0.5)
        assert a.ranking == b.ranking
        # the converted set is always a prefix of the shared ranking
        small, large = sorted((a, b), key=lambda r: len(r.converted_ids))
        assert small.converted_ids <= large.converted_ids
        assert set(b.ranking[: len(b.converted_ids)]) == b.converted_ids


class TestOracleRecovery:
    @pytest.mark.parametrize("seed", range(5))
    def test_prior_with_bayes_optimal_f(self, seed):
        cfg = ScarConfig(n=5000, prior=0.5, label_freq=0.7, seed=seed)
        ds = generate_scar(cfg)
        est = estimate(ds, BayesOracle(cfg, "s"), cfg.label_freq)
        assert abs(est.prior - cfg.prior) <= 0.05

    @pytest.mark.parametrize("prior, c", [(0.3, 0.5), (0.6, 0.3), (0.5, 0.9)])
    def test_c_with_bayes_optimal_f(self, prior, c):
        cfg = ScarConfig(n=6000, prior=prior, label_freq=c, seed=1)
        ds = generate_scar(cfg)
        assert estimate_c(BayesOracle(cfg, "s"), ds) == pytest.approx(c, abs=0.01)


def test_high_prior_warning():
    est = estimate(keyed_dataset([1, 0, 0]), TableClassifier([0.5, 0.5, 0.5]), 0.5)
    assert est.prior == 1.0
    assert est.warnings
