import json

import numpy as np
import pytest

from puckit.data import (
    BayesOracle,
    FeatureModel,
    PUDataset,
    ScarConfig,
    generate_scar,
    load_dataset,
    save_dataset,
    split_train_val,
)
from puckit.errors import ConfigError, DatasetFormatError, DatasetValidationError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoad:
    def test_three_row_csv(self, tmp_path):
        p = write(tmp_path, "d.csv", "id,label,f0,f1\n0,1,1.0,2.0\n1,0,1.0,2.0\n2,0,1.0,2.0\n")
        ds = load_dataset(p, "csv")
        assert (ds.size, ds.dim) == (3, 2)
        assert ds.s.tolist() == [1, 0, 0]
        assert ds.truth is None

    def test_empty_file(self, tmp_path):
        with pytest.raises(DatasetFormatError, match="empty dataset"):
            load_dataset(write(tmp_path, "e.csv", ""))

    def test_header_only_is_empty(self, tmp_path):
        with pytest.raises(DatasetFormatError, match="empty dataset"):
            load_dataset(write(tmp_path, "e.csv", "id,label,f0\n"))

    def test_label_two_rejected(self, tmp_path):
        p = write(tmp_path, "d.csv", "id,label,f0\n0,2,1.0\n")
        with pytest.raises(DatasetValidationError):
            load_dataset(p)

    def test_ragged_csv(self, tmp_path):
        p = write(tmp_path, "d.csv", "id,label,f0,f1\n0,1,1.0,2.0\n1,0,1.0\n")
        with pytest.raises(DatasetFormatError):
            load_dataset(p)

    def test_ragged_jsonl(self, tmp_path):
        p = write(
            tmp_path,
            "d.jsonl",
            '{"id":0,"label":1,"features":[1,2]}\n{"id":1,"label":0,"features":[1]}\n',
        )
        with pytest.raises(DatasetFormatError, match="ragged"):
            load_dataset(p)

    def test_labelled_negative_rejected(self, tmp_path):
        p = write(tmp_path, "d.csv", "id,label,truth,f0\n0,1,0,1.0\n")
        with pytest.raises(DatasetValidationError, match="labelled samples must be positive"):
            load_dataset(p)

    def test_ids_reordered(self, tmp_path):
        p = write(tmp_path, "d.csv", "id,label,f0\n1,0,5.0\n0,1,3.0\n")
        ds = load_dataset(p)
        assert ds.X[:, 0].tolist() == [3.0, 5.0]
        assert ds.s.tolist() == [1, 0]

    def test_partial_truth_is_marked_missing(self, tmp_path):
        p = write(tmp_path, "d.csv", "id,label,truth,f0\n0,1,1,1.0\n1,0,,2.0\n2,0,0,3.0\n")
        ds = load_dataset(p)
        assert ds.missing_truth_ids().tolist() == [1]

    @pytest.mark.parametrize("fmt", ["csv", "jsonl"])
    def test_round_trip(self, tmp_path, fmt):
        ds = generate_scar(ScarConfig(n=50, prior=0.4, label_freq=0.5, seed=3, n_groups=3))
        p = tmp_path / f"d.{fmt}"
        save_dataset(ds, p)
        back = load_dataset(p)
        np.testing.assert_array_equal(back.X, ds.X)
        np.testing.assert_array_equal(back.s, ds.s)
        np.testing.assert_array_equal(back.truth, ds.truth)
        np.testing.assert_array_equal(back.groups, ds.groups)
        assert back.fingerprint() == ds.fingerprint()


class TestDataset:
    def test_immutable(self, scar_small):
        with pytest.raises(ValueError):
            scar_small.X[0, 0] = 1.0

    def test_take_keeps_origin(self, scar_small):
        sub = scar_small.take([5, 2, 9])
        assert sub.ids.tolist() == [0, 1, 2]
        assert sub.origin.tolist() == [5, 2, 9]
        np.testing.assert_array_equal(sub.X[1], scar_small.X[2])

    def test_samples(self, scar_small):
        smp = scar_small[3]
        assert smp.id == 3 and smp.s == scar_small.s[3] and smp.truth == scar_small.truth[3]


class TestSplit:
    def test_sizes_and_determinism(self):
        ds = PUDataset(X=np.arange(10.0)[:, None], s=[1, 1, 0, 0, 1, 0, 0, 0, 1, 0])
        a = split_train_val(ds, 0.8, 7)
        b = split_train_val(ds, 0.8, 7)
        assert a.train_ids.size == 8 and a.val_ids.size == 2
        assert not set(a.train_ids) & set(a.val_ids)
        assert sorted(set(a.train_ids) | set(a.val_ids)) == list(range(10))
        np.testing.assert_array_equal(a.train_ids, b.train_ids)
        np.testing.assert_array_equal(a.val_ids, b.val_ids)

    @pytest.mark.parametrize("seed", range(20))
    def test_single_labelled_forced_into_validation(self, seed):
        s = np.zeros(10, dtype=int)
        s[6] = 1
        sp = split_train_val(PUDataset(X=np.arange(10.0)[:, None], s=s), 0.8, seed)
        assert 6 in sp.val_ids.tolist()
        assert sp.train_ids.size == 8

    def test_empty_validation(self):
        ds = PUDataset(X=np.zeros((10, 1)), s=[1] * 10)
        with pytest.raises(ConfigError):
            split_train_val(ds, 0.999, 0)

    def test_no_labelled(self):
        ds = PUDataset(X=np.zeros((10, 1)), s=[0] * 10)
        with pytest.raises(ConfigError):
            split_train_val(ds, 0.8, 0)
        sp = split_train_val(ds, 0.8, 0, require_labelled=False)
        assert sp.val_ids.size == 2

    def test_every_split_has_validation_positive(self, scar_small):
        for seed in range(30):
            sp = split_train_val(scar_small, 0.8, seed)
            assert scar_small.s[sp.val_ids].any()


class TestGenerate:
    def test_full_label_frequency_collapses_to_pn(self):
        ds = generate_scar(ScarConfig(n=2000, prior=0.3, label_freq=1.0, seed=1))
        np.testing.assert_array_equal(ds.s, ds.truth)

    def test_labelled_fraction(self):
        ds = generate_scar(ScarConfig(n=10000, prior=0.5, label_freq=0.7, seed=5))
        assert abs(ds.s.mean() - 0.35) <= 0.02

    @pytest.mark.parametrize("seed", range(10))
    def test_no_labelled_negatives(self, seed):
        ds = generate_scar(ScarConfig(n=3000, prior=0.4, label_freq=0.5, seed=seed))
        assert not ((ds.s == 1) & (ds.truth == 0)).any()

    def test_bit_identical(self):
        cfg = ScarConfig(n=500, prior=0.5, label_freq=0.5, seed=9)
        a, b = generate_scar(cfg), generate_scar(cfg)
        assert a.X.tobytes() == b.X.tobytes()
        assert a.s.tobytes() == b.s.tobytes()

    def test_labelled_fraction_over_seeds(self):
        prior, c, n = 0.5, 0.7, 10000
        fracs = [generate_scar(ScarConfig(n=n, prior=prior, label_freq=c, seed=s)).s.mean() for s in range(100)]
        se = np.sqrt(prior * c * (1 - prior * c) / n) / np.sqrt(len(fracs))
        assert abs(np.mean(fracs) - prior * c) < 3 * se

    @pytest.mark.parametrize(
        "kw, msg",
        [
            (dict(prior=1.5), "prior out of range"),
            (dict(prior=0.0), "prior out of range"),
            (dict(label_freq=0.0), "label_freq out of range"),
            (dict(label_freq=1.2), "label_freq out of range"),
        ],
    )
    def test_config_validation(self, kw, msg):
        base = dict(n=10, prior=0.5, label_freq=0.5)
        with pytest.raises(ConfigError, match=msg):
            ScarConfig(**{**base, **kw})

    def test_config_json_round_trip(self):
        cfg = ScarConfig(n=10, prior=0.2, label_freq=0.9, feature_model=FeatureModel.separable(3, 1.5), seed=4)
        assert ScarConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_default_feature_model_bayes_error(self):
        # Bayes error of the default model at prior 0.5, by Monte Carlo on the oracle
        cfg = ScarConfig(n=200000, prior=0.5, label_freq=1.0, seed=0)
        ds = generate_scar(cfg)
        pred = BayesOracle(cfg, "y").posterior(ds.X) >= 0.5
        assert (pred != ds.truth.astype(bool)).mean() < 0.01


def test_bayes_oracle_s_target():
    cfg = ScarConfig(n=10, prior=0.5, label_freq=0.6, seed=0)
    o = BayesOracle(cfg, "s")
    x = np.array([cfg.feature_model.pos_mean])
    assert o.predict_proba(x)[0] == pytest.approx(0.6, abs=1e-4)
