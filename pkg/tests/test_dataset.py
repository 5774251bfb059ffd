"""Tests for dataset loading, synthesis, noise injection, and splitting."""

import json

import numpy as np
import pytest

from agepath.dataset import (
    Dataset,
    NoiseSpec,
    inject_noise,
    load,
    load_descriptor,
    save,
    save_descriptor,
    split,
    standardize,
    synthesize,
)

# ---------------------------------------------------------------------------
# container


class TestDataset:
    def test_shapes_and_properties(self):
        ds = Dataset(np.zeros((3, 2)), np.array([1.0, -1.0, 1.0]), "classification")
        assert ds.n == 3 and ds.d == 2

    def test_classification_labels_validated(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 1)), np.array([1.0, 2.0]), "classification")

    def test_arrays_write_locked(self):
        ds = Dataset(np.zeros((2, 1)), np.array([0.5, 1.5]), "regression")
        with pytest.raises(ValueError):
            ds.features[0, 0] = 1.0
        with pytest.raises(ValueError):
            ds.targets[0] = 1.0

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[np.nan]]), np.array([1.0]), "regression")


# ---------------------------------------------------------------------------
# loading


class TestLoad:
    def test_csv_with_header_and_binary_remap(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,b,y\n1,2,0\n3,4,1\n")
        ds = load(p, format="csv", task="classification")
        assert ds.n == 2 and ds.d == 2
        np.testing.assert_allclose(ds.features, [[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_allclose(ds.targets, [-1.0, 1.0])  # {0,1} -> {-1,+1}

    def test_csv_regression(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x0,x1,y\n1.5,2.5,0.25\n-1.0,0.0,3.5\n")
        ds = load(p, format="csv", task="regression")
        np.testing.assert_allclose(ds.targets, [0.25, 3.5])

    def test_csv_bad_value_reports_line(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,b,y\n1,2,1\n1,nan,0\n")
        with pytest.raises(ValueError, match=":3:"):
            load(p, format="csv", task="classification")

    def test_libsvm_sparse_densified(self, tmp_path):
        p = tmp_path / "d.svm"
        p.write_text("+1 1:0.5 3:2.0\n-1 2:1.0\n")
        ds = load(p, format="libsvm", task="classification")
        np.testing.assert_allclose(ds.features, [[0.5, 0.0, 2.0], [0.0, 1.0, 0.0]])
        np.testing.assert_allclose(ds.targets, [1.0, -1.0])

    def test_roundtrip_bit_exact(self, tmp_path):
        ds, _ = synthesize(17, 3, "regression", seed=5)
        p = tmp_path / "round.csv"
        save(ds, p)
        ds2 = load(p, format="csv", task="regression")
        np.testing.assert_array_equal(ds.features, ds2.features)
        np.testing.assert_array_equal(ds.targets, ds2.targets)

    def test_descriptor_roundtrip(self, tmp_path):
        ds, meta = synthesize(10, 2, "regression", seed=3)
        p = tmp_path / "desc.json"
        save_descriptor(meta, p)
        assert json.loads(p.read_text())["task"] == "regression"
        ds2, meta2 = load_descriptor(p)  # re-synthesizes from the descriptor
        np.testing.assert_array_equal(ds.features, ds2.features)
        np.testing.assert_array_equal(ds.targets, ds2.targets)


# ---------------------------------------------------------------------------
# synthesis


class TestSynthesize:
    def test_deterministic(self):
        a, _ = synthesize(20, 4, "classification", seed=7)
        b, _ = synthesize(20, 4, "classification", seed=7)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.targets, b.targets)
        c, _ = synthesize(20, 4, "classification", seed=8)
        assert not np.array_equal(a.features, c.features)

    def test_classification_blobs_separable(self):
        # unit-variance blobs 10 sigmas apart are separable along w0
        ds, meta = synthesize(100, 3, "classification", seed=0, separation=10.0)
        w0 = np.asarray(meta["w0"])
        acc = np.mean(np.sign(ds.features @ w0) == ds.targets)
        assert acc == 1.0
        assert set(np.unique(ds.targets)) == {-1.0, 1.0}
        # at the default 4-sigma separation the Bayes rate is ~97.7%
        ds4, meta4 = synthesize(500, 3, "classification", seed=0)
        acc4 = np.mean(np.sign(ds4.features @ np.asarray(meta4["w0"])) == ds4.targets)
        assert acc4 >= 0.95

    def test_regression_ground_truth_recoverable(self):
        ds, meta = synthesize(200, 3, "regression", seed=1, noise_scale=0.01)
        w0 = np.asarray(meta["w0"])
        w_ls, *_ = np.linalg.lstsq(ds.features, ds.targets, rcond=None)
        assert np.max(np.abs(w_ls - w0)) < 0.05

    def test_target_scale(self):
        small, ms = synthesize(100, 2, "regression", seed=2, target_scale=1.0)
        big, mb = synthesize(100, 2, "regression", seed=2, target_scale=5.0)
        np.testing.assert_allclose(big.targets, 5.0 * small.targets)


# ---------------------------------------------------------------------------
# noise injection


class TestInjectNoise:
    def test_label_flip_count_and_features_untouched(self):
        ds, _ = synthesize(40, 2, "classification", seed=3)
        noisy, idx = inject_noise(ds, NoiseSpec(0.25, "label_flip", seed=1))
        assert len(idx) == 10  # floor(0.25*40 + 0.5)
        np.testing.assert_array_equal(ds.features, noisy.features)
        changed = np.flatnonzero(ds.targets != noisy.targets)
        np.testing.assert_array_equal(changed, np.sort(idx))
        np.testing.assert_allclose(noisy.targets[idx], -ds.targets[idx])

    def test_zero_ratio_is_identity(self):
        ds, _ = synthesize(10, 2, "regression", seed=4)
        noisy, idx = inject_noise(ds, NoiseSpec(0.0, "target_perturb", seed=0))
        assert len(idx) == 0
        np.testing.assert_array_equal(ds.targets, noisy.targets)

    def test_target_perturb_deterministic(self):
        ds, _ = synthesize(30, 2, "regression", seed=5)
        a, ia = inject_noise(ds, NoiseSpec(0.3, "target_perturb", seed=2))
        b, ib = inject_noise(ds, NoiseSpec(0.3, "target_perturb", seed=2))
        np.testing.assert_array_equal(a.targets, b.targets)
        np.testing.assert_array_equal(ia, ib)
        assert len(ia) == 9  # floor(0.3*30 + 0.5)

    def test_ratio_validated(self):
        with pytest.raises(ValueError):
            NoiseSpec(1.5, "label_flip", seed=0)
        with pytest.raises(ValueError):
            NoiseSpec(0.1, "bogus", seed=0)


# ---------------------------------------------------------------------------
# split / standardize


class TestSplit:
    def test_sizes(self):
        ds, _ = synthesize(8, 2, "regression", seed=6)
        tr, te = split(ds, 0.75, seed=0)
        assert (tr.n, te.n) == (6, 2)
        ds2, _ = synthesize(2, 2, "regression", seed=6)
        tr2, te2 = split(ds2, 0.5, seed=0)
        assert (tr2.n, te2.n) == (1, 1)

    def test_partition_covers_dataset(self):
        ds, _ = synthesize(20, 2, "regression", seed=7)
        tr, te = split(ds, 0.6, seed=1)
        rows = np.vstack([tr.features, te.features])
        assert rows.shape[0] == ds.n
        # every original row appears exactly once across the two parts
        orig = {tuple(r) for r in ds.features}
        got = {tuple(r) for r in rows}
        assert orig == got


class TestStandardize:
    def test_zero_mean_unit_scale(self):
        ds, _ = synthesize(50, 3, "regression", seed=8)
        out, st = standardize(ds)
        np.testing.assert_allclose(out.features.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.features.std(axis=0), 1.0, atol=1e-12)

    def test_constant_column_safe(self):
        X = np.hstack([np.ones((5, 1)), np.arange(5.0)[:, None]])
        ds = Dataset(X, np.zeros(5), "regression")
        out, st = standardize(ds)
        assert np.all(np.isfinite(out.features))
        np.testing.assert_allclose(out.features[:, 0], 0.0)

    def test_apply_invert_roundtrip(self):
        ds, _ = synthesize(30, 2, "regression", seed=9)
        out, st = standardize(ds)
        back = st.invert(out.features)
        np.testing.assert_allclose(back, ds.features, atol=1e-12)
