"""Dataset file formats, splits and standardization."""

import numpy as np
import pytest

from hashlearn import ConfigurationError, Dataset, ParseError, load, save_delimited, split, standardize
from hashlearn.ingest import append_unlabeled, fit_standardization, load_features


class TestDelimitedFormat:
    def test_two_line_parse(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("3,1.0,2.0\n?,0.0,1.0\n")
        data = load(path)
        assert data.n_samples == 2 and data.n_features == 2
        assert data.labeled_indices.tolist() == [0]
        assert data.unlabeled_indices.tolist() == [1]
        assert data.labels.tolist() == [1, 0]
        assert data.label_names == (3,)

    def test_whitespace_separator(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("1 0.5 0.25\n2 1.5 -0.5\n")
        data = load(path)
        np.testing.assert_array_equal(data.features, [[0.5, 0.25], [1.5, -0.5]])

    def test_ragged_rows_name_the_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,1.0,2.0,3.0\n2,1.0,2.0\n")
        with pytest.raises(ParseError, match="line 2"):
            load(path)

    def test_non_numeric_feature(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,1.0,oops\n")
        with pytest.raises(ParseError, match="line 1"):
            load(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("\n\n")
        with pytest.raises(ConfigurationError):
            load(path)

    def test_label_remap_is_contiguous(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("7,0.0\n3,1.0\n7,2.0\n")
        data = load(path)
        assert data.label_names == (3, 7)
        assert data.labels.tolist() == [2, 1, 2]

    def test_declared_group_count(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,0.0\n2,1.0\n")
        data = load(path, n_groups=4)
        assert data.n_groups == 4
        with pytest.raises(ConfigurationError):
            load(path, n_groups=1)

    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        original = Dataset(
            features=rng.normal(size=(9, 3)) * np.pi,
            labels=np.array([1, 2, 0, 3, 1, 0, 2, 3, 1]),
            n_groups=3,
            label_names=(10, 20, 30),
        )
        path = tmp_path / "out.csv"
        save_delimited(original, path)
        back = load(path, n_groups=3)
        np.testing.assert_array_equal(back.features, original.features)
        assert back.labels.tolist() == original.labels.tolist()
        assert back.label_names == original.label_names


class TestSparseFormat:
    def test_densification(self, tmp_path):
        path = tmp_path / "d.sp"
        path.write_text("1 2:5.0\n2 1:1.0 3:2.0\n")
        data = load(path, format="sparse")
        np.testing.assert_array_equal(
            data.features, [[0.0, 5.0, 0.0], [1.0, 0.0, 2.0]]
        )

    def test_unlabeled_rows(self, tmp_path):
        path = tmp_path / "d.sp"
        path.write_text("? 1:1.0\n2 2:1.0\n")
        data = load(path, format="sparse-index-value")
        assert data.labels.tolist() == [0, 1]

    def test_bad_pair(self, tmp_path):
        path = tmp_path / "d.sp"
        path.write_text("1 2:5.0\n1 nope\n")
        with pytest.raises(ParseError, match="line 2"):
            load(path, format="sparse")

    def test_zero_index_rejected(self, tmp_path):
        path = tmp_path / "d.sp"
        path.write_text("1 0:5.0\n")
        with pytest.raises(ParseError):
            load(path, format="sparse")


class TestSplit:
    def _data(self, n=10, n_groups=2):
        rng = np.random.default_rng(1)
        return Dataset(
            rng.normal(size=(n, 2)),
            np.tile(np.arange(1, n_groups + 1), n // n_groups),
            n_groups,
        )

    def test_half_split(self):
        train, test = split(self._data(10), 0.5, seed=0)
        assert train.n_samples == 5 and test.n_samples == 5

    def test_deterministic(self):
        d = self._data(20)
        t1, _ = split(d, 0.7, seed=9)
        t2, _ = split(d, 0.7, seed=9)
        np.testing.assert_array_equal(t1.features, t2.features)

    def test_disjoint_and_exhaustive(self):
        d = self._data(20)
        train, test = split(d, 0.3, seed=2)
        joined = np.vstack([train.features, test.features])
        assert joined.shape[0] == 20
        seen = {tuple(row) for row in joined}
        assert len(seen) == 20

    def test_stratified_preserves_proportions(self):
        d = self._data(20, n_groups=2)
        train, test = split(d, 0.5, seed=3, stratified=True)
        assert np.sum(train.labels == 1) == 5
        assert np.sum(train.labels == 2) == 5

    def test_stratified_small_class_fails(self):
        data = Dataset(np.zeros((3, 1)), np.array([1, 1, 2]), 2)
        with pytest.raises(ConfigurationError):
            split(data, 0.5, seed=0, stratified=True)

    def test_fraction_bounds(self):
        with pytest.raises(ConfigurationError):
            split(self._data(), 0.0, seed=0)
        with pytest.raises(ConfigurationError):
            split(self._data(), 1.0, seed=0)


class TestStandardize:
    def test_constant_column_unchanged(self):
        d = Dataset(np.array([[1.0, 4.0], [2.0, 4.0]]), np.array([1, 1]), 1)
        out, _, mean, scale = standardize(d)
        np.testing.assert_array_equal(out.features[:, 1], [4.0, 4.0])
        assert mean[1] == 0.0 and scale[1] == 1.0

    def test_zero_mean_unit_variance(self):
        d = Dataset(np.array([[0.0], [2.0]]), np.array([1, 1]), 1)
        out, _, mean, scale = standardize(d)
        np.testing.assert_allclose(out.features[:, 0], [-1.0, 1.0])
        assert mean[0] == 1.0 and scale[0] == 1.0

    def test_apply_to_uses_train_statistics(self):
        train = Dataset(np.array([[0.0], [2.0]]), np.array([1, 1]), 1)
        test = Dataset(np.array([[4.0]]), np.array([1]), 1)
        _, [test_out], mean, scale = standardize(train, [test])
        # (4 - 1) / 1, not the test set's own statistics
        assert test_out.features[0, 0] == pytest.approx(3.0)

    def test_fit_population_std(self):
        feats = np.array([[0.0], [1.0], [2.0], [3.0]])
        _, scale = fit_standardization(feats)
        assert scale[0] == pytest.approx(np.sqrt(1.25))


class TestHelpers:
    def test_load_features_ignores_labels(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("9,1.0,2.0\n?,3.0,4.0\n")
        feats = load_features(path)
        np.testing.assert_array_equal(feats, [[1.0, 2.0], [3.0, 4.0]])

    def test_append_unlabeled(self):
        d = Dataset(np.zeros((2, 3)), np.array([1, 2]), 2)
        out = append_unlabeled(d, np.ones((2, 3)))
        assert out.n_samples == 4
        assert out.labels.tolist() == [1, 2, 0, 0]
        assert out.n_groups == 2
