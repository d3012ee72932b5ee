import numpy as np
import pytest

from gamdistill.data import (
    DataError,
    baseline_vector,
    build_bins,
    from_arrays,
    load_csv,
    split,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadCsv:
    def test_numeric_regression(self, tmp_path):
        path = write(tmp_path, "r.csv", "a,b,y\n1,2,0.5\n2,3,1.5\n3,4,2.25\n4,5,3.0\n")
        d = load_csv(path, "y")
        assert d.task == "regression"
        assert d.n_rows == 4
        assert d.n_features == 2
        np.testing.assert_allclose(d.features[:, 0], [1, 2, 3, 4])

    def test_categorical_frequency_encoding(self, tmp_path):
        path = write(tmp_path, "c.csv", "color,y\nred,1\nred,2\nblue,3\ngreen,4\nblue,5\nred,6\n")
        d = load_csv(path, "y")
        col = d.columns[0]
        assert col.kind == "categorical"
        # red (3x) -> 0, blue (2x) -> 1, green (1x) -> 2
        assert col.categories == {"red": 0, "blue": 1, "green": 2}
        np.testing.assert_allclose(d.features[:, 0], [0, 0, 1, 2, 1, 0])

    def test_categorical_tie_alphabetical(self, tmp_path):
        path = write(tmp_path, "t.csv", "c,y\nzeta,1\nalpha,2\nzeta,3\nalpha,4\n")
        d = load_csv(path, "y")
        assert d.columns[0].categories == {"alpha": 0, "zeta": 1}

    def test_missing_numeric_imputed_with_median(self, tmp_path):
        path = write(tmp_path, "m.csv", "a,y\n1,1\n,2\n3,3\n10,4\n")
        d = load_csv(path, "y")
        np.testing.assert_allclose(sorted(d.features[:, 0]), [1, 3, 3, 10])

    def test_missing_categorical_imputed_with_mode(self, tmp_path):
        path = write(tmp_path, "mc.csv", "c,y\nx,1\n,2\nx,3\nw,4\n")
        d = load_csv(path, "y")
        # mode "x" encodes to 0; the missing entry becomes 0
        np.testing.assert_allclose(d.features[:, 0], [0, 0, 0, 1])

    def test_task_inference_classification(self, tmp_path):
        path = write(tmp_path, "cl.csv", "a,y\n" + "".join(f"{i},{i % 3}\n" for i in range(30)))
        d = load_csv(path, "y")
        assert d.task == "multiclass"
        assert d.n_classes == 3

    def test_task_override(self, tmp_path):
        path = write(tmp_path, "ov.csv", "a,y\n1,0\n2,1\n3,0\n4,1\n")
        d = load_csv(path, "y", task="regression")
        assert d.task == "regression"

    def test_missing_target_column(self, tmp_path):
        path = write(tmp_path, "bad.csv", "a,b\n1,2\n")
        with pytest.raises(DataError, match="y"):
            load_csv(path, "y")

    def test_empty_file(self, tmp_path):
        path = write(tmp_path, "empty.csv", "")
        with pytest.raises(DataError):
            load_csv(path, "y")

    def test_all_missing_column_reports_name(self, tmp_path):
        path = write(tmp_path, "am.csv", "a,hole,y\n1,,1\n2,,2\n3,,3\n")
        with pytest.raises(DataError, match="hole"):
            load_csv(path, "y")

    def test_encoding_stable_across_loads(self, tmp_path):
        text = "c,y\nred,1\nblue,2\nred,3\ngreen,4\n"
        p1 = write(tmp_path, "s1.csv", text)
        p2 = write(tmp_path, "s2.csv", text)
        d1, d2 = load_csv(p1, "y"), load_csv(p2, "y")
        assert d1.columns[0].categories == d2.columns[0].categories
        np.testing.assert_array_equal(d1.features, d2.features)


class TestSplit:
    def test_deterministic(self):
        d = from_arrays(np.arange(40).reshape(20, 2).astype(float),
                        np.arange(20).astype(float), task="regression")
        a1, b1 = split(d, 0.66, seed=7)
        a2, b2 = split(d, 0.66, seed=7)
        np.testing.assert_array_equal(a1.features, a2.features)
        np.testing.assert_array_equal(b1.target, b2.target)

    def test_partition(self):
        d = from_arrays(np.arange(30).reshape(15, 2).astype(float),
                        np.arange(15).astype(float), task="regression")
        tr, te = split(d, 2 / 3, seed=0)
        assert tr.n_rows + te.n_rows == 15
        merged = sorted(np.concatenate([tr.target, te.target]).tolist())
        assert merged == list(range(15))

    def test_stratified_classification(self):
        y = np.array([0] * 30 + [1] * 10)
        X = np.arange(40, dtype=float)[:, None]
        d = from_arrays(X, y.astype(float), task="binary")
        tr, te = split(d, 0.75, seed=1)
        assert (tr.target == 1).sum() > 0
        assert (te.target == 1).sum() > 0
        assert abs((tr.target == 0).sum() - 22.5) <= 1

    def test_test_set_never_empty(self):
        d = from_arrays(np.arange(4, dtype=float)[:, None],
                        np.array([0.0, 1.0, 0.0, 1.0]), task="binary")
        tr, te = split(d, 0.9, seed=0)
        assert te.n_rows >= 1


class TestBins:
    def test_distinct_value_rule(self):
        d = from_arrays(np.array([[1.0], [2.0], [3.0], [2.0]]),
                        np.zeros(4), task="regression")
        spec = build_bins(d, max_bins=256)
        idx = spec.bin_index(0, d.features[:, 0])
        assert len(np.unique(idx)) == 3

    def test_constant_feature_single_bin(self):
        d = from_arrays(np.full((5, 1), 2.5), np.zeros(5), task="regression")
        spec = build_bins(d, max_bins=256)
        idx = spec.bin_index(0, d.features[:, 0])
        assert set(idx.tolist()) == {0}

    def test_quantile_mass_balance(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(size=(10000, 1))
        d = from_arrays(X, np.zeros(10000), task="regression")
        spec = build_bins(d, max_bins=256)
        idx = spec.bin_index(0, d.features[:, 0])
        counts = np.bincount(idx, minlength=256)
        assert len(counts) == 256
        expected = 10000 / 256
        assert counts.min() >= expected * 0.8
        assert counts.max() <= expected * 1.2

    def test_every_row_maps_to_one_bin(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(200, 3))
        d = from_arrays(X, np.zeros(200), task="regression")
        spec = build_bins(d, max_bins=16)
        for j in range(3):
            idx = spec.bin_index(j, d.features[:, j])
            assert idx.min() >= 0
            assert idx.max() < 16


class TestBaseline:
    def test_numeric_mean(self):
        d = from_arrays(np.array([[1.0], [2.0], [3.0]]), np.zeros(3), task="regression")
        b = baseline_vector(d)
        assert b.values[0] == pytest.approx(2.0)

    def test_constant_column(self):
        d = from_arrays(np.full((4, 1), 7.0), np.zeros(4), task="regression")
        assert baseline_vector(d).values[0] == pytest.approx(7.0)

    def test_categorical_mode_smallest_code_tie(self, tmp_path):
        path = tmp_path / "cat.csv"
        path.write_text("c,y\na,1\na,2\nb,3\nb,4\n")
        d = load_csv(str(path), "y")
        b = baseline_vector(d)
        assert b.values[0] == 0.0
