import numpy as np
import pytest

from gamdistill.data import from_arrays
from gamdistill.gam import (
    GamError,
    GamModel,
    GamStudent,
    GamTrainConfig,
    fast_select_pairs,
    fit_gam,
    predict_gam,
    prelink_scores,
    term_contribution,
)


def fast_cfg(**overrides):
    base = dict(outer_bags=2, max_rounds=400, patience=30, seed=0)
    base.update(overrides)
    return GamTrainConfig(**base)


def xor_regression(n=2000, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(n, 2)).astype(float)
    y = (X[:, 0].astype(int) ^ X[:, 1].astype(int)).astype(float)
    return from_arrays(X, y, task="regression"), X, y


def r2(pred, y):
    return 1 - np.mean((pred - y) ** 2) / np.var(y)


class TestConfig:
    def test_defaults_match_contract(self):
        cfg = GamTrainConfig()
        assert cfg.max_bins == 256
        assert cfg.outer_bags == 4
        assert cfg.learning_rate == 0.05
        assert cfg.pair_bins == 32
        assert cfg.triple_bins == 8

    def test_validation(self):
        with pytest.raises(GamError):
            GamTrainConfig(learning_rate=0.0)
        with pytest.raises(GamError):
            GamTrainConfig(outer_bags=0)


class TestFitValidation:
    def test_interaction_size_bounds(self):
        d, X, y = xor_regression(50)
        with pytest.raises(GamError):
            fit_gam(d, [(0,)], fast_cfg())
        with pytest.raises(GamError):
            fit_gam(d, [(0, 1, 0, 1)], fast_cfg())

    def test_invalid_feature_index(self):
        d, X, y = xor_regression(50)
        with pytest.raises(GamError):
            fit_gam(d, [(0, 5)], fast_cfg())

    def test_duplicate_subsets(self):
        d, X, y = xor_regression(50)
        with pytest.raises(GamError):
            fit_gam(d, [(0, 1), (0, 1)], fast_cfg())

    def test_single_row_rejected(self):
        d = from_arrays(np.zeros((1, 2)), np.zeros(1), task="regression")
        with pytest.raises(GamError):
            fit_gam(d, [], fast_cfg())


class TestXorSeparation:
    def test_additive_gam_cannot_fit_xor(self):
        d, X, y = xor_regression()
        m = fit_gam(d, [], fast_cfg())
        assert r2(predict_gam(m, X), y) <= 0.1

    def test_pair_term_fits_xor(self):
        d, X, y = xor_regression()
        m = fit_gam(d, [(0, 1)], fast_cfg())
        assert r2(predict_gam(m, X), y) >= 0.9

    def test_classification_xor(self):
        rng = np.random.default_rng(1)
        X = rng.integers(0, 2, size=(2000, 2)).astype(float)
        y = (X[:, 0].astype(int) ^ X[:, 1].astype(int)).astype(float)
        d = from_arrays(X, y, task="binary")
        # default 4-bag config: bag averaging keeps the additive logit from
        # settling on a tilt that happens to classify 3 of the 4 XOR cells
        additive = fit_gam(d, [], GamTrainConfig(seed=0))
        with_pair = fit_gam(d, [(0, 1)], fast_cfg())
        acc_add = (np.argmax(predict_gam(additive, X), axis=1) == y).mean()
        acc_pair = (np.argmax(predict_gam(with_pair, X), axis=1) == y).mean()
        assert acc_add <= 0.6
        assert acc_pair >= 0.99


class TestModelStructure:
    def setup_method(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, size=(500, 3))
        y = X[:, 0] + X[:, 1] * X[:, 2]
        self.d = from_arrays(X, y, task="regression")
        self.X, self.y = X, y
        self.m = fit_gam(self.d, [(1, 2)], fast_cfg())

    def test_univariate_terms_for_all_features(self):
        subsets = [t.subset for t in self.m.terms]
        for j in range(3):
            assert (j,) in subsets
        assert (1, 2) in subsets

    def test_terms_centered_over_training_mass(self):
        for t in self.m.terms:
            idx = t.cell_index(self.d.features)
            contributions = t.table.reshape(-1, *t.table.shape[len(t.subset):])[idx]
            assert abs(np.mean(contributions)) < 1e-8

    def test_prelink_is_sum_of_terms(self):
        rows = self.X[:7]
        total = np.full(7, self.m.intercept[0] if self.m.intercept.ndim else self.m.intercept)
        total = np.zeros(7) + np.asarray(self.m.intercept).reshape(-1)[0]
        for t in self.m.terms:
            total += t.lookup(rows).reshape(7, -1)[:, 0]
        np.testing.assert_allclose(prelink_scores(self.m, rows).reshape(7, -1)[:, 0],
                                   total, atol=1e-9)

    def test_term_contribution_matches_lookup(self):
        x = self.X[0]
        c = term_contribution(self.m, (1, 2), x)
        t = self.m.term((1, 2))
        np.testing.assert_allclose(c, t.lookup(x[None, :])[0])

    def test_missing_term_errors(self):
        with pytest.raises(GamError):
            self.m.term((0, 2))

    def test_json_roundtrip(self):
        m2 = GamModel.from_json(self.m.to_json())
        rows = self.X[:11]
        np.testing.assert_allclose(predict_gam(m2, rows), predict_gam(self.m, rows))
        assert m2.interaction_subsets == self.m.interaction_subsets

    def test_determinism(self):
        m2 = fit_gam(self.d, [(1, 2)], fast_cfg())
        np.testing.assert_allclose(predict_gam(m2, self.X[:20]),
                                   predict_gam(self.m, self.X[:20]))


class TestPredictShapes:
    def test_binary_predicts_two_columns(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(300, 2))
        y = (X[:, 0] > 0).astype(float)
        d = from_arrays(X, y, task="binary")
        m = fit_gam(d, [], fast_cfg())
        p = predict_gam(m, X[:9])
        assert p.shape == (9, 2)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)

    def test_multiclass(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(300, 2))
        y = (np.arange(300) % 3).astype(float)
        d = from_arrays(X, y, task="multiclass")
        m = fit_gam(d, [], fast_cfg(max_rounds=50))
        p = predict_gam(m, X[:5])
        assert p.shape == (5, 3)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)

    def test_order3_term(self):
        rng = np.random.default_rng(2)
        X = rng.integers(0, 2, size=(1500, 4)).astype(float)
        chi = 1 - 2 * X
        y = chi[:, 0] * chi[:, 1] * chi[:, 2]
        d = from_arrays(X, y, task="regression")
        m3 = fit_gam(d, [(0, 1, 2)], fast_cfg())
        assert r2(predict_gam(m3, X), y) >= 0.9
        additive = fit_gam(d, [], fast_cfg())
        assert r2(predict_gam(additive, X), y) <= 0.1


class TestGamStudent:
    def test_predictor_contract(self):
        d, X, y = xor_regression(600)
        s = GamStudent(interactions=[(0, 1)], cfg=fast_cfg())
        s.fit(d)
        assert r2(s.predict(X), y) >= 0.9


class TestFastSelect:
    def test_xor_pair_ranked_first(self):
        rng = np.random.default_rng(0)
        X = rng.integers(0, 2, size=(1500, 4)).astype(float)
        y = (X[:, 0].astype(int) ^ X[:, 1].astype(int)).astype(float) + 0.1 * X[:, 2]
        d = from_arrays(X, y, task="regression")
        additive = fit_gam(d, [], fast_cfg())
        pairs = fast_select_pairs(d, additive, n_pairs=3)
        assert pairs[0][0] == (0, 1)
        assert pairs[0][1] > pairs[1][1]

    def test_returns_requested_count(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(300, 4))
        y = X[:, 0] * X[:, 1]
        d = from_arrays(X, y, task="regression")
        additive = fit_gam(d, [], fast_cfg(max_rounds=100))
        pairs = fast_select_pairs(d, additive, n_pairs=2)
        assert len(pairs) == 2
