import numpy as np
import pytest

from gamdistill.fourier import (
    FourierSurrogate,
    brute_force_wht,
    enumerate_subsets,
    parity_matrix,
    subset_to_index,
)
from gamdistill.indices import (
    IndexError_,
    IndexScores,
    SetFunction,
    bii,
    discrete_derivative,
    fbii_from_fourier,
    fourier_index,
    fsii,
    mobius,
    mobius_from_fourier,
    restrict_surrogate,
    scores_from_set_function,
    shapley_values,
    sii,
    stii,
    zeta,
)


def random_set_function(n, seed, active=None):
    rng = np.random.default_rng(seed)
    active = tuple(range(n)) if active is None else active
    return SetFunction(active=active, values=rng.normal(size=1 << n))


def grand(f):
    return float(f.values[-1])


def empty(f):
    return float(f.values[0])


class TestSetFunction:
    def test_table_length_validated(self):
        with pytest.raises(IndexError_):
            SetFunction(active=(0, 1), values=np.zeros(3))

    def test_active_must_be_sorted(self):
        with pytest.raises(IndexError_):
            SetFunction(active=(1, 0), values=np.zeros(4))

    def test_non_finite_rejected(self):
        with pytest.raises(IndexError_):
            SetFunction(active=(0,), values=np.array([0.0, np.nan]))

    def test_size_cap(self):
        with pytest.raises(IndexError_):
            SetFunction(active=tuple(range(17)), values=np.zeros(1 << 17))

    def test_global_local_roundtrip(self):
        f = random_set_function(3, 0, active=(2, 5, 9))
        assert f.local_mask((5,)) == 2
        assert f.global_subset(0b101) == (2, 9)


class TestDiscreteDerivative:
    def test_singleton_is_difference(self):
        f = random_set_function(3, 1)
        # d_{0} f(empty) = f({0}) - f(empty)
        assert discrete_derivative(f, (0,), ()) == pytest.approx(
            f.values[1] - f.values[0]
        )

    def test_pair_alternating_sum(self):
        f = random_set_function(3, 2)
        v = f.values
        expected = v[0b011] - v[0b001] - v[0b010] + v[0b000]
        assert discrete_derivative(f, (0, 1), ()) == pytest.approx(expected)

    def test_disjointness_enforced(self):
        f = random_set_function(3, 3)
        with pytest.raises(IndexError_):
            discrete_derivative(f, (0, 1), (1,))


class TestMobius:
    def test_roundtrip(self):
        for seed in range(5):
            f = random_set_function(5, seed)
            back = zeta(mobius(f), f.active)
            np.testing.assert_allclose(back.values, f.values, atol=1e-12)

    def test_additive_function_has_no_pair_dividends(self):
        n = 4
        w = np.array([1.0, -2.0, 0.5, 3.0])
        values = np.array([
            sum(w[i] for i in range(n) if m >> i & 1) for m in range(1 << n)
        ])
        scores = mobius(SetFunction(active=tuple(range(n)), values=values)).scores
        for s, v in scores.items():
            if len(s) >= 2:
                assert abs(v) < 1e-12

    def test_dividend_of_pure_and(self):
        # f(T) = 1 iff {0,1} subset T: single dividend at {0,1}
        values = np.array([1.0 if (m & 0b11) == 0b11 else 0.0 for m in range(8)])
        scores = mobius(SetFunction(active=(0, 1, 2), values=values)).scores
        assert scores[(0, 1)] == pytest.approx(1.0)
        mass = sum(abs(v) for s, v in scores.items() if s != (0, 1))
        assert mass < 1e-12


class TestBii:
    def test_matches_wht_closed_form(self):
        # BII(S) = (-2)^|S| Fhat(S) for the kept-bit parity transform
        for seed in range(10):
            n = 5
            f = random_set_function(n, seed)
            # reindex: table index bit i <-> mask bit i, parity basis over masks
            coeffs = brute_force_wht(f.values)
            for S in [(0,), (1, 3), (0, 2, 4)]:
                expected = ((-2.0) ** len(S)) * coeffs[subset_to_index(S)]
                assert bii(f, S) == pytest.approx(expected, abs=1e-9)


class TestSii:
    def test_efficiency(self):
        for seed in range(10):
            f = random_set_function(6, seed)
            total = sum(sii(f, (j,)) for j in f.active)
            assert total == pytest.approx(grand(f) - empty(f), abs=1e-10)

    def test_symmetric_players_equal(self):
        # f(T) = |T| gives identical Shapley values
        n = 4
        values = np.array([bin(m).count("1") for m in range(1 << n)], dtype=float)
        f = SetFunction(active=tuple(range(n)), values=values)
        vals = [sii(f, (j,)) for j in range(n)]
        np.testing.assert_allclose(vals, 1.0, atol=1e-12)


class TestStii:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_efficiency(self, k):
        for seed in range(5):
            f = random_set_function(5, seed)
            total = sum(stii(f, k).scores.values())
            assert total == pytest.approx(grand(f) - empty(f), abs=1e-10)

    def test_low_orders_are_bare_derivatives(self):
        f = random_set_function(4, 7)
        scores = stii(f, 3).scores
        assert scores[(0,)] == pytest.approx(discrete_derivative(f, (0,), ()))
        assert scores[(1, 2)] == pytest.approx(discrete_derivative(f, (1, 2), ()))


class TestFsii:
    def test_order1_matches_shapley(self):
        for seed in range(10):
            f = random_set_function(5, seed)
            scores = fsii(f, 1).scores
            sv = shapley_values(f)
            for j in f.active:
                assert scores[(j,)] == pytest.approx(sv[j], abs=1e-8)

    def test_interpolates_extremes(self):
        f = random_set_function(4, 3)
        scores = fsii(f, 2).scores
        assert scores[()] == pytest.approx(empty(f), abs=1e-8)
        assert sum(scores.values()) == pytest.approx(grand(f), abs=1e-8)

    def test_full_order_reproduces_mobius(self):
        f = random_set_function(4, 5)
        scores = fsii(f, 4).scores
        mob = mobius(f).scores
        for s, v in mob.items():
            assert scores[s] == pytest.approx(v, abs=1e-6)


class TestFbiiFromFourier:
    def test_matches_wls_oracle(self):
        # FBII of order <= k equals the multilinear coefficients of the
        # uniform-measure degree-<= k least-squares fit
        rng = np.random.default_rng(0)
        p = 6
        pool = enumerate_subsets(p, 3)
        picks = rng.choice(len(pool), size=5, replace=False)
        support = tuple(pool[i] for i in picks)
        coeffs = rng.normal(size=5)
        s = FourierSurrogate(p=p, max_order=3, support=support,
                            coefficients=coeffs)
        k = 3
        got = fbii_from_fourier(s, k).scores

        masks = ((np.arange(1 << p)[:, None] >> np.arange(p)) & 1).astype(float)
        y = parity_matrix(support, masks.astype(np.int8)) @ coeffs
        monos = [w for w in enumerate_subsets(p, k)]
        X = np.stack([
            np.ones(1 << p) if not w else masks[:, list(w)].prod(axis=1)
            for w in monos
        ], axis=1)
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        oracle = dict(zip(monos, beta))
        for w, v in got.items():
            assert v == pytest.approx(oracle[w], abs=1e-8)

    def test_pure_parity_scores(self):
        s = FourierSurrogate(p=5, max_order=3, support=((0, 1, 2),),
                            coefficients=np.array([1.0]))
        got = fbii_from_fourier(s, 3).scores
        assert got[(0, 1, 2)] == pytest.approx(-8.0)
        assert got[(0, 1)] == pytest.approx(4.0)
        assert got[(0,)] == pytest.approx(-2.0)
        assert got[()] == pytest.approx(1.0)


class TestFourierAndMobiusIndices:
    def test_fourier_index_is_abs_coefficients(self):
        s = FourierSurrogate(p=4, max_order=2, support=((0,), (1, 2)),
                            coefficients=np.array([-3.0, 0.5]))
        scores = fourier_index(s).scores
        assert scores[(0,)] == 3.0
        assert scores[(1, 2)] == 0.5

    def test_mobius_from_fourier_matches_tabulated(self):
        rng = np.random.default_rng(4)
        support = ((), (0, 1), (1, 2, 3))
        s = FourierSurrogate(p=4, max_order=3, support=support,
                            coefficients=rng.normal(size=3))
        direct = mobius(restrict_surrogate(s)).scores
        converted = mobius_from_fourier(s).scores
        for sub, v in direct.items():
            assert converted.get(sub, 0.0) == pytest.approx(v, abs=1e-10)


class TestRestrictSurrogate:
    def test_out_of_active_features_kept(self):
        # support touches only features 1 and 3 of p=5; others fixed to 1
        s = FourierSurrogate(p=5, max_order=2, support=((1, 3),),
                            coefficients=np.array([2.0]))
        f = restrict_surrogate(s)
        assert f.active == (1, 3)
        # all kept: parity +1 -> 2.0; one dropped: parity -1 -> -2.0
        assert f.values[0b11] == pytest.approx(2.0)
        assert f.values[0b01] == pytest.approx(-2.0)
        assert f.values[0b00] == pytest.approx(2.0)

    def test_scores_entry_point_matches_directs(self):
        f = random_set_function(4, 9)
        s_bii = scores_from_set_function(f, "bii", 2).scores
        assert s_bii[(0, 1)] == pytest.approx(bii(f, (0, 1)))
        s_sii = scores_from_set_function(f, "sii", 2).scores
        assert s_sii[(2,)] == pytest.approx(sii(f, (2,)))


class TestIndexScores:
    def test_ranked_by_magnitude(self):
        scores = IndexScores(kind="bii", k=2,
                             scores={(0,): 1.0, (1, 2): -5.0, (3,): 2.0})
        ranked = scores.ranked()
        assert [s for s, _ in ranked] == [(1, 2), (3,), (0,)]

    def test_min_size_filter(self):
        scores = IndexScores(kind="bii", k=2, scores={(0,): 9.0, (1, 2): 1.0})
        assert scores.ranked(min_size=2) == [((1, 2), 1.0)]

    def test_json_sorted(self):
        import json
        scores = IndexScores(kind="fbii", k=2, scores={(0, 1): 0.5, (2,): -2.0})
        obj = json.loads(scores.to_json())
        assert obj["kind"] == "fbii"
        assert obj["entries"][0]["subset"] == [2]
