import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmbench.datagen import GeneratorConfig, generate
from vmbench.dataset import make_dataset, normalize, split
from vmbench.impute import (KINDS, EmptySubset, ImputeError, ImputerSpec, impute, impute_arima, impute_knn,
                            impute_nearest, impute_random, impute_random_forest, mdar, write_imputed)
from vmbench.impute.arima import impute_series, interpolate, one_step_predictions, select_order

from conftest import random_dataset, series_dataset


def naive_mdar(mask, cols):
    total = 0
    for j in cols:
        for i in range(mask.shape[0]):
            total += 1 if mask[i, j] else 0
    return total / (len(cols) * mask.shape[0])


class TestMdar:
    def test_full_mask(self):
        assert mdar(np.ones((7, 3), bool)) == 1.0

    def test_two_by_two(self):
        assert mdar(np.array([[True, False], [False, True]])) == 0.5

    def test_empty_subset(self):
        with pytest.raises(EmptySubset):
            mdar(np.ones((3, 3), bool), [])

    def test_matches_double_loop(self, rng):
        mask = rng.random((100, 50)) < 0.6
        cols = sorted(rng.choice(50, 17, replace=False).tolist())
        assert mdar(mask) == naive_mdar(mask, range(50))
        assert mdar(mask, cols) == naive_mdar(mask, cols)


class TestRandom:
    def test_complete_data_unchanged(self, rng):
        ds = random_dataset(rng, missing=0.0)
        np.testing.assert_array_equal(impute_random(ds, seed=1).values, ds.values)

    def test_uniform_fill(self, rng):
        ds = random_dataset(rng, n=400, m=50, missing=0.5)
        out = impute_random(ds, seed=2)
        filled = out.values[~ds.mask]
        assert filled.size >= 9000
        assert filled.min() >= 0.0 and filled.max() <= 1.0
        assert abs(filled.mean() - 0.5) < 0.02


class TestNearest:
    def test_forward_fill(self):
        out = impute_nearest(series_dataset([[0.2, None, None, 0.8]]))
        np.testing.assert_array_equal(out.values[:, 0], [0.2, 0.2, 0.2, 0.8])

    def test_leading_backfill(self):
        out = impute_nearest(series_dataset([[None, 0.4, None]]))
        np.testing.assert_array_equal(out.values[:, 0], [0.4, 0.4, 0.4])

    def test_empty_series_takes_training_median(self):
        col = [0.5, 0.6, 0.7, None, None, None]
        ds = series_dataset([col], tools=["A", "A", "A", "B", "B", "B"])
        out = impute_nearest(ds)
        np.testing.assert_array_equal(out.values[3:, 0], [0.6, 0.6, 0.6])

    def test_series_follow_timestamps_within_tool(self):
        v = np.array([[0.1], [np.nan], [0.9], [np.nan]])
        ds = make_dataset(v, ["x"], ["A", "B", "A", "A"], [0.0, 0.0, 2.0, 1.0], [0, 1, 2, 3])
        out = impute_nearest(ds)
        assert out.values[3, 0] == 0.1  # time 1 follows time 0 in tool A
        assert out.values[1, 0] == 0.5  # tool B never observed: median of {0.1, 0.9}


def brute_knn(x, obs, i, j, k):
    m = x.shape[1]
    cands = []
    for r in range(x.shape[0]):
        if r == i or not obs[r, j]:
            continue
        shared = [c for c in range(m) if obs[i, c] and obs[r, c]]
        if not shared:
            continue
        d = np.sqrt(sum((x[i, c] - x[r, c]) ** 2 for c in shared)) * np.sqrt(m / len(shared))
        cands.append((d, r))
    cands.sort()
    return np.mean([x[r, j] for _, r in cands[:k]])


class TestKnn:
    def test_three_by_three_oracle(self):
        ds = series_dataset([[0.1, 0.4, 0.9], [0.2, None, 0.7], [0.3, 0.5, 0.1]])
        out = impute_knn(ds, k=2)
        x, obs = ds.values, ds.mask
        assert out.values[1, 1] == pytest.approx(brute_knn(x, obs, 1, 1, 2), abs=1e-15)
        out1 = impute_knn(ds, k=1)
        assert out1.values[1, 1] == pytest.approx(brute_knn(x, obs, 1, 1, 1), abs=1e-15)

    def test_random_blocks_match_brute_force(self, rng):
        ds = random_dataset(rng, n=30, m=5, missing=0.3, n_tools=1)
        out = impute_knn(ds, k=3)
        for i, j in zip(*np.nonzero(~ds.mask)):
            want = brute_knn(ds.values, ds.mask, i, j, 3)
            if not np.isnan(want):
                assert out.values[i, j] == pytest.approx(want, abs=1e-12)

    def test_large_k_is_tool_mean(self, rng):
        ds = random_dataset(rng, n=12, m=3, missing=0.25, n_tools=1)
        out = impute_knn(ds, k=100)
        for i, j in zip(*np.nonzero(~ds.mask)):
            assert out.values[i, j] == pytest.approx(ds.values[ds.mask[:, j], j].mean(), abs=1e-12)

    def test_duplicate_row_dominates(self):
        ds = series_dataset([[0.1, 0.1, 0.8, 0.3], [0.5, 0.5, 0.2, 0.9], [0.33, None, 0.7, 0.4]])
        assert impute_knn(ds, k=1).values[1, 2] == 0.33


class TestArima:
    def test_ar1_one_step_coverage(self):
        rng = np.random.default_rng(0)
        sigma, hits, reps = 0.1, 0, 1000
        for _ in range(reps):
            e = rng.normal(size=120) * sigma
            x = np.zeros(120)
            for t in range(1, 120):
                x[t] = 0.8 * x[t - 1] + e[t]
            obs = np.ones(120, bool)
            obs[80] = False
            out, _ = impute_series(x, obs, obs, 3, 1, 3, 0.0)
            hits += abs(out[80] - 0.8 * x[79]) < 2 * sigma
        assert hits / reps >= 0.95

    def test_constant_series(self):
        ds = series_dataset([[0.5] * 6 + [None] + [0.5] * 6])
        assert impute_arima(ds).values[6, 0] == 0.5

    def test_short_series_falls_back_to_nearest(self):
        ds = series_dataset([[0.3, None, 0.6, None, 0.2]])
        np.testing.assert_array_equal(impute_arima(ds).values, impute_nearest(ds).values)
        assert impute_arima(ds).flags["series_status"] == {"short": 1}

    def test_predictions_use_only_the_past(self):
        rng = np.random.default_rng(3)
        x = np.cumsum(rng.normal(size=60)) * 0.05 + 0.5
        obs = np.ones(60, bool)
        obs[40] = False
        a, _ = impute_series(x, obs, obs, 2, 1, 2, 0.5)
        y = x.copy()
        y[45:] += 0.3  # perturb the future; the order and coefficients stay fixed
        fit = select_order(interpolate(x, obs), 2, 1, 2)
        p1 = one_step_predictions(interpolate(x, obs), obs, fit)
        p2 = one_step_predictions(interpolate(y, obs), obs, fit)
        assert p1[40] == p2[40]
        assert a[40] == p1[40]


class TestRandomForest:
    def test_recovers_sum(self):
        rng = np.random.default_rng(5)
        a, b = rng.random(500) * 0.5, rng.random(500) * 0.5
        c = a + b
        miss = rng.random(500) < 0.3
        ds = series_dataset([a, b, np.where(miss, np.nan, c)])
        out = impute_random_forest(ds, ImputerSpec("random_forest", seed=1))
        rmse = np.sqrt(np.mean((out.values[miss, 2] - c[miss]) ** 2))
        assert rmse < 0.05

    def test_complete_data_unchanged(self, rng):
        ds = random_dataset(rng, missing=0.0)
        np.testing.assert_array_equal(impute_random_forest(ds).values, ds.values)

    def test_fully_missing_feature_keeps_median(self):
        a = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
        ds = series_dataset([a + a, [0.9] * 6 + [None] * 6, a[::-1] + a],
                            tools=["A"] * 6 + ["B"] * 6)
        out = impute_random_forest(ds)
        np.testing.assert_array_equal(out.values[6:, 1], [0.9] * 6)


def contract_check(ds, sp, seed):
    for kind in KINDS:
        spec = ImputerSpec(kind, seed=seed)
        a = impute(ds, spec, sp)
        b = impute(ds, spec, sp)
        assert np.array_equal(a.values[ds.mask], ds.values[ds.mask]), kind
        assert np.isfinite(a.values).all(), kind
        assert np.array_equal(a.values, b.values), kind
        assert a.values.min() >= 0.0 and a.values.max() <= 1.0, kind
        np.testing.assert_array_equal(a.provenance_mask, ds.mask)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(20, 80), m=st.integers(2, 8),
       missing=st.floats(0.0, 0.6), tools=st.integers(1, 3))
def test_contracts_property(seed, n, m, missing, tools):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, n=n, m=m, missing=missing, n_tools=tools)
    contract_check(ds, split(ds, seed=seed), seed)


def test_knn_donors_are_training_rows_only(rng):
    ds = random_dataset(rng, n=60, m=4, missing=0.3, n_tools=1)
    sp = split(ds, seed=0)
    # rewriting observed test entries must not move any imputed train/dev entry
    v = ds.values.copy()
    test_obs = np.zeros_like(ds.mask)
    test_obs[sp.test] = ds.mask[sp.test]
    v[test_obs] = 1.0 - v[test_obs]
    ds2 = ds.with_values(v)
    keep = np.ones(ds.n_samples, bool)
    keep[sp.test] = False
    a = impute(ds, ImputerSpec("knn"), sp).values
    b = impute(ds2, ImputerSpec("knn"), sp).values
    np.testing.assert_array_equal(a[keep], b[keep])


def test_nearest_beats_random_on_drifting_data():
    for seed in range(5):
        cfg = GeneratorConfig(n_samples=2000, n_features=30, n_informative=3, drift_strength=1.0,
                              missingness_profile=((1.0, 0.6),), tool_feature=False, seed=seed)
        ds, _ = generate(cfg)
        full, _ = generate(GeneratorConfig(**{**cfg.to_dict(), "missingness_profile": ((1.0, 1.0),)}))
        sp = split(ds, seed=seed)
        norm, params = normalize(ds, sp)
        lo, hi = params.minimum, params.maximum
        truth = np.clip((full.values - lo) / (hi - lo), 0, 1)
        miss = ~ds.mask
        rmse = {}
        for kind in ("nearest", "random"):
            out = impute(norm, ImputerSpec(kind, seed=seed), sp)
            rmse[kind] = np.sqrt(np.mean((out.values[miss] - truth[miss]) ** 2))
        assert rmse["nearest"] < rmse["random"]


def test_spec_validation():
    with pytest.raises(ImputeError):
        ImputerSpec("mice")
    with pytest.raises(ImputeError):
        ImputerSpec("knn", {"k": 0})
    with pytest.raises(ImputeError):
        ImputerSpec("arima", {"max_p": -1})
    with pytest.raises(ImputeError):
        ImputerSpec("random_forest", {"n_trees": 0})
    with pytest.raises(ImputeError):
        ImputerSpec("knn", {"neighbours": 3})


def test_write_imputed_provenance(tmp_path, rng):
    ds = random_dataset(rng, n=30, m=3)
    imp = impute(ds, ImputerSpec("nearest", seed=4))
    write_imputed(imp, tmp_path / "imp.csv")
    prov = json.loads((tmp_path / "imp.provenance.json").read_text())
    assert prov["imputer"]["kind"] == "nearest" and prov["seed"] == 4
    assert prov["imputed_counts"] == {f: int(c) for f, c in zip(ds.feature_ids, (~ds.mask).sum(0))}
    assert "fallback_flags" in prov
