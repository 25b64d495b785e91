import numpy as np
import pytest

from vmbench.datagen import GeneratorConfig, InvalidConfig, generate, load_config, paper_profile, save_config
from vmbench.dataset import availability, missingness_histogram, split
from vmbench.regress import RegressorSpec, fit, predict, r2_score


def small(**kw):
    base = dict(n_samples=400, n_features=20, n_informative=4, n_tools=2, seed=3)
    base.update(kw)
    return GeneratorConfig(**base)


def test_same_seed_bit_identical():
    a, ga = generate(small())
    b, gb = generate(small())
    np.testing.assert_array_equal(a.mask, b.mask)
    np.testing.assert_array_equal(np.nan_to_num(a.values, nan=-7), np.nan_to_num(b.values, nan=-7))
    np.testing.assert_array_equal(a.target, b.target)
    assert ga.to_dict() == gb.to_dict()
    c, _ = generate(small(seed=4))
    assert not np.array_equal(a.target, c.target)


@pytest.mark.parametrize("bad", [
    dict(n_informative=25),
    dict(missingness_profile=((0.5, 0.5), (0.4, 0.9))),
    dict(missingness_profile=((1.0, 1.2),)),
    dict(nonlinearity="cubic"),
    dict(missingness_mechanism="MNAR"),
    dict(noise_std=-1.0),
])
def test_invalid_configs(bad):
    with pytest.raises(InvalidConfig):
        generate(small(**bad))


def test_noiseless_linear_is_exactly_recoverable():
    ds, _ = generate(small(nonlinearity="linear", noise_std=0.0, n_features=15, tool_feature=False,
                           tool_offset_std=0.0, n_samples=300))
    sp = split(ds, seed=0)
    # raw features: min-max clipping of out-of-range test rows would break exactness
    X = ds.values
    model = fit(RegressorSpec("lls"), X[sp.train], ds.target[sp.train], ds.feature_ids)
    assert r2_score(ds.target[sp.test], predict(model, X[sp.test])) >= 0.999


@pytest.mark.parametrize("nonlinearity", ["linear", "interactions", "interactions_plus_thresholds"])
def test_achievable_r2_matches_monte_carlo(nonlinearity):
    cfg = small(nonlinearity=nonlinearity, noise_std=0.3, n_informative=8, n_tools=5)
    _, gt = generate(cfg)
    rng = np.random.default_rng(99)
    n = 100_000
    z = rng.standard_normal((n, cfg.n_informative))  # stationary AR(1) marginals are N(0, 1)
    tools = rng.integers(0, cfg.n_tools, n)
    y = gt.signal(z, tools) + cfg.noise_std * rng.standard_normal(n)
    mc = 1.0 - cfg.noise_std ** 2 / y.var()
    assert abs(gt.achievable_r2 - mc) < 0.01


def test_profile_histogram_matches_requested_fractions():
    ds, _ = generate(small(n_samples=1000, n_features=100, missingness_profile=((0.85, 0.5), (0.15, 0.97))))
    h = missingness_histogram(ds, 10)
    assert h.counts[5] == 85 and h.counts[9] == 15


def test_availability_within_three_points():
    cfg = paper_profile(n_samples=1000)
    ds, _ = generate(cfg)
    av = np.sort(availability(ds.mask))
    want = np.sort(np.repeat([a for _, a in cfg.missingness_profile],
                             [round(f * cfg.n_features) for f, _ in cfg.missingness_profile]))
    assert len(want) == len(av)
    assert np.abs(av - want).max() <= 0.03


def test_tool_block_availability_within_three_points():
    cfg = small(n_samples=1200, missingness_profile=((0.5, 0.5), (0.5, 0.8)), missingness_mechanism="tool_block")
    ds, _ = generate(cfg)
    av = availability(ds.mask)
    assert np.all(np.minimum(abs(av - 0.5), abs(av - 0.8)) <= 0.03)


def test_drifting_sensors_are_autocorrelated():
    ds, _ = generate(small(n_samples=2000, drift_strength=1.0, missingness_profile=((1.0, 1.0),)))
    for tool in ds.tools():
        rows = ds.tool_rows(tool)
        assert len(rows) >= 500
        for j in range(ds.n_features - 1):
            x = ds.values[rows, j]
            r = np.corrcoef(x[:-1], x[1:])[0, 1]
            assert r > 0.5 and abs(r - 0.75) < 0.1  # coefficient 1 - 1/(1 + 1)^2


def test_paper_profile_counts():
    cfg = paper_profile()
    ds, gt = generate(cfg)
    assert (cfg.n_samples, cfg.n_features) == (2000, 200)
    av = availability(ds.mask)
    assert abs(int(np.sum(np.abs(av - 0.5) < 0.03)) - 140) <= 2
    assert abs(int(np.sum(np.abs(av - 0.97) < 0.01)) - 17) <= 1
    assert len(gt.informative_ids) == 10
    assert paper_profile(n_samples=500).n_samples == 500
    assert paper_profile(n_samples=500).missingness_profile == cfg.missingness_profile


def test_config_file_round_trip(tmp_path):
    cfg = paper_profile(seed=5)
    save_config(cfg, tmp_path / "g.json")
    assert load_config(tmp_path / "g.json") == cfg
    (tmp_path / "p.json").write_text('{"profile": "paper", "n_samples": 300}')
    assert load_config(tmp_path / "p.json") == paper_profile(n_samples=300)
    (tmp_path / "bad.json").write_text('{"n_sample": 300}')
    with pytest.raises(InvalidConfig, match="n_sample"):
        load_config(tmp_path / "bad.json")
