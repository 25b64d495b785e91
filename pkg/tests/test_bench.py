import json

import numpy as np
import pytest

from vmbench.bench import BenchConfig, BenchmarkReport, ConfigError, load_bench_config, run_benchmark
from vmbench.bench.report import MissingTraces, accuracy_vs_nif, cumulative_accuracy, mdar_vs_nif
from vmbench.bench.runner import groups_for
from vmbench.datagen import GeneratorConfig
from vmbench.impute import ImputerSpec
from vmbench.regress import KINDS
from vmbench.tuning import SearchSpace

SPACE = SearchSpace({
    "gradient_boosting": ({"n_trees": 15, "max_depth": 2},),
    "neural_network": ({"hidden_layer_sizes": (8,), "max_epochs": 15},),
    "pls": ({"n_components": 2},),
    "linear_svr": ({"max_epochs": 10},),
})
GEN = GeneratorConfig(n_samples=160, n_features=14, n_informative=3, n_tools=2,
                      missingness_profile=((0.5, 0.6), (0.5, 0.95)), seed=2)


def tiny(**kw):
    base = dict(generator=GEN, search_space=SPACE, stop_nif=6, parallelism=1,
                imputers=(ImputerSpec("random"), ImputerSpec("nearest"), ImputerSpec("knn"),
                          ImputerSpec("arima"), ImputerSpec("random_forest", {"n_trees": 3, "max_iterations": 1})))
    base.update(kw)
    return BenchConfig(**base)


@pytest.fixture(scope="module")
def report():
    return run_benchmark(tiny())


def test_full_cross_product(report):
    assert len(report.runs) == 30 and not report.errors
    assert set(report.runs) == set(report.cells())


def test_summary_uses_dev_argmax(report):
    for row in report.summary():
        tr = report.trace(row["imputer"], row["regressor"], row["seed"])
        dev = tr.column("dev_accuracy")
        b = dev.index(max(dev))
        assert row["best_iteration"] == b
        assert row["test_accuracy"] == tr.iterations[b]["test_accuracy"]


def test_analysis_tables(report):
    rows = accuracy_vs_nif(report, "train")
    assert len(rows) == sum(len(t) for t in report.runs.values())
    md = mdar_vs_nif(report)
    assert {r["pairing"] for r in md} == {"gradient_boosting", "neural_network"}
    cum = cumulative_accuracy(report, "gradient_boosting")
    for imp in report.imputer_kinds:
        f = [r["cumulative_fraction"] for r in cum if r["imputer"] == imp]
        a = [r["accuracy"] for r in cum if r["imputer"] == imp]
        assert f[-1] == 1.0 and np.all(np.diff(a) >= 0) and np.all(np.diff(f) > 0)


def test_fully_observed_mdar_is_one():
    cfg = tiny(generator=GeneratorConfig(**{**GEN.to_dict(), "missingness_profile": ((1.0, 1.0),)}),
               imputers=(ImputerSpec("nearest"),), regressors=("gradient_boosting",))
    assert all(r["mdar"] == 1.0 for r in mdar_vs_nif(run_benchmark(cfg)))


def test_single_iteration_cdf():
    cfg = tiny(imputers=(ImputerSpec("nearest"),), regressors=("lls",), stop_nif=100)
    rows = cumulative_accuracy(run_benchmark(cfg), "lls")
    assert len(rows) == 1 and rows[0]["cumulative_fraction"] == 1.0


def test_write_read_round_trip(report, tmp_path):
    report.write(tmp_path / "r")
    back = BenchmarkReport.read(tmp_path / "r")
    assert set(back.runs) == set(report.runs)
    for k in report.runs:
        assert back.runs[k].to_jsonl() == report.runs[k].to_jsonl()
    assert back.analysis_csvs() == report.analysis_csvs()
    manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert manifest["config_hash"] == report.config.hash()
    assert len(list((tmp_path / "r" / "traces").glob("*.jsonl"))) == 30
    assert (tmp_path / "r" / "truth" / "seed0.json").exists()


def test_failure_isolation(report, tmp_path):
    cfg = tiny(inject_failures=(("knn", "gradient_boosting"),))
    broken = run_benchmark(cfg)
    assert list(broken.errors) == [("knn", "gradient_boosting", 0)]
    assert len(broken.runs) == 29
    for k, tr in broken.runs.items():
        assert tr.to_jsonl() == report.runs[k].to_jsonl()
    broken.write(tmp_path / "b")
    cells = json.loads((tmp_path / "b" / "manifest.json").read_text())["cells"]
    assert sum(c["status"] == "error" for c in cells) == 1
    assert "InjectedFailure" in broken.errors[("knn", "gradient_boosting", 0)]


def test_parallel_matches_inline(report):
    par = run_benchmark(tiny(parallelism=2, regressors=("gradient_boosting", "neural_network", "lls")))
    for k, tr in par.runs.items():
        assert tr.to_jsonl() == report.runs[k].to_jsonl()


def test_groups_share_gb_and_nn():
    assert groups_for(KINDS)[0] == ("gradient_boosting", "neural_network")
    assert sorted(sum(groups_for(KINDS), ())) == sorted(KINDS)
    assert groups_for(("lls", "neural_network")) == [("lls",), ("neural_network",)]


def test_empty_report_raises():
    empty = BenchmarkReport(tiny())
    with pytest.raises(MissingTraces):
        accuracy_vs_nif(empty)
    with pytest.raises(MissingTraces):
        mdar_vs_nif(empty)


class TestConfig:
    def test_hash_ignores_parallelism_and_out_dir(self):
        assert tiny().hash() == tiny(parallelism=3, out_dir="x").hash()
        assert tiny().hash() != tiny(seeds=(1,)).hash()

    def test_round_trip(self):
        cfg = tiny(seeds=(0, 3), inject_failures=(("random", "lls"),))
        assert BenchConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))).to_dict() == cfg.to_dict()

    @pytest.mark.parametrize("bad", [
        {"generator": "paper", "imputer": ["knn"]},
        {"generator": "paper", "dataset": "x.csv"},
        {},
        {"generator": "paper", "regressors": ["ridge"]},
        {"generator": "paper", "imputers": ["mice"]},
        {"generator": "paper", "stop_nif": 0},
        {"generator": {"n_sample": 3}},
        {"generator": "paper", "search_space": {"pls": []}},
    ])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            BenchConfig.from_dict(bad)

    def test_env_overrides(self):
        cfg = tiny().with_env({"VMBENCH_OUT_DIR": "/tmp/o", "VMBENCH_PARALLELISM": "3"})
        assert cfg.out_dir == "/tmp/o" and cfg.width == 3
        with pytest.raises(ConfigError):
            tiny().with_env({"VMBENCH_PARALLELISM": "many"})

    def test_load_relative_dataset(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"dataset": "d.csv"}))
        assert load_bench_config(tmp_path / "c.json").dataset == str(tmp_path / "d.csv")

    def test_paper_generator_overrides(self):
        cfg = BenchConfig.from_dict({"generator": {"profile": "paper", "n_samples": 500}})
        assert cfg.generator.n_samples == 500 and cfg.generator.n_features == 200
        assert cfg.generator_for(3).seed == cfg.generator.seed + 3
