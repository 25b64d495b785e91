import json
import re

import numpy as np
import pytest

from vmbench.cli import main
from vmbench.dataset import read_csv

GEN = {"n_samples": 160, "n_features": 14, "n_informative": 3, "n_tools": 2,
       "missingness_profile": [[0.5, 0.6], [0.5, 0.95]], "seed": 2}
SPACE = {
    "gradient_boosting": [{"n_trees": 15, "max_depth": 2}],
    "neural_network": [{"hidden_layer_sizes": [8], "max_epochs": 15}],
    "pls": [{"n_components": 2}],
    "linear_svr": [{"max_epochs": 10}],
}
IMPUTERS = ["random", "nearest", "knn", "arima", {"kind": "random_forest", "params": {"n_trees": 3, "max_iterations": 1}}]


def bench_config(tmp_path, **kw):
    cfg = {"generator": GEN, "imputers": IMPUTERS, "search_space": SPACE, "stop_nif": 6, "parallelism": 1}
    cfg.update(kw)
    path = tmp_path / f"bench_{len(list(tmp_path.glob('bench_*')))}.json"
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture(scope="module")
def report_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    assert main(["bench", bench_config(tmp), "-o", str(tmp / "rep")]) == 0
    return tmp / "rep"


class TestGenerate:
    def test_paper_profile(self, tmp_path, capsys):
        (tmp_path / "g.json").write_text('{"profile": "paper", "n_samples": 300}')
        assert main(["generate", str(tmp_path / "g.json"), "-o", str(tmp_path / "out")]) == 0
        for name in ("dataset.csv", "dataset.features.json", "truth.json", "config.json"):
            assert (tmp_path / "out" / name).exists()
        out = capsys.readouterr().out
        row = next(line for line in out.splitlines() if line.startswith("[0.50, 0.60)"))
        ds = read_csv(tmp_path / "out" / "dataset.csv")
        n_half = int(np.sum(np.abs(ds.mask.mean(0) - 0.5) < 0.05))
        assert int(row.split()[2]) == n_half
        assert abs(n_half - 0.70 * ds.n_features) <= 2

    def test_deterministic(self, tmp_path):
        (tmp_path / "g.json").write_text(json.dumps(GEN))
        for d in ("a", "b"):
            assert main(["generate", str(tmp_path / "g.json"), "-o", str(tmp_path / d)]) == 0
        for name in ("dataset.csv", "dataset.features.json", "truth.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_malformed_config(self, tmp_path, capsys):
        (tmp_path / "g.json").write_text('{"n_samples": 100, "nosie_std": 0.1}')
        assert main(["generate", str(tmp_path / "g.json"), "-o", str(tmp_path / "o")]) == 2
        assert "nosie_std" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["generate", str(tmp_path / "nope.json")]) == 2

    def test_env_out_dir(self, tmp_path, monkeypatch):
        (tmp_path / "g.json").write_text(json.dumps(GEN))
        monkeypatch.setenv("VMBENCH_OUT_DIR", str(tmp_path / "env"))
        assert main(["generate", str(tmp_path / "g.json")]) == 0
        assert (tmp_path / "env" / "dataset.csv").exists()


def test_impute_command(tmp_path):
    (tmp_path / "i.json").write_text(json.dumps({"generator": GEN, "imputer": "knn", "seed": 1}))
    assert main(["impute", str(tmp_path / "i.json"), "-o", str(tmp_path / "o")]) == 0
    ds = read_csv(tmp_path / "o" / "imputed_knn.csv")
    assert ds.mask.all()
    prov = json.loads((tmp_path / "o" / "imputed_knn.provenance.json").read_text())
    assert prov["imputer"]["kind"] == "knn" and prov["seed"] == 1
    (tmp_path / "bad.json").write_text(json.dumps({"generator": GEN, "imputer": "mice"}))
    assert main(["impute", str(tmp_path / "bad.json")]) == 2


class TestBench:
    def test_thirty_traces_and_table(self, report_dir):
        assert len(list((report_dir / "traces").glob("*.jsonl"))) == 30
        for name in ("accuracy_vs_nif_train.csv", "accuracy_vs_nif_dev.csv", "accuracy_vs_nif_test.csv",
                     "mdar_vs_nif.csv", "cumulative_accuracy.csv", "summary.csv"):
            assert (report_dir / "analysis" / name).exists()

    def test_table_entry_matches_trace_file(self, tmp_path, capsys):
        assert main(["bench", bench_config(tmp_path), "-o", str(tmp_path / "r")]) == 0
        lines = capsys.readouterr().out.splitlines()
        header = lines[1].split()
        row = next(line.split() for line in lines if line.startswith("nearest "))
        shown = float(row[header.index("gradient_boosting")])
        recs = [json.loads(x) for x in
                (tmp_path / "r" / "traces" / "nearest__gradient_boosting__seed0.jsonl").read_text().splitlines()]
        dev = [r["dev_accuracy"] for r in recs]
        assert shown == round(recs[dev.index(max(dev))]["test_accuracy"], 4)
        assert len(header) == 7 and sum(1 for line in lines[2:] if line.split()[0] in
                                        ("random", "nearest", "knn", "arima", "random_forest")) == 5

    def test_byte_identical_reruns(self, tmp_path, report_dir):
        assert main(["bench", bench_config(tmp_path), "-o", str(tmp_path / "again")]) == 0
        for sub in ("traces", "analysis"):
            a = sorted((report_dir / sub).iterdir())
            b = sorted((tmp_path / "again" / sub).iterdir())
            assert [p.name for p in a] == [p.name for p in b]
            for x, y in zip(a, b):
                assert x.read_bytes() == y.read_bytes(), x.name

    def test_injected_failure_exit_3(self, tmp_path, capsys):
        path = bench_config(tmp_path, inject_failures=[["arima", "pls"]])
        assert main(["bench", path, "-o", str(tmp_path / "r")]) == 3
        assert len(list((tmp_path / "r" / "traces").glob("*.jsonl"))) == 29
        cells = json.loads((tmp_path / "r" / "manifest.json").read_text())["cells"]
        errors = [c for c in cells if c["status"] == "error"]
        assert len(errors) == 1 and errors[0]["imputer"] == "arima" and errors[0]["regressor"] == "pls"
        assert "arima/pls" in capsys.readouterr().err

    def test_bad_config_exit_2(self, tmp_path):
        assert main(["bench", bench_config(tmp_path, regressors=["ridge"])]) == 2


class TestPlotAndReport:
    def test_fig3_panels_and_series(self, report_dir, tmp_path):
        out = tmp_path / "fig3.svg"
        assert main(["plot", str(report_dir), "fig3", "-o", str(out)]) == 0
        svg = out.read_text()
        panels = re.findall(r'<g class="panel"[^>]*data-xscale="(\w+)"', svg)
        assert panels == ["log"] * 6
        assert len(re.findall(r'<polyline class="series"', svg)) == 30
        for chunk in svg.split('<g class="panel"')[1:]:
            assert len(set(re.findall(r'data-series="([^"]+)"', chunk))) == 5

    def test_fig4c_log_axis_and_series(self, report_dir, tmp_path):
        assert main(["plot", str(report_dir), "fig4c", "-o", str(tmp_path / "c.svg")]) == 0
        svg = (tmp_path / "c.svg").read_text()
        assert re.findall(r'data-xscale="(\w+)"', svg) == ["log", "log"]
        first = svg.split('<g class="panel"')[1]
        assert len(re.findall(r'data-series=', first)) == 5

    @pytest.mark.parametrize("fig", ["fig2", "fig4a", "fig4b"])
    def test_other_figures(self, report_dir, tmp_path, fig):
        assert main(["plot", str(report_dir), fig, "-o", str(tmp_path / f"{fig}.svg")]) == 0
        assert (tmp_path / f"{fig}.svg").read_text().startswith("<svg")

    def test_unknown_figure_and_empty_report(self, report_dir, tmp_path):
        assert main(["plot", str(report_dir), "fig9"]) == 4
        assert main(["plot", str(tmp_path / "nothing"), "fig3"]) == 4

    def test_empty_report_missing_traces(self, tmp_path):
        path = bench_config(tmp_path, imputers=["nearest"], regressors=["lls"], inject_failures=[["nearest", "lls"]])
        assert main(["bench", path, "-o", str(tmp_path / "r")]) == 3
        assert main(["plot", str(tmp_path / "r"), "fig3"]) == 4
        assert main(["report", str(tmp_path / "r")]) == 3

    def test_report_re_exports(self, report_dir, tmp_path):
        assert main(["report", str(report_dir), "-o", str(tmp_path / "a")]) == 0
        for p in (report_dir / "analysis").iterdir():
            assert (tmp_path / "a" / p.name).read_bytes() == p.read_bytes()
