"""Benchmark results: persistence, summary and the three analysis tables."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..regress import NONLINEAR_KINDS
from ..select import SelectionTrace
from .config import BenchConfig

CellKey = tuple[str, str, int]  # (imputer kind, regressor kind, seed)

SPLITS = ("train", "dev", "test")
MANIFEST = "manifest.json"


class ReportError(ValueError):
    pass


class MissingTraces(ReportError):
    pass


def cell_name(key: CellKey) -> str:
    imputer, regressor, seed = key
    return f"{imputer}__{regressor}__seed{seed}"


@dataclass(eq=False)
class BenchmarkReport:
    """Traces keyed by (imputer, regressor, seed) plus per-cell error records."""

    config: BenchConfig
    runs: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    generator_truth: dict = field(default_factory=dict)  # seed -> GroundTruth dict
    provenance: dict = field(default_factory=dict)

    def cells(self) -> list[CellKey]:
        """Every configured cell in canonical order (imputer, regressor, seed)."""
        return [(imp.kind, reg, seed) for imp in self.config.imputers
                for reg in self.config.regressors for seed in self.config.seeds]

    @property
    def imputer_kinds(self) -> list[str]:
        return [s.kind for s in self.config.imputers]

    @property
    def ok(self) -> bool:
        return not self.errors

    def trace(self, imputer: str, regressor: str, seed: int) -> SelectionTrace:
        return self.runs[(imputer, regressor, seed)]

    # --- summary -----------------------------------------------------------

    def summary(self) -> list[dict]:
        """Per cell: the dev-argmax iteration and its accuracies."""
        rows = []
        for key in self.cells():
            imputer, regressor, seed = key
            row = {"imputer": imputer, "regressor": regressor, "seed": seed}
            if key in self.runs:
                tr = self.runs[key]
                b = tr.best_dev_index()
                it = tr.iterations[b]
                row.update(status="ok", best_iteration=b, nif=it["nif"], train_accuracy=it["train_accuracy"],
                           dev_accuracy=it["dev_accuracy"], test_accuracy=it["test_accuracy"],
                           test_r2=it["test_r2"], mdar=it["mdar"])
            else:
                row.update(status="error", best_iteration="", nif="", train_accuracy="", dev_accuracy="",
                           test_accuracy="", test_r2="", mdar="")
            rows.append(row)
        return rows

    def best_test_accuracy(self, imputer: str, regressor: str, seed: int) -> float:
        tr = self.runs[(imputer, regressor, seed)]
        return tr.iterations[tr.best_dev_index()]["test_accuracy"]

    def format_table(self) -> str:
        """Imputers x regressors grid of best-dev test accuracy (mean over seeds)."""
        regs = list(self.config.regressors)
        width = max(len(r) for r in regs) + 2
        lines = ["imputer".ljust(14) + "".join(r.rjust(width) for r in regs)]
        for imp in self.imputer_kinds:
            cells = []
            for reg in regs:
                vals = [self.best_test_accuracy(imp, reg, s) for s in self.config.seeds
                        if (imp, reg, s) in self.runs]
                failed = any((imp, reg, s) in self.errors for s in self.config.seeds)
                text = f"{np.mean(vals):.4f}" if vals else "ERROR"
                if vals and failed:
                    text += "*"
                cells.append(text.rjust(width))
            lines.append(imp.ljust(14) + "".join(cells))
        return "\n".join(lines)

    # --- persistence -------------------------------------------------------

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        (out / "traces").mkdir(parents=True, exist_ok=True)
        (out / "analysis").mkdir(exist_ok=True)
        cells = []
        for key in self.cells():
            entry = {"imputer": key[0], "regressor": key[1], "seed": key[2]}
            if key in self.runs:
                name = f"traces/{cell_name(key)}.jsonl"
                self.runs[key].write(out / name)
                entry.update(status="ok", trace=name, iterations=len(self.runs[key]))
            else:
                entry.update(status="error", error=self.errors.get(key, "missing"))
            cells.append(entry)
        if self.generator_truth:
            (out / "truth").mkdir(exist_ok=True)
            for seed, gt in sorted(self.generator_truth.items()):
                _write_text(out / "truth" / f"seed{seed}.json", json.dumps(gt, indent=1, sort_keys=True) + "\n")
        for name, text in self.analysis_csvs().items():
            _write_text(out / "analysis" / name, text)
        manifest = {
            "config": self.config.to_dict(),
            "config_hash": self.config.hash(),
            "code_version": __version__,
            "cells": cells,
            "provenance": self.provenance,
        }
        _write_text(out / MANIFEST, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        return out

    def analysis_csvs(self) -> dict[str, str]:
        files = {}
        if self.runs:
            for split in SPLITS:
                files[f"accuracy_vs_nif_{split}.csv"] = to_csv(accuracy_vs_nif(self, split))
            if any(k[1] in NONLINEAR_KINDS for k in self.runs):
                files["mdar_vs_nif.csv"] = to_csv(mdar_vs_nif(self))
            cum = []
            for reg in self.config.regressors:
                if any(k[1] == reg for k in self.runs):
                    cum.extend({"pairing": reg, **r} for r in cumulative_accuracy(self, reg))
            files["cumulative_accuracy.csv"] = to_csv(cum)
        files["summary.csv"] = to_csv(self.summary())
        return files

    @classmethod
    def read(cls, out_dir: str | Path) -> "BenchmarkReport":
        out = Path(out_dir)
        try:
            manifest = json.loads((out / MANIFEST).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise MissingTraces(f"{out} has no {MANIFEST}")
        config = BenchConfig.from_dict(manifest["config"])
        report = cls(config, provenance=manifest.get("provenance", {}))
        for c in manifest["cells"]:
            key = (c["imputer"], c["regressor"], int(c["seed"]))
            if c["status"] == "ok":
                report.runs[key] = SelectionTrace.read(out / c["trace"])
            else:
                report.errors[key] = c.get("error", "")
        truth_dir = out / "truth"
        if truth_dir.is_dir():
            for p in sorted(truth_dir.glob("seed*.json")):
                report.generator_truth[int(p.stem[4:])] = json.loads(p.read_text(encoding="utf-8"))
        return report


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def _require(keys) -> None:
    if not keys:
        raise MissingTraces("no traces available for this analysis")


# --- analyses ----------------------------------------------------------------

def accuracy_vs_nif(report: BenchmarkReport, split: str = "test") -> list[dict]:
    """Long-form (pairing, imputer, seed, iteration, nif, accuracy) for one split."""
    if split not in SPLITS:
        raise ReportError(f"split must be one of {SPLITS}")
    keys = [k for k in report.cells() if k in report.runs]
    _require(keys)
    rows = []
    for reg in report.config.regressors:
        for key in keys:
            if key[1] != reg:
                continue
            for it in report.runs[key].iterations:
                rows.append({"pairing": reg, "imputer": key[0], "seed": key[2], "iteration": it["iteration"],
                             "nif": it["nif"], "accuracy": it[f"{split}_accuracy"]})
    return rows


def mdar_vs_nif(report: BenchmarkReport) -> list[dict]:
    """(pairing, imputer, seed, nif, mdar) for the nonlinear pairings."""
    keys = [k for k in report.cells() if k in report.runs and k[1] in NONLINEAR_KINDS]
    _require(keys)
    rows = []
    for reg in NONLINEAR_KINDS:
        for key in keys:
            if key[1] != reg:
                continue
            for it in report.runs[key].iterations:
                rows.append({"pairing": reg, "imputer": key[0], "seed": key[2], "nif": it["nif"], "mdar": it["mdar"]})
    return rows


def cumulative_accuracy(report: BenchmarkReport, pairing: str) -> list[dict]:
    """Empirical CDF of test accuracy over every iteration, per imputer."""
    rows = []
    for imp in report.imputer_kinds:
        acc = sorted(it["test_accuracy"] for (i, r, _), tr in report.runs.items()
                     if i == imp and r == pairing for it in tr.iterations)
        n = len(acc)
        rows.extend({"imputer": imp, "accuracy": a, "cumulative_fraction": (j + 1) / n}
                    for j, a in enumerate(acc))
    _require(rows)
    return rows
