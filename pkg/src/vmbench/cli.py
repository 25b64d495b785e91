"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 benchmark finished with
failed cells, 4 analysis or plot error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .bench import BenchmarkReport, ConfigError, load_bench_config, run_benchmark
from .bench.config import ENV_OUT_DIR, parse_generator
from .bench.report import ReportError
from .datagen import InvalidConfig, generate, load_config
from .dataset import DatasetError, missingness_histogram, preprocess, read_csv, split, write_csv
from .impute import ImputeError, ImputerSpec, impute, write_imputed
from .plot import FIGURES, plot

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_ANALYSIS = 0, 2, 3, 4


def _out_dir(flag: str | None, config_value: str | None, default: str) -> Path:
    """Precedence: command-line flag, then environment, then config file, then default."""
    return Path(flag or os.environ.get(ENV_OUT_DIR) or config_value or default)


def _read_json(path: str) -> dict:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}")
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return d


def cmd_generate(args) -> int:
    if not Path(args.config).exists():
        raise ConfigError(f"config file not found: {args.config}")
    cfg = load_config(args.config)
    out = _out_dir(args.out, None, "generated")
    out.mkdir(parents=True, exist_ok=True)
    ds, gt = generate(cfg)
    write_csv(ds, out / "dataset.csv")
    (out / "truth.json").write_text(json.dumps(gt.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {ds.n_samples} x {ds.n_features} dataset to {out}")
    print("feature availability histogram:")
    print(missingness_histogram(ds).format())
    return EXIT_OK


def cmd_impute(args) -> int:
    d = _read_json(args.config)
    unknown = set(d) - {"dataset", "generator", "imputer", "seed", "split_strategy", "out_dir"}
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    if "imputer" not in d:
        raise ConfigError("missing 'imputer'")
    seed = int(d.get("seed", 0))
    imp_cfg = d["imputer"]
    spec = ImputerSpec(imp_cfg) if isinstance(imp_cfg, str) else ImputerSpec.from_dict(imp_cfg)
    spec = ImputerSpec(spec.kind, spec.params, seed)
    if d.get("dataset"):
        p = Path(d["dataset"])
        ds = read_csv(p if p.is_absolute() else Path(args.config).parent / p)
    elif d.get("generator") is not None:
        ds, _ = generate(parse_generator(d["generator"]))
    else:
        raise ConfigError("set 'dataset' or 'generator'")
    sp = split(ds, d.get("split_strategy", "random"), seed)
    imputed = impute(preprocess(ds, sp), spec, sp)
    out = _out_dir(args.out, d.get("out_dir"), "imputed")
    out.mkdir(parents=True, exist_ok=True)
    write_imputed(imputed, out / f"imputed_{spec.kind}.csv")
    print(f"imputed {int((~imputed.provenance_mask).sum())} entries with {spec.kind}; wrote {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_bench_config(args.config).with_env()
    out = _out_dir(args.out, cfg.out_dir, "report")
    report = run_benchmark(cfg)
    report.write(out)
    print(f"best-dev test accuracy (report in {out}):")
    print(report.format_table())
    if report.errors:
        for key, err in sorted(report.errors.items()):
            print(f"cell {key[0]}/{key[1]} seed {key[2]} failed: {err}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_plot(args) -> int:
    report = BenchmarkReport.read(args.report_dir)
    out = args.out or str(Path(args.report_dir) / f"{args.figure}.svg")
    plot(report, args.figure, out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    report = BenchmarkReport.read(args.report_dir)
    out = Path(args.out) if args.out else Path(args.report_dir) / "analysis"
    out.mkdir(parents=True, exist_ok=True)
    for name, text in report.analysis_csvs().items():
        with open(out / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    print(report.format_table())
    return EXIT_PARTIAL if report.errors else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vmbench", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"vmbench {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset")
    g.add_argument("config", help="generator config JSON")
    g.add_argument("-o", "--out", help="output directory")
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("impute", help="impute one dataset with one imputer")
    i.add_argument("config", help="impute config JSON")
    i.add_argument("-o", "--out", help="output directory")
    i.set_defaults(func=cmd_impute)

    b = sub.add_parser("bench", help="run the imputer x regressor cross-benchmark")
    b.add_argument("config", help="benchmark config JSON")
    b.add_argument("-o", "--out", help="report directory")
    b.set_defaults(func=cmd_bench)

    pl = sub.add_parser("plot", help="render a figure from a report directory")
    pl.add_argument("report_dir")
    pl.add_argument("figure", help=", ".join(FIGURES))
    pl.add_argument("-o", "--out", help="SVG path (default: <report_dir>/<figure>.svg)")
    pl.set_defaults(func=cmd_plot)

    r = sub.add_parser("report", help="re-export analysis tables and print the summary")
    r.add_argument("report_dir")
    r.add_argument("-o", "--out", help="directory for the CSVs (default: <report_dir>/analysis)")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidConfig, ImputeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReportError, DatasetError) as exc:
        code = EXIT_ANALYSIS if args.command in ("plot", "report") else EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS if args.command in ("plot", "report") else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
