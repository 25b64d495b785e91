"""Cross-benchmark execution: impute once per (seed, imputer), then run cells."""

from __future__ import annotations

import logging
import platform
import time
from concurrent.futures import FIRST_COMPLETED, Future, ProcessPoolExecutor, wait
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from ..datagen import generate
from ..dataset import preprocess, read_csv, split
from ..impute import ImputedDataset, impute
from ..select import SelectorPairing, run_selection
from .config import BenchConfig
from .report import BenchmarkReport

log = logging.getLogger("vmbench.bench")


class InjectedFailure(RuntimeError):
    pass


class _Inline:
    """Executor stand-in that runs each job at submission (width 1)."""

    def submit(self, fn, *args):
        fut = Future()
        try:
            fut.set_result(fn(*args))
        except BaseException as exc:  # delivered through the future like a worker error
            fut.set_exception(exc)
        return fut

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def prepare(cfg: BenchConfig, seed: int):
    """Dataset for one run seed: (preprocessed dataset, split, ground truth dict or None)."""
    if cfg.generator is not None:
        ds, gt = generate(cfg.generator_for(seed))
        truth = gt.to_dict()
    else:
        ds = read_csv(cfg.dataset)
        truth = None
    sp = split(ds, cfg.split_strategy, seed)
    return preprocess(ds, sp), sp, truth


def groups_for(regressors) -> list[tuple[str, ...]]:
    """Cells run together when they can share tuning work.

    The neural-network pairing selects features with gradient boosting, so
    it walks exactly the gradient-boosting pairing's feature path; running
    the two in one job lets the second reuse those fits. Heaviest first.
    """
    regs = list(regressors)
    out = []
    if "gradient_boosting" in regs and "neural_network" in regs:
        out.append(("gradient_boosting", "neural_network"))
        regs = [r for r in regs if r not in out[0]]
    out.extend((r,) for r in regs)
    return out


def _impute_job(ds, sp, spec) -> tuple[ImputedDataset, float]:
    t0 = time.perf_counter()
    out = impute(ds, spec, sp)
    secs = time.perf_counter() - t0
    log.info("imputed %s seed %d in %.1fs", spec.kind, spec.seed, secs)
    return out, secs


def _error_text(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def _cells_job(imputed, sp, regressors, seed, space, stop_nif, inject) -> list:
    cache: dict = {}
    out = []
    for reg in regressors:
        t0 = time.perf_counter()
        try:
            if (imputed.imputer.kind, reg) in inject:
                raise InjectedFailure(f"injected failure in cell ({imputed.imputer.kind}, {reg})")
            trace = run_selection(imputed, SelectorPairing.for_regressor(reg), sp, space, stop_nif,
                                  seed=seed, cache=cache)
            secs = time.perf_counter() - t0
            log.info("cell %s/%s seed %d: %d iterations in %.1fs", imputed.imputer.kind, reg, seed, len(trace), secs)
            out.append((reg, trace, None, secs))
        except Exception as exc:
            out.append((reg, None, _error_text(exc), time.perf_counter() - t0))
    return out


def run_benchmark(cfg: BenchConfig) -> BenchmarkReport:
    """Run every (imputer, regressor, seed) cell; failures become error records."""
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t_start = time.perf_counter()
    report = BenchmarkReport(cfg)
    inject = {tuple(c) for c in cfg.inject_failures}
    groups = groups_for(cfg.regressors)
    timings: dict[str, float] = {}
    width = cfg.width
    executor = _Inline() if width == 1 else ProcessPoolExecutor(max_workers=width)
    with executor as ex:
        pending: dict = {}
        data = {}
        for seed in cfg.seeds:
            ds, sp, truth = prepare(cfg, seed)
            data[seed] = (ds, sp)
            if truth is not None:
                report.generator_truth[seed] = truth
        for seed in cfg.seeds:
            ds, sp = data[seed]
            for spec in cfg.imputers:
                fut = ex.submit(_impute_job, ds, sp, replace(spec, seed=seed))
                pending[fut] = ("impute", spec.kind, seed)
        while pending:
            done, _ = wait(list(pending), return_when=FIRST_COMPLETED)
            for fut in sorted(done, key=lambda f: _order(pending[f], cfg)):
                tag = pending.pop(fut)
                kind, seed = tag[1], tag[2]
                if tag[0] == "impute":
                    try:
                        imputed, timings[f"impute:{kind}:seed{seed}"] = fut.result()
                    except Exception as exc:
                        log.warning("imputation %s seed %d failed: %s", kind, seed, exc)
                        for reg in cfg.regressors:
                            report.errors[(kind, reg, seed)] = "imputation failed: " + _error_text(exc)
                        continue
                    sp = data[seed][1]
                    for group in groups:
                        f2 = ex.submit(_cells_job, imputed, sp, group, seed, cfg.search_space,
                                       cfg.stop_nif, inject)
                        pending[f2] = ("cells", kind, seed, group)
                else:
                    try:
                        results = fut.result()
                    except Exception as exc:  # worker crash: every cell of the job fails
                        results = [(reg, None, _error_text(exc), 0.0) for reg in tag[3]]
                    for reg, trace, err, secs in results:
                        key = (kind, reg, seed)
                        timings[f"cell:{kind}:{reg}:seed{seed}"] = secs
                        if err is None:
                            report.runs[key] = trace
                        else:
                            report.errors[key] = err
                            log.warning("cell %s/%s seed %d failed: %s", kind, reg, seed, err)
    report.provenance = {
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "elapsed_seconds": round(time.perf_counter() - t_start, 3),
        "parallelism": width,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "timings_seconds": {k: round(v, 3) for k, v in sorted(timings.items())},
    }
    return report


def _order(tag, cfg):
    # process simultaneously finished jobs in a fixed order (log readability only)
    return (tag[0], tag[2], [s.kind for s in cfg.imputers].index(tag[1]))
