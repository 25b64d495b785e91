"""Benchmark run configuration."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..datagen import GeneratorConfig, InvalidConfig, paper_profile
from ..impute import KINDS as IMPUTER_KINDS
from ..impute import ImputeError, ImputerSpec
from ..regress import KINDS as REGRESSOR_KINDS
from ..regress import RegressError
from ..select import DEFAULT_STOP_NIF
from ..tuning import SearchSpace

ENV_OUT_DIR = "VMBENCH_OUT_DIR"
ENV_PARALLELISM = "VMBENCH_PARALLELISM"

_KEYS = {"generator", "dataset", "imputers", "regressors", "seeds", "split_strategy", "stop_nif",
         "search_space", "parallelism", "out_dir", "inject_failures"}


class ConfigError(ValueError):
    pass


def default_parallelism() -> int:
    return os.cpu_count() or 1


@dataclass(frozen=True)
class BenchConfig:
    """Everything that determines a benchmark's outputs.

    Exactly one of ``generator`` (synthetic data, regenerated per seed with
    ``generator.seed + seed``) or ``dataset`` (a CSV path) is set. Each run
    seed also seeds the split, the imputer and the regressors.
    ``parallelism`` and ``out_dir`` only affect how and where it runs.
    ``inject_failures`` lists (imputer, regressor) cells forced to fail; it
    exists to exercise failure isolation.
    """

    generator: GeneratorConfig | None = None
    dataset: str | None = None
    imputers: tuple[ImputerSpec, ...] = tuple(ImputerSpec(k) for k in IMPUTER_KINDS)
    regressors: tuple[str, ...] = REGRESSOR_KINDS
    seeds: tuple[int, ...] = (0,)
    split_strategy: str = "random"
    stop_nif: int = DEFAULT_STOP_NIF
    search_space: SearchSpace = field(default_factory=SearchSpace.default)
    parallelism: int | None = None
    out_dir: str | None = None
    inject_failures: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if (self.generator is None) == (self.dataset is None):
            raise ConfigError("set exactly one of 'generator' or 'dataset'")
        if not self.imputers or not self.regressors or not self.seeds:
            raise ConfigError("imputers, regressors and seeds must be nonempty")
        kinds = [s.kind for s in self.imputers]
        if len(set(kinds)) != len(kinds):
            raise ConfigError("imputer kinds must be distinct")
        for r in self.regressors:
            if r not in REGRESSOR_KINDS:
                raise ConfigError(f"unknown regressor {r!r}")
        if len(set(self.regressors)) != len(self.regressors):
            raise ConfigError("regressors must be distinct")
        if self.split_strategy not in ("random", "chronological"):
            raise ConfigError(f"unknown split_strategy {self.split_strategy!r}")
        if self.stop_nif < 1:
            raise ConfigError("stop_nif must be >= 1")
        if self.parallelism is not None and self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        for cell in self.inject_failures:
            if len(cell) != 2 or cell[0] not in IMPUTER_KINDS or cell[1] not in REGRESSOR_KINDS:
                raise ConfigError(f"bad inject_failures entry {cell!r}")

    @property
    def width(self) -> int:
        return self.parallelism or default_parallelism()

    def generator_for(self, seed: int) -> GeneratorConfig:
        return replace(self.generator, seed=self.generator.seed + seed)

    def to_dict(self) -> dict:
        return {
            "generator": self.generator.to_dict() if self.generator else None,
            "dataset": self.dataset,
            "imputers": [s.to_dict() for s in self.imputers],
            "regressors": list(self.regressors),
            "seeds": list(self.seeds),
            "split_strategy": self.split_strategy,
            "stop_nif": self.stop_nif,
            "search_space": self.search_space.to_dict(),
            "parallelism": self.parallelism,
            "out_dir": self.out_dir,
            "inject_failures": [list(c) for c in self.inject_failures],
        }

    def hash(self) -> str:
        """Digest of the settings that determine outputs."""
        body = {k: v for k, v in self.to_dict().items() if k not in ("parallelism", "out_dir")}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path | None = None) -> "BenchConfig":
        unknown = set(d) - _KEYS
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        kw: dict = {}
        try:
            if d.get("generator") is not None:
                kw["generator"] = parse_generator(d["generator"])
            if d.get("dataset") is not None:
                p = Path(d["dataset"])
                if base_dir is not None and not p.is_absolute():
                    p = Path(base_dir) / p
                kw["dataset"] = str(p)
            if "imputers" in d:
                kw["imputers"] = tuple(ImputerSpec(x) if isinstance(x, str) else ImputerSpec.from_dict(x)
                                       for x in d["imputers"])
            if "regressors" in d:
                kw["regressors"] = tuple(d["regressors"])
            if "seeds" in d:
                kw["seeds"] = tuple(int(s) for s in d["seeds"])
            for key in ("split_strategy", "out_dir"):
                if key in d:
                    kw[key] = d[key]
            if "stop_nif" in d:
                kw["stop_nif"] = int(d["stop_nif"])
            if d.get("parallelism") is not None:
                kw["parallelism"] = int(d["parallelism"])
            if "search_space" in d:
                kw["search_space"] = SearchSpace.from_dict(d["search_space"])
            if "inject_failures" in d:
                kw["inject_failures"] = tuple(tuple(c) for c in d["inject_failures"])
            return cls(**kw)
        except (InvalidConfig, ImputeError, RegressError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    def with_env(self, environ=os.environ) -> "BenchConfig":
        """Apply the two supported environment overrides."""
        kw = {}
        if environ.get(ENV_OUT_DIR):
            kw["out_dir"] = environ[ENV_OUT_DIR]
        if environ.get(ENV_PARALLELISM):
            try:
                kw["parallelism"] = int(environ[ENV_PARALLELISM])
            except ValueError:
                raise ConfigError(f"{ENV_PARALLELISM} must be an integer")
        return replace(self, **kw) if kw else self


def parse_generator(value) -> GeneratorConfig:
    """A generator config object, optionally ``{"profile": "paper", ...overrides}``, or ``"paper"``."""
    if value == "paper":
        return paper_profile()
    if not isinstance(value, dict):
        raise ConfigError("'generator' must be an object or \"paper\"")
    value = dict(value)
    try:
        if value.pop("profile", None) == "paper":
            return paper_profile(**value)
        return GeneratorConfig.from_dict(value)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_bench_config(path: str | Path) -> BenchConfig:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}")
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return BenchConfig.from_dict(d, base_dir=path.parent)
