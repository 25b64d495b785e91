"""Synthetic FDC datasets with planted ground truth.

Each tool runs its own wafer sequence. Every continuous sensor follows a
stationary unit-variance AR(1) trace along that sequence, so the value a
sensor showed on the previous wafer is informative about the current one.
The metrology target is a function of a few planted sensors plus a per-tool
offset and Gaussian noise. Missingness is drawn afterwards and never touches
the target.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .dataset import CATEGORICAL, CONTINUOUS, FdcDataset, FeatureMeta, make_dataset

NONLINEARITIES = ("linear", "interactions", "interactions_plus_thresholds")
MECHANISMS = ("MCAR", "tool_block")


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    """Generator settings. All randomness is derived from ``seed``.

    ``missingness_profile`` is a list of (feature_fraction, availability)
    pairs; fractions must sum to 1. ``n_features`` counts the ``tool_cat``
    categorical column when ``tool_feature`` is on.
    """

    n_samples: int = 2000
    n_features: int = 200
    n_informative: int = 10
    n_tools: int = 4
    nonlinearity: str = "interactions"
    missingness_profile: tuple[tuple[float, float], ...] = ((1.0, 1.0),)
    missingness_mechanism: str = "MCAR"
    drift_strength: float = 1.0
    noise_std: float = 0.2
    seed: int = 0
    # share of signal variance carried by the linear terms in the nonlinear modes
    linear_share: float = 0.2
    tool_offset_std: float = 0.3
    tool_feature: bool = True
    mean_block_length: int = 20

    def __post_init__(self):
        object.__setattr__(self, "missingness_profile",
                           tuple((float(a), float(b)) for a, b in self.missingness_profile))

    def validate(self) -> "GeneratorConfig":
        n_cont = self.n_features - int(self.tool_feature)
        if self.n_samples < 1 or self.n_features < 1 or self.n_tools < 1:
            raise InvalidConfig("n_samples, n_features and n_tools must be positive")
        if not 0 <= self.n_informative <= n_cont:
            raise InvalidConfig("n_informative must lie in [0, number of continuous features]")
        if self.nonlinearity not in NONLINEARITIES:
            raise InvalidConfig(f"nonlinearity must be one of {NONLINEARITIES}")
        if self.missingness_mechanism not in MECHANISMS:
            raise InvalidConfig(f"missingness_mechanism must be one of {MECHANISMS}")
        if not self.missingness_profile:
            raise InvalidConfig("missingness_profile is empty")
        if abs(sum(f for f, _ in self.missingness_profile) - 1.0) > 1e-9:
            raise InvalidConfig("missingness_profile feature fractions must sum to 1")
        if any(not 0.0 <= a <= 1.0 or f < 0 for f, a in self.missingness_profile):
            raise InvalidConfig("availability ratios must lie in [0, 1]")
        if self.drift_strength < 0 or self.noise_std < 0 or self.tool_offset_std < 0:
            raise InvalidConfig("drift_strength, noise_std and tool_offset_std must be >= 0")
        if not 0.0 <= self.linear_share <= 1.0:
            raise InvalidConfig("linear_share must lie in [0, 1]")
        if self.mean_block_length < 1:
            raise InvalidConfig("mean_block_length must be >= 1")
        return self

    @property
    def ar_coefficient(self) -> float:
        """Lag-1 coefficient of the sensor traces: 0 without drift, -> 1 as drift grows."""
        return 1.0 - 1.0 / (1.0 + self.drift_strength) ** 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["missingness_profile"] = [list(p) for p in self.missingness_profile]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        for key in d:
            if key not in known:
                raise InvalidConfig(f"unknown generator key {key!r}")
        kw = dict(d)
        if "missingness_profile" in kw:
            try:
                kw["missingness_profile"] = tuple((float(a), float(b)) for a, b in kw["missingness_profile"])
            except (TypeError, ValueError):
                raise InvalidConfig("missingness_profile must be a list of [fraction, availability] pairs")
        for f in fields(cls):
            if f.name in kw and f.type in ("int", "float") and not isinstance(kw[f.name], (int, float)):
                raise InvalidConfig(f"generator key {f.name!r} must be numeric")
        return cls(**kw).validate()


def paper_profile(**overrides) -> GeneratorConfig:
    """Desk-scale stand-in for the production data's availability profile.

    About 70% of features sit at 50% availability and about 8.5% at 97%; the
    rest spread between. 200 features by 2000 samples unless overridden.
    """
    base = GeneratorConfig(
        n_samples=2000,
        n_features=200,
        n_informative=10,
        n_tools=4,
        nonlinearity="interactions",
        missingness_profile=((0.70, 0.50), (0.07, 0.65), (0.07, 0.80), (0.075, 0.90), (0.085, 0.97)),
        missingness_mechanism="MCAR",
        drift_strength=3.0,
        noise_std=0.2,
    )
    d = base.to_dict()
    d.update(overrides)
    return GeneratorConfig.from_dict(d)


@dataclass
class GroundTruth:
    informative_ids: list[str]
    target_function: str
    achievable_r2: float
    # structured form of the target, enough to re-evaluate it
    terms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"informative_ids": list(self.informative_ids), "target_function": self.target_function,
                "achievable_r2": self.achievable_r2, "terms": self.terms}

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(list(d["informative_ids"]), d["target_function"], float(d["achievable_r2"]),
                   d.get("terms", {}))

    def signal(self, z: np.ndarray, tool_index: np.ndarray) -> np.ndarray:
        """Noise-free target for raw informative sensor values (columns in informative order)."""
        t = self.terms
        out = t["scale"] * _raw_signal(z, t)
        return out + np.asarray(t["tool_offsets"])[tool_index]


def _raw_signal(z, t) -> np.ndarray:
    out = z @ np.asarray(t["linear"])
    for a, b, c in t["products"]:
        out = out + c * z[:, a] * z[:, b]
    for a, thr, c in t["thresholds"]:
        out = out + c * (z[:, a] > thr)
    return out


def _raw_variance(t) -> float:
    """Exact variance of the raw signal for i.i.d. standard normal inputs."""
    lin = np.asarray(t["linear"], dtype=float)
    var = float(lin @ lin)
    for _, _, c in t["products"]:
        var += c * c  # pairs are disjoint, so products are uncorrelated with everything else
    thr = t["thresholds"]
    for i, (a, ta, ca) in enumerate(thr):
        pa = norm.sf(ta)
        var += ca * ca * pa * (1 - pa)
        var += 2 * ca * lin[a] * norm.pdf(ta)  # cov(z, 1[z > t]) = pdf(t)
        for b, tb, cb in thr[i + 1:]:
            if a == b:
                var += 2 * ca * cb * (norm.sf(max(ta, tb)) - pa * norm.sf(tb))
    return var


def _target_terms(cfg: GeneratorConfig, rng: np.random.Generator) -> dict:
    k = cfg.n_informative
    sign = rng.choice([-1.0, 1.0], size=k)
    lin = sign * rng.uniform(0.5, 1.5, size=k)
    products, thresholds = [], []
    if cfg.nonlinearity != "linear" and k >= 2:
        perm = rng.permutation(k)
        for a, b in zip(perm[0::2], perm[1::2]):
            products.append([int(a), int(b), float(rng.choice([-1.0, 1.0]) * rng.uniform(0.8, 1.2))])
        if cfg.nonlinearity == "interactions_plus_thresholds":
            for a in rng.choice(k, size=max(1, k // 2), replace=False):
                thresholds.append([int(a), float(rng.uniform(-0.5, 0.5)),
                                   float(rng.choice([-1.0, 1.0]) * rng.uniform(1.5, 2.5))])
        # rescale the linear block so that it carries linear_share of the variance
        nonlin = dict(linear=np.zeros(k), products=products, thresholds=thresholds)
        v_nl = _raw_variance(nonlin)
        v_lin = float(lin @ lin)
        if cfg.linear_share <= 0:
            lin = np.zeros(k)
        elif cfg.linear_share < 1:
            lin = lin * math.sqrt(cfg.linear_share / (1 - cfg.linear_share) * v_nl / v_lin)
    terms = {"linear": [float(v) for v in lin], "products": products, "thresholds": thresholds}
    v = _raw_variance(terms)
    terms["scale"] = 1.0 / math.sqrt(v) if v > 0 else 0.0
    return terms


def _describe(terms: dict, ids: list[str]) -> str:
    parts = [f"{c:+.4f}*{ids[i]}" for i, c in enumerate(terms["linear"]) if c != 0]
    parts += [f"{c:+.4f}*{ids[a]}*{ids[b]}" for a, b, c in terms["products"]]
    parts += [f"{c:+.4f}*[{ids[a]}>{t:.4f}]" for a, t, c in terms["thresholds"]]
    body = " ".join(parts) if parts else "0"
    return f"{terms['scale']:.6f}*({body}) + tool_offset[tool] + N(0, noise_std^2)"


def _mask(cfg: GeneratorConfig, tool_rows: list[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    n, m = cfg.n_samples, cfg.n_features
    fr = np.array([f for f, _ in cfg.missingness_profile])
    counts = np.floor(fr * m).astype(int)
    # largest remainder so group sizes sum to m
    rem = fr * m - counts
    for g in np.argsort(-rem, kind="stable")[: m - counts.sum()]:
        counts[g] += 1
    avail = np.repeat([a for _, a in cfg.missingness_profile], counts)
    avail = avail[rng.permutation(m)]
    mask = np.ones((n, m), dtype=bool)
    for j in range(m):
        if cfg.missingness_mechanism == "MCAR":
            n_miss = n - int(round(avail[j] * n))
            mask[rng.choice(n, size=n_miss, replace=False), j] = False
            continue
        for rows in tool_rows:
            L = len(rows)
            n_miss = L - int(round(avail[j] * L))
            if n_miss <= 0:
                continue
            n_blocks = max(1, min(n_miss, L - n_miss + 1, round(n_miss / cfg.mean_block_length)))
            blocks = _composition(n_miss, n_blocks, rng, min_part=1)
            gaps = _composition(L - n_miss, n_blocks + 1, rng, min_part=0)
            # interior gaps must be >= 1 or adjacent blocks merge; that only shifts lengths
            pos = 0
            for g, b in zip(gaps[:-1], blocks):
                pos += g
                mask[rows[pos:pos + b], j] = False
                pos += b
    return mask


def _composition(total: int, parts: int, rng: np.random.Generator, min_part: int) -> np.ndarray:
    """Random split of ``total`` into ``parts`` integers each >= ``min_part``."""
    free = total - parts * min_part
    cuts = np.sort(rng.integers(0, free + 1, size=parts - 1))
    return np.diff(np.concatenate([[0], cuts, [free]])) + min_part


def generate(cfg: GeneratorConfig) -> tuple[FdcDataset, GroundTruth]:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n, m = cfg.n_samples, cfg.n_features
    n_cont = m - int(cfg.tool_feature)
    width = max(2, len(str(n_cont - 1)))
    ids = [f"s{j:0{width}d}" for j in range(n_cont)]

    tools = [f"T{t}" for t in range(cfg.n_tools)]
    tool_index = rng.integers(0, cfg.n_tools, size=n)
    timestamp = np.arange(n, dtype=np.float64)
    tool_rows = [np.flatnonzero(tool_index == t) for t in range(cfg.n_tools)]

    phi = cfg.ar_coefficient
    z = np.empty((n, n_cont))
    innov = math.sqrt(1.0 - phi * phi)
    for rows in tool_rows:
        if len(rows) == 0:
            continue
        e = rng.standard_normal((len(rows), n_cont))
        trace = np.empty_like(e)
        trace[0] = e[0]
        for s in range(1, len(rows)):
            trace[s] = phi * trace[s - 1] + innov * e[s]
        z[rows] = trace

    informative = np.sort(rng.choice(n_cont, size=cfg.n_informative, replace=False))
    terms = _target_terms(cfg, rng)
    offsets = rng.standard_normal(cfg.n_tools) * cfg.tool_offset_std
    terms["tool_offsets"] = [float(o) for o in offsets]
    terms["informative_columns"] = [int(c) for c in informative]
    truth_ids = [ids[c] for c in informative]
    gt = GroundTruth(truth_ids, _describe(terms, truth_ids), 0.0, terms)

    signal = gt.signal(z[:, informative], tool_index)
    target = signal + cfg.noise_std * rng.standard_normal(n)

    # tools are drawn uniformly, so offset variance is the population variance over tools
    var_signal = (terms["scale"] ** 2) * _raw_variance(terms) + float(np.var(offsets))
    total = var_signal + cfg.noise_std ** 2
    gt.achievable_r2 = float(var_signal / total) if total > 0 else 1.0

    values = z
    meta = [FeatureMeta(i, CONTINUOUS, i) for i in ids]
    if cfg.tool_feature:
        values = np.column_stack([z, tool_index.astype(float)])
        meta.append(FeatureMeta("tool_cat", CATEGORICAL, "tool_cat", tuple(tools)))
    mask = _mask(cfg, tool_rows, rng)
    ds = make_dataset(values, meta, np.array(tools, dtype=object)[tool_index], timestamp, target, mask=mask)
    return ds, gt


def load_config(path: str | Path) -> GeneratorConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config is not valid JSON: {exc}")
    if d.get("profile") == "paper":
        d = {k: v for k, v in d.items() if k != "profile"}
        return paper_profile(**d)
    return GeneratorConfig.from_dict(d)


def save_config(cfg: GeneratorConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")
