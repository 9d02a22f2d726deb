"""Imputation metrics and the multi-seed experiment protocol.

For every seed the corrupted dataset is rebuilt from scratch (mask on the
full ground truth, 70/30 split, z-normalization on observed train cells),
so every model evaluated under that seed sees the same masks. Each model is
scored at its checkpoints, scores are averaged over checkpoints, and the
per-seed values are aggregated into a mean and a sample variance.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import MeanImputer, mean_impute
from .errors import ConfigError, DaemaError, DegenerateError, ExperimentError, UndefinedMetricError
from .forest import ForestConfig, downstream_score
from .missingness import MaskedDataset, mcar_mask, mnar_mask
from .model import impute
from .pipeline import Dataset, split, znormalize
from .seeding import stream
from .training import TrainConfig, new_model, train

log = logging.getLogger(__name__)

MODELS = ("daema", "dae", "mean", "real")
MECHANISMS = ("mcar", "mnar")


def nrms(imputed, truth, mask, mode: str = "pooled") -> float:
    """RMSE over the masked cells divided by the spread of the ground truth.

    Parameters
    ----------
    imputed, truth : ndarray, shape (n, d)
        Same (normalized) space.
    mask : ndarray of bool
        Cells to score.
    mode : {"pooled", "per-feature"}
        ``pooled`` divides by the std of every truth value pooled across
        features; ``per-feature`` scales each cell's error by its column std
        before averaging.
    """
    imputed = np.asarray(imputed, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not (imputed.shape == truth.shape == mask.shape):
        raise ConfigError(f"shapes {imputed.shape}, {truth.shape}, {mask.shape} differ")
    if not mask.any():
        raise UndefinedMetricError("NRMS is undefined without missing cells")
    err = imputed - truth
    if mode == "pooled":
        std = truth.std()
        if std == 0:
            raise DegenerateError("ground truth has zero pooled standard deviation")
        return float(np.sqrt(np.mean(err[mask] ** 2)) / std)
    if mode == "per-feature":
        std = truth.std(axis=0)
        used = mask.any(axis=0)
        if np.any(std[used] == 0):
            raise DegenerateError("a scored feature has zero standard deviation")
        scaled = err / np.where(std == 0, 1.0, std)
        return float(np.sqrt(np.mean(scaled[mask] ** 2)))
    raise ConfigError(f"unknown NRMS mode {mode!r}")


def checkpoint_average(scores) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ConfigError("no checkpoint scores to average")
    return float(scores.mean())


@dataclass
class ExperimentConfig:
    """One dataset, one missingness setting, several models, several seeds."""

    dataset: str
    missingness: str = "mcar"
    rate: float = 0.2
    models: tuple[str, ...] = ("daema", "dae", "mean")
    seeds: int = 10
    first_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    forest_repeats: int = 10
    downstream: bool = False
    scale: str = "std"
    nrms_mode: str = "pooled"
    dae_input: str = "data+mask"
    split_ratio: float = 0.7
    name: str | None = None

    def __post_init__(self):
        problems = []
        if self.missingness not in MECHANISMS:
            problems.append(f"missingness must be one of {MECHANISMS}")
        if not 0.0 <= self.rate <= 1.0:
            problems.append("rate must lie in [0, 1]")
        if self.seeds < 1:
            problems.append("seeds must be at least 1")
        bad = [m for m in self.models if m not in MODELS]
        if bad or not self.models:
            problems.append(f"models must be a non-empty subset of {MODELS}, got {list(self.models)}")
        if self.forest_repeats < 1:
            problems.append("forest_repeats must be at least 1")
        if problems:
            raise ConfigError("invalid experiment config: " + "; ".join(problems))
        self.models = tuple(self.models)

    @property
    def seed_list(self) -> list[int]:
        return list(range(self.first_seed, self.first_seed + self.seeds))

    @property
    def label(self) -> str:
        return self.name or f"{self.dataset}-{self.missingness}-{self.rate!r}"


@dataclass(frozen=True, eq=False)
class PreparedData:
    train: MaskedDataset
    test: MaskedDataset
    train_label: np.ndarray | None
    test_label: np.ndarray | None
    task: str
    mnar_features: tuple[int, int] | None = None


def corrupt(dataset: Dataset, mechanism: str, rate: float, seed: int):
    """Hide cells of the full ground truth; returns ``(dataset, mask, mnar_pair)``."""
    rng = stream(seed, "mask")
    X = dataset.features
    if np.isnan(X).any():
        raise ConfigError("dataset still holds NA cells; clean it before injecting missingness")
    if mechanism == "mcar":
        mask, pair = mcar_mask(X.shape[0], X.shape[1], rate, rng), None
    elif mechanism == "mnar":
        mask, pair = mnar_mask(X, rate, rng)
    else:
        raise ConfigError(f"unknown missingness mechanism {mechanism!r}")
    return dataset.with_missing(mask), mask, pair


def prepare(dataset: Dataset, cfg: ExperimentConfig, seed: int) -> PreparedData:
    """Inject missingness, split and normalize exactly as every model will see it."""
    corrupted, _, pair = corrupt(dataset, cfg.missingness, cfg.rate, seed)
    sp = znormalize(split(corrupted, cfg.split_ratio, stream(seed, "split")), cfg.scale)
    return PreparedData(sp.train.masked(), sp.test.masked(), sp.train.label, sp.test.label,
                        dataset.task, pair)


def _downstream(cfg: ExperimentConfig, data: PreparedData, train_X, test_X, seed) -> float:
    return downstream_score(train_X, data.train_label, test_X, data.test_label, data.task,
                            cfg.forest, cfg.forest_repeats, seed)


def _evaluate(cfg, data: PreparedData, seed, imputer) -> dict:
    test_X = imputer(data.test.observed, data.test.mask)
    out = {"nrms": nrms(test_X, data.test.truth, data.test.mask, cfg.nrms_mode)}
    if cfg.downstream:
        train_X = imputer(data.train.observed, data.train.mask)
        out["downstream"] = _downstream(cfg, data, train_X, test_X, seed)
    return out


def run_model(cfg: ExperimentConfig, data: PreparedData, model_name: str, seed: int) -> list[dict]:
    """Rows ``{seed, model, step, metric, value}`` for one model under one seed."""
    rows = []

    def record(step, scores):
        for metric, value in scores.items():
            rows.append({"seed": seed, "model": model_name, "step": step, "metric": metric, "value": value})

    if model_name == "mean":
        means = MeanImputer.fit(np.where(data.train.mask, np.nan, data.train.observed)).means
        record(0, _evaluate(cfg, data, seed, lambda x, m: mean_impute(x, m, means)))
    elif model_name == "real":
        scores = {"nrms": 0.0}
        if cfg.downstream:
            scores["downstream"] = _downstream(cfg, data, data.train.truth, data.test.truth, seed)
        record(0, scores)
    else:
        tcfg = TrainConfig(**{**cfg.train.__dict__, "seed": seed})
        model = new_model(model_name, data.train.shape[1], seed, cfg.dae_input)

        def on_checkpoint(cp):
            record(cp.step, _evaluate(cfg, data, seed, lambda x, m: impute(cp.model, x, m)))

        def on_log(step, loss):
            log.info("seed %d %s step %d loss %.6f", seed, model_name, step, loss)

        train(model, data.train, tcfg, on_checkpoint=on_checkpoint, on_log=on_log, keep=False)
    return rows


def run_seed(dataset: Dataset, cfg: ExperimentConfig, seed: int) -> list[dict]:
    try:
        data = prepare(dataset, cfg, seed)
    except DaemaError as exc:
        raise ExperimentError(seed, "prepare", exc) from exc
    rows = []
    for model_name in cfg.models:
        try:
            rows.extend(run_model(cfg, data, model_name, seed))
        except DaemaError as exc:
            raise ExperimentError(seed, model_name, exc) from exc
    return rows


@dataclass
class ExperimentReport:
    """Long table of per-seed, per-checkpoint scores with derived aggregates."""

    config: ExperimentConfig
    rows: list[dict]

    def per_seed(self, model: str, metric: str = "nrms") -> list[float]:
        """Checkpoint-averaged score of each seed, in seed order."""
        by_seed: dict[int, list[float]] = {}
        for r in self.rows:
            if r["model"] == model and r["metric"] == metric:
                by_seed.setdefault(r["seed"], []).append(r["value"])
        return [checkpoint_average(by_seed[s]) for s in sorted(by_seed)]

    def metrics(self) -> list[str]:
        return sorted({r["metric"] for r in self.rows}, key=lambda m: (m != "nrms", m))

    def aggregate(self, model: str, metric: str = "nrms") -> dict:
        """``mean``, ``variance`` (n-1 denominator) and ``std``; spread is None for one seed."""
        values = np.asarray(self.per_seed(model, metric))
        if values.size == 0:
            return {"n": 0, "mean": None, "variance": None, "std": None}
        var = float(values.var(ddof=1)) if values.size > 1 else None
        return {"n": int(values.size), "mean": float(values.mean()), "variance": var,
                "std": None if var is None else math.sqrt(var)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["experiment", "seed", "model", "step", "metric", "value"])
        for r in self.rows:
            w.writerow([self.config.label, r["seed"], r["model"], r["step"], r["metric"], fmt(r["value"])])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["experiment", "model", "metric", "seeds", "mean", "variance", "std"])
        for model in self.config.models:
            for metric in self.metrics():
                a = self.aggregate(model, metric)
                if a["n"]:
                    w.writerow([self.config.label, model, metric, a["n"], fmt(a["mean"]),
                                fmt(a["variance"]), fmt(a["std"])])
        return buf.getvalue()

    def summary_table(self) -> str:
        """Models as rows, metrics as columns: ``mean ± variance (std)``."""
        metrics = self.metrics()
        lines = [f"{self.config.label} ({self.config.seeds} seed(s))",
                 f"{'model':<8}" + "".join(f"{m:>30}" for m in metrics)]
        for model in self.config.models:
            cells = []
            for metric in metrics:
                a = self.aggregate(model, metric)
                if a["mean"] is None:
                    cells.append(f"{'-':>30}")
                elif a["variance"] is None:
                    cells.append(f"{a['mean']:>30.3f}")
                else:
                    cells.append(f"{a['mean']:.3f} ± {a['variance']:.3f} ({a['std']:.3f})".rjust(30))
            lines.append(f"{model:<8}" + "".join(cells))
        if self.config.seeds > 1:
            lines.append("cells: mean over seeds ± sample variance (standard deviation)")
        return "\n".join(lines)


def fmt(value) -> str:
    """Shortest round-trip decimal form; empty for None."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def run_experiment(cfg: ExperimentConfig, dataset: Dataset, parallel_seeds: int = 1) -> ExperimentReport:
    """Run every model of `cfg` on every seed; rows come back in seed order."""
    seeds = cfg.seed_list
    if parallel_seeds > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=parallel_seeds) as pool:
            results = list(pool.map(run_seed, [dataset] * len(seeds), [cfg] * len(seeds), seeds))
    else:
        results = [run_seed(dataset, cfg, s) for s in seeds]
    return ExperimentReport(cfg, [row for rows in results for row in rows])
