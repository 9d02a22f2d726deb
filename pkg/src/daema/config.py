"""INI-style configuration: the dataset registry and experiment files.

Registry file (one section per dataset id; paths relative to the data
directory)::

    [breast]
    path = breast.csv
    label = class
    task = classification
    clean = drop_na

Experiment file::

    [experiment]
    dataset = breast        # required
    missingness = mcar      # mcar | mnar
    rate = 0.2
    models = daema, dae, mean
    seeds = 10
    first_seed = 0
    downstream = false
    scale = std             # std | variance
    nrms_mode = pooled      # pooled | per-feature
    dae_input = data+mask   # data+mask | data-only
    name = breast-mcar

    [train]
    steps = 40000
    lr = 0.001
    batch_size = 64
    artificial_rate = 0.2
    checkpoints = 39200, 39400, 39600, 39800, 40000
    sampling = replacement  # replacement | epoch
    log_every = 1000

    [forest]
    n_estimators = 100
    max_leaf_nodes = 1000
    max_features = auto     # auto | sqrt | third | all | <int>
    repeats = 10
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .evalharness import ExperimentConfig
from .forest import ForestConfig
from .pipeline import Dataset, clean, load_csv, parse_rules
from .training import TrainConfig

OUTPUT_DIR_ENV = "DAEMA_OUTPUT_DIR"

DEFAULT_REGISTRY = """\
[breast]
path = breast.csv
label = class
task = classification
clean = drop_na

[glass]
path = glass.csv
label = type
task = classification

[boston]
path = boston.csv
label = MEDV
task = regression

[ionosphere]
path = ionosphere.csv
label = class
task = classification

[shuttle]
path = shuttle.csv
label = class
task = classification

[eeg]
path = eeg.csv
label = eyeDetection
task = classification
clean = outliers(5, z=50)

[casp]
path = casp.csv
label = RMSD
task = regression
"""


@dataclass(frozen=True)
class RegistryEntry:
    id: str
    path: Path
    label: str | None
    task: str
    rules: tuple

    def load(self) -> Dataset:
        """Read and clean the dataset."""
        if not self.path.exists():
            raise ConfigError(f"dataset {self.id!r}: file {self.path} does not exist")
        return clean(load_csv(self.path, self.label, self.task), self.rules)


def _parser() -> configparser.ConfigParser:
    # ';' separates cleaning rules, so inline comments use '#' only
    return configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(" #",),
                                     comment_prefixes=("#", ";"))


def _read(text: str, source: str) -> configparser.ConfigParser:
    parser = _parser()
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return parser


def load_registry(path=None, data_dir=None) -> dict[str, RegistryEntry]:
    """Registry entries keyed by id.

    Without `path` the built-in registry of seven datasets is used. Relative
    CSV paths resolve against `data_dir` (default: the registry file's
    directory, or ``./data`` for the built-in registry).
    """
    if path is None:
        text, source = DEFAULT_REGISTRY, "<built-in registry>"
        base = Path(data_dir) if data_dir is not None else Path("data")
    else:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"registry file {path} does not exist")
        text, source = path.read_text(encoding="utf-8"), str(path)
        base = Path(data_dir) if data_dir is not None else path.parent
    parser = _read(text, source)
    entries = {}
    for name in parser.sections():
        sec = parser[name]
        unknown = set(sec) - {"path", "label", "task", "clean"}
        if unknown or "path" not in sec:
            raise ConfigError(f"{source} [{name}]: unknown keys {sorted(unknown)} or missing 'path'")
        entries[name] = RegistryEntry(
            id=name,
            path=base / sec["path"],
            label=sec.get("label") or None,
            task=sec.get("task", "none"),
            rules=tuple(parse_rules(sec.get("clean", ""))),
        )
    return entries


def lookup(registry: dict, dataset_id: str) -> RegistryEntry:
    if dataset_id not in registry:
        raise ConfigError(f"unknown dataset {dataset_id!r}; registered: {', '.join(sorted(registry))}")
    return registry[dataset_id]


_EXPERIMENT_KEYS = {
    "experiment": {"dataset": str, "missingness": str, "rate": float, "models": "list", "seeds": int,
                   "first_seed": int, "downstream": bool, "scale": str, "nrms_mode": str,
                   "dae_input": str, "split_ratio": float, "name": str},
    "train": {"steps": int, "lr": float, "batch_size": int, "artificial_rate": float,
              "checkpoints": "intlist", "sampling": str, "log_every": int},
    "forest": {"n_estimators": int, "max_leaf_nodes": int, "max_features": "features", "repeats": int},
}


def _convert(section, key, raw, kind, errors):
    try:
        if kind == "list":
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if kind == "intlist":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind == "features":
            return int(raw) if raw.strip().isdigit() else raw.strip()
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        return kind(raw.strip())
    except ValueError:
        errors.append(f"[{section}] {key} = {raw!r} is not a valid {getattr(kind, '__name__', kind)}")
        return None


def parse_experiment(text: str, source: str = "<config>") -> ExperimentConfig:
    """Validate an experiment file; every schema violation is listed in one error."""
    parser = _read(text, source)
    errors = []
    values = {s: {} for s in _EXPERIMENT_KEYS}
    for section in parser.sections():
        if section not in _EXPERIMENT_KEYS:
            errors.append(f"unknown section [{section}]")
            continue
        for key, raw in parser[section].items():
            kind = _EXPERIMENT_KEYS[section].get(key)
            if kind is None:
                errors.append(f"[{section}] unknown key {key!r}")
                continue
            values[section][key] = _convert(section, key, raw, kind, errors)
    if "dataset" not in values["experiment"]:
        errors.append("[experiment] dataset is required")
    if errors:
        raise ConfigError(f"{source}: " + "; ".join(errors))

    exp, tr, fo = values["experiment"], values["train"], values["forest"]
    try:
        train = TrainConfig(**tr)
        repeats = fo.pop("repeats", 10)
        forest = ForestConfig(**fo)
        return ExperimentConfig(train=train, forest=forest, forest_repeats=repeats, **exp)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_experiment(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"experiment config {path} does not exist")
    return parse_experiment(path.read_text(encoding="utf-8"), str(path))


def output_dir(default="results") -> Path:
    """Output directory, overridable through ``DAEMA_OUTPUT_DIR``."""
    return Path(os.environ.get(OUTPUT_DIR_ENV, default))
