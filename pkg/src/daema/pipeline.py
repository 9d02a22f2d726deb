"""Dataset ingestion, cleaning, train/test splitting and z-normalization.

Missing cells are carried as NaN inside :attr:`Dataset.features`; the
ground truth (when known) lives in :attr:`Dataset.truth`.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DatasetTooSmallError, DegenerateError, ParseError
from .missingness import MaskedDataset

log = logging.getLogger(__name__)

NA_TOKEN = "na"
TASKS = ("classification", "regression", "none")
SCALE_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    feature_names: list[str]
    label: np.ndarray | None = None
    task: str = "none"
    label_name: str | None = None
    classes: list[str] | None = None
    truth: np.ndarray | None = None
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        n = self.features.shape[0]
        if self.label is not None and len(self.label) != n:
            raise ConfigError(f"label has {len(self.label)} entries for {n} rows")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.row_ids is None:
            object.__setattr__(self, "row_ids", np.arange(n))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def mask(self) -> np.ndarray:
        return np.isnan(self.features)

    def na_rows(self) -> np.ndarray:
        """Rows holding an NA feature or an NA label."""
        rows = self.mask.any(axis=1)
        if self.label is not None:
            rows |= _label_missing(self.label, self.task)
        return rows

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        return replace(
            self,
            features=self.features[index],
            label=None if self.label is None else self.label[index],
            truth=None if self.truth is None else self.truth[index],
            row_ids=self.row_ids[index],
        )

    def with_missing(self, mask: np.ndarray) -> "Dataset":
        """Hide the cells of `mask`, keeping the current features as ground truth."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.features.shape:
            raise ConfigError(f"mask shape {mask.shape} does not match data {self.features.shape}")
        truth = self.features if self.truth is None else self.truth
        return replace(self, features=np.where(mask, np.nan, self.features), truth=truth)

    def masked(self) -> MaskedDataset:
        """Placeholder-zero view for the models."""
        mask = self.mask
        return MaskedDataset(observed=np.where(mask, 0.0, self.features), mask=mask, truth=self.truth)


def _label_missing(label, task):
    if task == "classification":
        return label < 0
    return np.isnan(label)


def _parse_number(token: str, row: int, column: str, path) -> float:
    if token.strip().lower() == NA_TOKEN:
        return math.nan
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{path}: row {row}, column {column!r}: cannot parse {token!r}", row, column) from None
    if not math.isfinite(value):
        raise ParseError(f"{path}: row {row}, column {column!r}: non-finite value {token!r}", row, column)
    return value


def _sort_key(token):
    try:
        return (0, float(token), token)
    except ValueError:
        return (1, 0.0, token)


def load_csv(path, label_column: str | None = None, task: str | None = None) -> Dataset:
    """Read a comma-separated file with a header row.

    Cells equal to ``NA`` (any case) become NaN. The label column, when named,
    is split off: classification labels are mapped to indices over the sorted
    distinct tokens, regression labels parsed as floats.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]

    if label_column is not None and label_column not in header:
        raise ConfigError(f"{path}: label column {label_column!r} not in header {header}")
    if task is None:
        task = "none" if label_column is None else None
    if label_column is None and task not in ("none", None):
        raise ConfigError(f"task {task!r} requires a label column")

    label_idx = header.index(label_column) if label_column is not None else None
    feat_cols = [j for j in range(len(header)) if j != label_idx]
    if len(feat_cols) < 2:
        raise ConfigError(f"{path}: {len(feat_cols)} feature column(s); at least 2 are required")

    X = np.empty((len(body), len(feat_cols)))
    labels = []
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i} has {len(row)} cells, header has {len(header)}", i, None)
        for k, j in enumerate(feat_cols):
            X[i - 1, k] = _parse_number(row[j], i, header[j], path)
        if label_idx is not None:
            labels.append(row[label_idx].strip())

    names = [header[j] for j in feat_cols]
    if label_idx is None:
        return Dataset(features=X, feature_names=names)

    present = [t for t in labels if t.lower() != NA_TOKEN]
    if task is None:
        try:
            [float(t) for t in present]
            task = "regression"
        except ValueError:
            task = "classification"
    if task == "classification":
        classes = sorted(set(present), key=_sort_key)
        lookup = {c: k for k, c in enumerate(classes)}
        y = np.array([lookup.get(t, -1) for t in labels], dtype=np.int64)
        return Dataset(X, names, y, task, label_column, classes)
    if task == "regression":
        y = np.array([_parse_number(t, i + 1, label_column, path) for i, t in enumerate(labels)])
        return Dataset(X, names, y, task, label_column)
    raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")


@dataclass(frozen=True)
class DropNA:
    def __str__(self):
        return "drop_na"


@dataclass(frozen=True)
class DropOutliers:
    """Drop rows by an outlier criterion on one feature.

    With `z`, rows are clipped iteratively: any row with ``|z| > z`` on the
    feature (population std over the remaining rows) is removed, and the
    statistics recomputed, until none remains. With `rows`, the listed
    original row ids (0-based data rows) are removed.
    """

    feature: int
    z: float | None = None
    rows: tuple[int, ...] = ()

    def __str__(self):
        arg = f"z={self.z!r}" if self.z is not None else "rows=" + "|".join(map(str, self.rows))
        return f"outliers({self.feature}, {arg})"


_OUTLIER_RE = re.compile(r"^outliers\(\s*(\d+)\s*,\s*(z|rows)\s*=\s*([^)]*)\)$")


def parse_rules(text: str) -> list:
    """Parse ``drop_na; outliers(5, z=10); outliers(2, rows=3|17)``."""
    rules = []
    for part in (p.strip() for p in (text or "").split(";")):
        if not part:
            continue
        if part == "drop_na":
            rules.append(DropNA())
            continue
        m = _OUTLIER_RE.match(part)
        if not m:
            raise ConfigError(f"unknown cleaning rule {part!r}")
        feature, kind, arg = int(m.group(1)), m.group(2), m.group(3).strip()
        try:
            if kind == "z":
                rules.append(DropOutliers(feature, z=float(arg)))
            else:
                rules.append(DropOutliers(feature, rows=tuple(int(r) for r in arg.split("|") if r.strip())))
        except ValueError:
            raise ConfigError(f"bad argument in cleaning rule {part!r}") from None
    return rules


def _outlier_rows(values: np.ndarray, z: float) -> np.ndarray:
    keep = ~np.isnan(values)
    while keep.sum() > 1:
        v = values[keep]
        std = v.std()
        if std == 0:
            break
        bad = keep & (np.abs(values - v.mean()) > z * std)
        if not bad.any():
            break
        keep &= ~bad
    return ~keep & ~np.isnan(values)


def clean(dataset: Dataset, rules=()) -> Dataset:
    """Remove the rows flagged by `rules`, in order."""
    for rule in rules:
        if isinstance(rule, DropOutliers) and not 0 <= rule.feature < dataset.d:
            raise ConfigError(f"rule {rule} references feature {rule.feature}; dataset has {dataset.d}")
    for rule in rules:
        if isinstance(rule, DropNA):
            drop = dataset.na_rows()
        elif isinstance(rule, DropOutliers):
            if rule.z is not None:
                drop = _outlier_rows(dataset.features[:, rule.feature], rule.z)
            else:
                drop = np.isin(dataset.row_ids, np.asarray(rule.rows, dtype=np.int64))
        else:
            raise ConfigError(f"unknown cleaning rule {rule!r}")
        if drop.any():
            log.info("cleaning rule %s removed %d rows", rule, int(drop.sum()))
            dataset = dataset.take(np.flatnonzero(~drop))
    return dataset


@dataclass(frozen=True, eq=False)
class NormStats:
    mean: np.ndarray
    scale: np.ndarray
    mode: str = "std"

    def transform(self, X):
        return (X - self.mean) / self.scale

    def inverse(self, X):
        return X * self.scale + self.mean


def fit_norm_stats(X: np.ndarray, scale: str = "std") -> NormStats:
    """Per-feature mean and scale over the non-NaN cells of `X`.

    `scale` is ``"std"`` (population standard deviation) or ``"variance"``;
    either is floored at 1e-9.
    """
    if scale not in ("std", "variance"):
        raise ConfigError(f"scale must be 'std' or 'variance', got {scale!r}")
    observed = ~np.isnan(X)
    empty = np.flatnonzero(~observed.any(axis=0))
    if empty.size:
        raise DegenerateError(f"feature(s) {empty.tolist()} have no observed value in the training set")
    mean = np.nanmean(X, axis=0)
    var = np.nanmean((X - mean) ** 2, axis=0)
    s = np.sqrt(var) if scale == "std" else var
    return NormStats(mean, np.maximum(s, SCALE_FLOOR), scale)


@dataclass(frozen=True, eq=False)
class SplitPair:
    train: Dataset
    test: Dataset
    stats: NormStats | None = None
    train_index: np.ndarray = field(default=None, repr=False)
    test_index: np.ndarray = field(default=None, repr=False)


def split(dataset: Dataset, ratio: float = 0.7, rng: np.random.Generator = None) -> SplitPair:
    """Random permutation; the first ``floor(ratio * n)`` rows form the train set."""
    if dataset.n < 10:
        raise DatasetTooSmallError(f"need at least 10 rows to split, got {dataset.n}")
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must lie in (0, 1), got {ratio}")
    rng = np.random.default_rng() if rng is None else rng
    perm = rng.permutation(dataset.n)
    n_train = math.floor(ratio * dataset.n + 1e-9)
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    return SplitPair(dataset.take(train_idx), dataset.take(test_idx), None, train_idx, test_idx)


def _normalize(ds: Dataset, stats: NormStats) -> Dataset:
    truth = None if ds.truth is None else stats.transform(ds.truth)
    return replace(ds, features=stats.transform(ds.features), truth=truth)


def znormalize(pair: SplitPair, scale: str = "std") -> SplitPair:
    """Normalize both splits with statistics of the train split's observed cells."""
    stats = fit_norm_stats(pair.train.features, scale)
    return replace(pair, train=_normalize(pair.train, stats), test=_normalize(pair.test, stats), stats=stats)
