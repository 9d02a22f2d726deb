"""Missingness masks: MCAR and two-feature MNAR injection, training-time corruption.

Masks are boolean arrays where ``True`` marks a missing cell.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, ParseError


@dataclass(frozen=True, eq=False)
class MaskedDataset:
    """Observed values with placeholder zeros at masked cells.

    ``truth`` is kept only for evaluation and may be ``None`` when the
    ground truth is unknown.
    """

    observed: np.ndarray
    mask: np.ndarray
    truth: np.ndarray | None = None

    @property
    def shape(self):
        return self.observed.shape


def _check_rate(rate):
    if not 0.0 <= rate <= 1.0:
        raise ConfigError(f"missingness rate must lie in [0, 1], got {rate}")


def mcar_mask(n: int, d: int, rate: float = 0.2, rng: np.random.Generator = None) -> np.ndarray:
    """Each cell is missing independently with probability `rate`."""
    _check_rate(rate)
    rng = np.random.default_rng() if rng is None else rng
    return rng.random((n, d)) < rate


def lower_median(values: np.ndarray) -> float:
    """Element ``ceil(n/2) - 1`` of the sorted values (true median for odd n)."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    return values[math.ceil(len(values) / 2) - 1]


def mnar_selection(X: np.ndarray, features: tuple[int, int]) -> np.ndarray:
    """Rows where ``X[:, j1] <= median(j1)`` or ``X[:, j2] >= median(j2)``."""
    j1, j2 = features
    return (X[:, j1] <= lower_median(X[:, j1])) | (X[:, j2] >= lower_median(X[:, j2]))


def mnar_mask(X: np.ndarray, rate: float = 0.2, rng: np.random.Generator = None):
    """Two-feature median-threshold MNAR mechanism.

    Two distinct features ``(j1, j2)`` are drawn uniformly. Rows selected by
    :func:`mnar_selection` lose each cell with probability `rate`; the other
    rows stay fully observed.

    Returns
    -------
    mask : ndarray of bool, shape (n, d)
    features : tuple of int
        The chosen pair ``(j1, j2)``.
    """
    _check_rate(rate)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ConfigError(f"MNAR injection needs at least two features, got shape {X.shape}")
    rng = np.random.default_rng() if rng is None else rng
    j1, j2 = (int(j) for j in rng.choice(X.shape[1], size=2, replace=False))
    selected = mnar_selection(X, (j1, j2))
    mask = rng.random(X.shape) < rate
    mask &= selected[:, None]
    return mask, (j1, j2)


def artificial_mask(m: np.ndarray, p: float = 0.2, rng: np.random.Generator = None) -> np.ndarray:
    """Extra corruption for training: ``m OR Bernoulli(p)`` cell-wise."""
    _check_rate(p)
    rng = np.random.default_rng() if rng is None else rng
    m = np.asarray(m, dtype=bool)
    return m | (rng.random(m.shape) < p)


def apply_mask(X: np.ndarray, mask: np.ndarray) -> MaskedDataset:
    """Write placeholder zeros at masked cells; keep `X` as ground truth."""
    X = np.asarray(X, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if X.shape != mask.shape:
        raise DimensionError(f"data shape {X.shape} does not match mask shape {mask.shape}")
    observed = np.where(mask, 0.0, X)
    return MaskedDataset(observed=observed, mask=mask, truth=X)


def write_mask_csv(path, mask: np.ndarray, header=None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        writer.writerows(np.asarray(mask, dtype=np.uint8).tolist())


def read_mask_csv(path, header=True) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if header:
        rows = rows[1:]
    out = []
    for i, row in enumerate(rows):
        try:
            values = [int(cell) for cell in row]
        except ValueError as exc:
            raise ParseError(f"{path}: row {i + 1}: {exc}", row=i + 1) from None
        if any(v not in (0, 1) for v in values):
            raise ParseError(f"{path}: row {i + 1}: mask entries must be 0 or 1", row=i + 1)
        out.append(values)
    return np.asarray(out, dtype=bool)
