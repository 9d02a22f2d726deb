"""Training loop shared by DAEMA and the plain DAE."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import DaeModel
from .errors import ConfigError, TrainingDivergedError
from .missingness import MaskedDataset
from .model import DaemaModel, impute, masked_loss, masked_loss_grad
from .ndcore import AdamState, adam_step
from .seeding import stream

SAMPLING = ("replacement", "epoch")


def default_checkpoints(steps: int, count: int = 5) -> tuple[int, ...]:
    """Last `count` snapshots spaced ``steps // 200`` apart (39200..40000 for 40000)."""
    gap = max(1, steps // 200)
    return tuple(s for s in (steps - gap * k for k in reversed(range(count))) if s >= 1)


@dataclass
class TrainConfig:
    artificial_rate: float = 0.2
    lr: float = 0.001
    batch_size: int = 64
    steps: int = 40000
    checkpoints: tuple[int, ...] | None = None
    seed: int = 0
    sampling: str = "replacement"
    log_every: int = 1000

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigError(f"steps and batch_size must be positive ({self.steps}, {self.batch_size})")
        if not 0.0 <= self.artificial_rate <= 1.0:
            raise ConfigError(f"artificial_rate must lie in [0, 1], got {self.artificial_rate}")
        if self.sampling not in SAMPLING:
            raise ConfigError(f"sampling must be one of {SAMPLING}, got {self.sampling!r}")
        if self.checkpoints is not None:
            cps = tuple(int(c) for c in self.checkpoints)
            if not cps or list(cps) != sorted(set(cps)) or cps[0] < 1 or cps[-1] > self.steps:
                raise ConfigError(f"checkpoints {cps} must be ascending within [1, {self.steps}]")
            self.checkpoints = cps

    @property
    def checkpoint_steps(self) -> tuple[int, ...]:
        return self.checkpoints if self.checkpoints is not None else default_checkpoints(self.steps)


@dataclass
class Checkpoint:
    step: int
    model: object
    loss: float = math.nan


@dataclass
class TrainLog:
    losses: list = field(default_factory=list)


def _batches(n, cfg: TrainConfig, rng):
    if cfg.sampling == "replacement":
        while True:
            yield rng.integers(0, n, size=cfg.batch_size)
    while True:
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            yield perm[start:start + cfg.batch_size]


def train(model, data: MaskedDataset, cfg: TrainConfig, rng: np.random.Generator | None = None,
          on_checkpoint=None, on_log=None, keep: bool = True, history: list | None = None):
    """Train `model` in place on the rows of `data`.

    Each step draws a batch, adds fresh artificial missingness
    (``mbar = m OR Bernoulli(p)``), reconstructs from the corrupted rows and
    takes an Adam step on the masked loss computed against the original mask.

    Parameters
    ----------
    on_checkpoint : callable(Checkpoint), optional
        Called at every checkpoint step with a snapshot of the model.
    on_log : callable(step, mean_loss), optional
        Called every ``cfg.log_every`` steps with the mean loss since the last call.
    keep : bool
        Whether to return the snapshots (set False to save memory when
        `on_checkpoint` consumes them).
    history : list, optional
        Receives the loss of every step.

    Returns
    -------
    list of Checkpoint
    """
    rng = stream(cfg.seed, "batches") if rng is None else rng
    observed = np.where(data.mask, 0.0, data.observed)
    mask = np.asarray(data.mask, dtype=bool)
    n = observed.shape[0]
    if n == 0:
        raise ConfigError("cannot train on an empty dataset")
    params = model.params()
    state = AdamState.zeros_like(params)
    grads = [np.empty_like(p) for p in params]
    wanted = set(cfg.checkpoint_steps)
    snapshots = []
    window = []
    batches = _batches(n, cfg, rng)

    for step in range(1, cfg.steps + 1):
        idx = next(batches)
        x, m = observed[idx], mask[idx]
        mbar = m | (rng.random(m.shape) < cfg.artificial_rate)
        xbar = np.where(mbar, 0.0, x)
        xhat, tape = model.forward(xbar, mbar.astype(np.float64))
        loss = masked_loss(xhat, x, m)
        if not math.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        model.backward(tape, masked_loss_grad(xhat, x, m), out=grads)
        adam_step(params, grads, state, cfg.lr)

        window.append(loss)
        if history is not None:
            history.append(loss)
        if on_log is not None and step % cfg.log_every == 0:
            on_log(step, float(np.mean(window)))
        if step % cfg.log_every == 0:
            window = []
        if step in wanted:
            snap = Checkpoint(step, model.copy(), loss)
            if on_checkpoint is not None:
                on_checkpoint(snap)
            if keep:
                snapshots.append(snap)
    return snapshots


def new_model(arch: str, d: int, seed: int, dae_input: str = "data+mask"):
    """Freshly initialised model drawn from the seed's ``init`` stream."""
    rng = stream(seed, "init")
    if arch == "daema":
        return DaemaModel.init(d, rng)
    if arch == "dae":
        return DaeModel.init(d, rng, dae_input)
    raise ConfigError(f"unknown architecture {arch!r}")


def fit(arch: str, data: MaskedDataset, cfg: TrainConfig, dae_input: str = "data+mask", **kwargs):
    """Initialise a model from ``cfg.seed`` and train it; returns the checkpoints."""
    model = new_model(arch, data.shape[1], cfg.seed, dae_input)
    return train(model, data, cfg, **kwargs)


def train_daema(data: MaskedDataset, cfg: TrainConfig, **kwargs):
    return fit("daema", data, cfg, **kwargs)


def train_dae(data: MaskedDataset, cfg: TrainConfig, dae_input: str = "data+mask", **kwargs):
    return fit("dae", data, cfg, dae_input=dae_input, **kwargs)


dae_impute = impute
