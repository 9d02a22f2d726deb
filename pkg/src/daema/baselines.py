"""Reference imputers: per-feature mean and a plain three-layer denoising autoencoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .ndcore import Affine, Tape, affine_backward, affine_forward, as_matrix, require_tape, tanh_backward, tanh_forward

DAE_INPUTS = ("data+mask", "data-only")


@dataclass(frozen=True, eq=False)
class MeanImputer:
    means: np.ndarray

    @classmethod
    def fit(cls, X) -> "MeanImputer":
        """Means over the non-NaN cells of `X`."""
        return cls(np.nanmean(np.asarray(X, dtype=np.float64), axis=0))

    def reconstruct(self, xbar, mbar):
        return np.broadcast_to(self.means, as_matrix(xbar).shape).copy()


def mean_impute(x, m, means) -> np.ndarray:
    """Replace masked cells by the per-feature `means` (zeros in normalized space)."""
    x = np.asarray(x, dtype=np.float64)
    m = np.asarray(m, dtype=bool)
    means = np.asarray(means, dtype=np.float64)
    if x.shape != m.shape or x.shape[-1] != means.shape[0]:
        raise DimensionError(f"data {x.shape}, mask {m.shape}, means {means.shape}")
    return np.where(m, means, x)


@dataclass
class DaeModel:
    """Three affine layers (2d, 2d, d outputs), tanh after the first two.

    ``input_mode="data+mask"`` feeds ``[xbar, mbar]`` (width 2d);
    ``"data-only"`` feeds ``xbar`` alone (width d).
    """

    d: int
    layer1: Affine
    layer2: Affine
    layer3: Affine
    input_mode: str = "data+mask"

    arch = "dae"
    param_names = (
        "layer1.weight", "layer1.bias", "layer2.weight", "layer2.bias",
        "layer3.weight", "layer3.bias",
    )

    def __post_init__(self):
        if self.input_mode not in DAE_INPUTS:
            raise ConfigError(f"dae input must be one of {DAE_INPUTS}, got {self.input_mode!r}")
        n_in = 2 * self.d if self.input_mode == "data+mask" else self.d
        expected = [(2 * self.d, n_in), (2 * self.d, 2 * self.d), (self.d, 2 * self.d)]
        for layer, shape in zip(self.layers(), expected):
            if layer.weight.shape != shape:
                raise DimensionError(f"DAE layer weight {layer.weight.shape}, expected {shape}")

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, input_mode: str = "data+mask") -> "DaeModel":
        n_in = 2 * d if input_mode == "data+mask" else d
        return cls(d, Affine.init(n_in, 2 * d, rng), Affine.init(2 * d, 2 * d, rng),
                   Affine.init(2 * d, d, rng), input_mode)

    @classmethod
    def from_params(cls, dims: dict, params) -> "DaeModel":
        w1, b1, w2, b2, w3, b3 = params
        return cls(dims["d"], Affine(w1, b1), Affine(w2, b2), Affine(w3, b3),
                   dims.get("input_mode", "data+mask"))

    @property
    def dims(self) -> dict:
        return {"d": self.d, "input_mode": self.input_mode}

    def layers(self):
        return [self.layer1, self.layer2, self.layer3]

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers() for p in layer.params()]

    def copy(self) -> "DaeModel":
        return DaeModel(self.d, *(layer.copy() for layer in self.layers()), self.input_mode)

    def forward(self, xbar, mbar):
        xbar, mbar = as_matrix(xbar), as_matrix(mbar)
        if xbar.shape[1] != self.d or mbar.shape != xbar.shape:
            raise DimensionError(f"DAE expects rows of width {self.d}; got {xbar.shape} and {mbar.shape}")
        inp = np.concatenate([xbar, mbar], axis=1) if self.input_mode == "data+mask" else xbar
        h1 = tanh_forward(affine_forward(self.layer1, inp))
        h2 = tanh_forward(affine_forward(self.layer2, h1))
        xhat = affine_forward(self.layer3, h2)
        tape = Tape({"inp": inp, "h1": h1, "h2": h2}, completed=True)
        return xhat, tape

    def backward(self, tape: Tape, dxhat, out=None) -> list[np.ndarray]:
        tape = require_tape(tape)
        bufs = [None] * 3 if out is None else [out[i:i + 2] for i in range(0, 6, 2)]
        dw3, db3, dh2 = affine_backward(self.layer3, tape["h2"], as_matrix(dxhat), bufs[2])
        dw2, db2, dh1 = affine_backward(self.layer2, tape["h1"], tanh_backward(tape["h2"], dh2), bufs[1])
        dw1, db1, _ = affine_backward(self.layer1, tape["inp"], tanh_backward(tape["h1"], dh1), bufs[0],
                                      need_dx=False)
        return [dw1, db1, dw2, db2, dw3, db3]

    def reconstruct(self, xbar, mbar):
        xhat, _ = self.forward(xbar, mbar)
        return xhat


def dae_forward(model: DaeModel, xbar, mbar) -> np.ndarray:
    out = model.reconstruct(xbar, mbar)
    return out[0] if np.ndim(xbar) == 1 else out
