"""DAEMA: denoising autoencoder whose latent code is built by mask attention.

For a batch of corrupted rows ``xbar`` with corruption mask ``mbar``:

* the feature encoder maps ``[xbar, mbar]`` through two tanh layers to a
  ``(d', d_z)`` map ``F`` of candidate values, one column per latent unit;
* the feature selector maps ``mbar`` alone through one affine layer to a map
  ``S`` of the same shape;
* latent unit ``j`` is ``softmax(S[:, j]) . F[:, j]``;
* a single affine layer decodes the latent vector back to ``d`` features.

All functions accept either one row (1-D) or a batch (2-D) and return the
matching rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .ndcore import (
    Affine,
    Tape,
    affine_backward,
    affine_forward,
    as_matrix,
    require_tape,
    softmax,
    softmax_backward,
    tanh_backward,
    tanh_forward,
)


@dataclass
class DaemaModel:
    d: int
    d_prime: int
    d_z: int
    enc1: Affine
    enc2: Affine
    selector: Affine
    decoder: Affine

    arch = "daema"
    param_names = (
        "enc1.weight", "enc1.bias", "enc2.weight", "enc2.bias",
        "selector.weight", "selector.bias", "decoder.weight", "decoder.bias",
    )

    def __post_init__(self):
        k = self.d_prime * self.d_z
        expected = {
            "enc1": (k, 2 * self.d),
            "enc2": (k, k),
            "selector": (k, self.d),
            "decoder": (self.d, self.d_z),
        }
        for name, shape in expected.items():
            got = getattr(self, name).weight.shape
            if got != shape:
                raise DimensionError(f"{name} weight has shape {got}, expected {shape}")

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, d_prime: int | None = None, d_z: int | None = None):
        """Randomly initialised model; ``d'`` and ``d_z`` default to ``2d``."""
        d_prime = 2 * d if d_prime is None else d_prime
        d_z = 2 * d if d_z is None else d_z
        k = d_prime * d_z
        return cls(
            d, d_prime, d_z,
            enc1=Affine.init(2 * d, k, rng),
            enc2=Affine.init(k, k, rng),
            selector=Affine.init(d, k, rng),
            decoder=Affine.init(d_z, d, rng),
        )

    @classmethod
    def from_params(cls, dims: dict, params) -> "DaemaModel":
        w1, b1, w2, b2, ws, bs, wd, bd = params
        return cls(dims["d"], dims["d_prime"], dims["d_z"],
                   Affine(w1, b1), Affine(w2, b2), Affine(ws, bs), Affine(wd, bd))

    @property
    def dims(self) -> dict:
        return {"d": self.d, "d_prime": self.d_prime, "d_z": self.d_z}

    def layers(self):
        return [self.enc1, self.enc2, self.selector, self.decoder]

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers() for p in layer.params()]

    def copy(self) -> "DaemaModel":
        return DaemaModel(self.d, self.d_prime, self.d_z,
                          *(layer.copy() for layer in self.layers()))

    def forward(self, xbar, mbar):
        """Reconstruction for a batch plus the tape needed by :meth:`backward`."""
        xbar, mbar = _check_rows(self.d, xbar, mbar)
        tape = Tape()
        inp = np.concatenate([xbar, mbar], axis=1)
        h1 = tanh_forward(affine_forward(self.enc1, inp))
        h2 = tanh_forward(affine_forward(self.enc2, h1))
        F = h2.reshape(-1, self.d_prime, self.d_z)
        S = affine_forward(self.selector, mbar).reshape(-1, self.d_prime, self.d_z)
        A = softmax(S, axis=1)
        z = (A * F).sum(axis=1)
        xhat = affine_forward(self.decoder, z)
        tape.values.update(inp=inp, mbar=mbar, h1=h1, h2=h2, A=A, z=z)
        tape.completed = True
        return xhat, tape

    def backward(self, tape: Tape, dxhat, out=None) -> list[np.ndarray]:
        """Parameter gradients (ordered as :meth:`params`) given d loss / d xhat.

        `out`, if given, is a list of arrays shaped like :meth:`params` that
        receives the gradients in place.
        """
        tape = require_tape(tape)
        dxhat = as_matrix(dxhat)
        bufs = [None] * 4 if out is None else [out[i:i + 2] for i in range(0, 8, 2)]
        h1, h2, A, z = tape["h1"], tape["h2"], tape["A"], tape["z"]
        F = h2.reshape(A.shape)
        n = dxhat.shape[0]

        dwd, dbd, dz = affine_backward(self.decoder, z, dxhat, bufs[3])
        dz = dz[:, None, :]
        dF = A * dz
        dS = softmax_backward(A, F * dz, axis=1)
        dws, dbs, _ = affine_backward(self.selector, tape["mbar"], dS.reshape(n, -1), bufs[2], need_dx=False)
        da2 = tanh_backward(h2, dF.reshape(n, -1))
        dw2, db2, dh1 = affine_backward(self.enc2, h1, da2, bufs[1])
        da1 = tanh_backward(h1, dh1)
        dw1, db1, _ = affine_backward(self.enc1, tape["inp"], da1, bufs[0], need_dx=False)
        return [dw1, db1, dw2, db2, dws, dbs, dwd, dbd]

    def reconstruct(self, xbar, mbar):
        xhat, _ = self.forward(xbar, mbar)
        return xhat


def _check_rows(d, x, m):
    x = as_matrix(x)
    m = as_matrix(m)
    if x.shape[1] != d or m.shape != x.shape:
        raise DimensionError(f"model expects rows of width {d}; got data {x.shape} and mask {m.shape}")
    return x, m


def _single(fn):
    """Run a batch function on 1-D input and return a result without the batch axis."""
    def wrapper(*args):
        squeeze = np.ndim(args[-1]) == 1
        out = fn(*args)
        return out[0] if squeeze else out
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_single
def encode_features(model: DaemaModel, xbar, mbar) -> np.ndarray:
    """Candidate map ``F`` of shape ``(d', d_z)`` (per row)."""
    xbar, mbar = _check_rows(model.d, xbar, mbar)
    inp = np.concatenate([xbar, mbar], axis=1)
    h2 = tanh_forward(affine_forward(model.enc2, tanh_forward(affine_forward(model.enc1, inp))))
    return h2.reshape(-1, model.d_prime, model.d_z)


@_single
def select_features(model: DaemaModel, mbar) -> np.ndarray:
    """Selection logits ``S`` of shape ``(d', d_z)`` (per row); no activation."""
    mbar = as_matrix(mbar)
    if mbar.shape[1] != model.d:
        raise DimensionError(f"mask of shape {mbar.shape} does not fit d={model.d}")
    return affine_forward(model.selector, mbar).reshape(-1, model.d_prime, model.d_z)


def attention_weights(S) -> np.ndarray:
    """Softmax of the selection logits over the candidate axis (``d'``)."""
    return softmax(S, axis=-2)


def attend(F, S) -> np.ndarray:
    """Latent vector ``z_j = softmax(S[:, j]) . F[:, j]``.

    Accepts one ``(d', d_z)`` pair or a batch of shape ``(n, d', d_z)``.
    """
    F = np.asarray(F, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if F.shape != S.shape or F.ndim not in (2, 3):
        raise DimensionError(f"feature map {F.shape} and selection map {S.shape} must match")
    return (attention_weights(S) * F).sum(axis=-2)


def decode(model: DaemaModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != model.d_z:
        raise DimensionError(f"latent of shape {z.shape} does not fit d_z={model.d_z}")
    out = affine_forward(model.decoder, as_matrix(z))
    return out[0] if z.ndim == 1 else out


def masked_loss(xhat, x, m) -> float:
    """``sum_j (1 - m_j) (x_j - xhat_j)^2``, averaged over rows for a batch.

    `m` is the original mask: originally-missing cells never contribute.
    """
    xhat = np.asarray(xhat, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    m = np.asarray(m, dtype=bool)
    if not (xhat.shape == x.shape == m.shape):
        raise DimensionError(f"shapes {xhat.shape}, {x.shape}, {m.shape} differ")
    sq = np.where(m, 0.0, (x - xhat) ** 2)
    if sq.ndim == 1:
        return float(sq.sum())
    return float(sq.sum(axis=1).mean())


def masked_loss_grad(xhat, x, m) -> np.ndarray:
    """Gradient of :func:`masked_loss` with respect to `xhat`."""
    xhat = np.asarray(xhat, dtype=np.float64)
    scale = 2.0 if xhat.ndim == 1 else 2.0 / xhat.shape[0]
    return np.where(np.asarray(m, dtype=bool), 0.0, scale * (xhat - np.asarray(x, dtype=np.float64)))


def impute(model, x, m) -> np.ndarray:
    """Fill the cells flagged in `m` with the model's reconstruction.

    Observed cells are returned unchanged (bit-identical). No artificial
    corruption is applied: the model sees ``mbar = m``. Works for any model
    exposing ``reconstruct(xbar, mbar)`` (DAEMA or the plain DAE).
    """
    x = np.asarray(x, dtype=np.float64)
    m = np.asarray(m, dtype=bool)
    if x.shape != m.shape:
        raise DimensionError(f"data shape {x.shape} does not match mask shape {m.shape}")
    xbar = np.where(m, 0.0, x)
    xhat = model.reconstruct(xbar, m.astype(np.float64))
    if x.ndim == 1:
        xhat = xhat[0]
    return np.where(m, xhat, x)
