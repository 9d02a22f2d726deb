"""Dense float64 kernel: affine/tanh/softmax layers, their backward passes, and Adam.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. Backward
passes are written out by hand for the two fixed architectures that use this
module (DAEMA and the plain DAE), so each layer exposes a forward and a
backward function rather than going through a general autodiff tape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DimensionError, UsageError

DTYPE = np.float64


def as_matrix(x) -> np.ndarray:
    """Return `x` as a 2-D float64 array (a 1-D input becomes one row)."""
    arr = np.asarray(x, dtype=DTYPE)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of shape {arr.shape}")
    return arr


@dataclass
class Affine:
    """Fully-connected layer ``y = W x + b`` with ``W`` stored as (out, in)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=DTYPE)
        self.bias = np.asarray(self.bias, dtype=DTYPE)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise DimensionError(
                f"weight {self.weight.shape} and bias {self.bias.shape} are inconsistent"
            )

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "Affine":
        """Weights ~ U(-1/sqrt(n_in), 1/sqrt(n_in)), zero bias."""
        bound = 1.0 / np.sqrt(n_in)
        return cls(rng.uniform(-bound, bound, size=(n_out, n_in)), np.zeros(n_out))

    @classmethod
    def zeros(cls, n_in: int, n_out: int) -> "Affine":
        return cls(np.zeros((n_out, n_in)), np.zeros(n_out))

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.weight, self.bias]

    def copy(self) -> "Affine":
        return Affine(self.weight.copy(), self.bias.copy())


def affine_forward(p: Affine, x: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != p.n_in:
        raise DimensionError(
            f"input of shape {x.shape} does not fit weight of shape {p.weight.shape}"
        )
    return x @ p.weight.T + p.bias


def affine_backward(p: Affine, x: np.ndarray, dy: np.ndarray, out=None, need_dx=True):
    """Gradients ``(dW, db, dx)`` of an affine layer given upstream ``dy``.

    `out` may hold preallocated ``(dW, db)`` arrays to write into. ``dx`` is
    ``None`` when `need_dx` is false.
    """
    if dy.shape != (x.shape[0], p.n_out):
        raise DimensionError(f"upstream gradient {dy.shape} does not match output ({x.shape[0]}, {p.n_out})")
    if out is None:
        dw, db = dy.T @ x, dy.sum(axis=0)
    else:
        dw, db = out
        np.matmul(dy.T, x, out=dw)
        np.sum(dy, axis=0, out=db)
    return dw, db, (dy @ p.weight if need_dx else None)


def tanh_forward(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Backward through tanh, expressed with the forward *output* ``y``."""
    return dy * (1.0 - y * y)


def softmax(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along `axis` (max-subtracted)."""
    v = np.asarray(v, dtype=DTYPE)
    e = np.exp(v - v.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(a: np.ndarray, da: np.ndarray, axis: int = -1) -> np.ndarray:
    """Backward through softmax given its output ``a`` and upstream ``da``."""
    return a * (da - (a * da).sum(axis=axis, keepdims=True))


@dataclass
class Tape:
    """Intermediate values recorded by a forward pass, consumed by backward."""

    values: dict = field(default_factory=dict)
    completed: bool = False

    def __getitem__(self, key):
        return self.values[key]

    def __setitem__(self, key, value):
        self.values[key] = value


def require_tape(tape) -> Tape:
    if tape is None or not isinstance(tape, Tape) or not tape.completed:
        raise UsageError("backward called without a completed forward pass")
    return tape


@dataclass
class AdamState:
    """Moment accumulators for Adam; one entry per parameter array."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


@numba.njit(cache=True, error_model="numpy")
def _adam_kernel(p, g, m, v, beta1, beta2, eps, step_size, root_bc2):  # pragma: no cover - compiled
    for i in range(p.size):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
        m[i] = mi
        v[i] = vi
        p[i] -= step_size * mi / (np.sqrt(vi) / root_bc2 + eps)


def adam_step(params, grads, state: AdamState, lr: float):
    """Apply one bias-corrected Adam update to `params` in place.

    ``p -= lr * mhat / (sqrt(vhat) + eps)`` with ``mhat = m / (1 - beta1^t)`` and
    ``vhat = v / (1 - beta2^t)``. Returns ``(params, state)``; both are the
    mutated input objects.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError(
            f"{len(params)} parameters, {len(grads)} gradients, {len(state.m)} accumulators"
        )
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise DimensionError(f"parameter {p.shape}, gradient {g.shape}, state {m.shape}")
        if not p.flags.c_contiguous:
            raise DimensionError("Adam updates require C-contiguous parameter arrays")

    state.step += 1
    step_size = lr / (1.0 - state.beta1**state.step)
    root_bc2 = np.sqrt(1.0 - state.beta2**state.step)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        _adam_kernel(p.reshape(-1), np.ascontiguousarray(g, dtype=DTYPE).reshape(-1), m.reshape(-1),
                     v.reshape(-1), state.beta1, state.beta2, state.eps, step_size, root_bc2)
    return params, state
