"""Small feed-forward networks over the kernel backend.

Tanh hidden layers, configurable head (identity / clamped-exp / softmax).
Hidden weights are orthogonally initialized, the output layer starts at
zero so exp-headed ratio models begin at a constant 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from . import backend
from .tape import Tape, Var

_HEAD_CODES = {
    "identity": backend.HEAD_IDENTITY,
    "exp": backend.HEAD_EXP,
    "softmax": backend.HEAD_SOFTMAX,
}


def orthogonal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(q[:rows, :cols])


def mlp_param_count(in_dim: int, hidden: list[int], out_dim: int) -> int:
    dims = [in_dim] + list(hidden) + [out_dim]
    return sum((dims[k] + 1) * dims[k + 1] for k in range(len(dims) - 1))


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str = "identity"
    meta: dict = field(default_factory=dict)

    @classmethod
    def create(cls, in_dim: int, hidden: list[int], out_dim: int,
               head: str = "identity", rng: np.random.Generator | None = None,
               out_bias: float = 0.0) -> "MlpParams":
        if head not in _HEAD_CODES:
            raise ShapeError(f"unknown head {head!r}")
        dims = [in_dim] + list(hidden) + [out_dim]
        ws, bs = [], []
        for k in range(len(dims) - 1):
            if k < len(dims) - 2:
                if rng is None:
                    raise ShapeError("rng required for hidden-layer initialization")
                ws.append(orthogonal(dims[k], dims[k + 1], rng))
                bs.append(np.zeros(dims[k + 1]))
            else:
                ws.append(np.zeros((dims[k], dims[k + 1])))
                bs.append(np.full(dims[k + 1], float(out_bias)))
        return cls(ws, bs, head)

    # -- shape bookkeeping -------------------------------------------------
    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def get_flat(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights]
                              + [b.ravel() for b in self.biases])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params:
            raise ShapeError(f"expected {self.n_params} parameters, got {flat.size}")
        off = 0
        for w in self.weights:
            w[...] = flat[off:off + w.size].reshape(w.shape)
            off += w.size
        for b in self.biases:
            b[...] = flat[off:off + b.size]
            off += b.size

    def grads_to_flat(self, dws, dbs) -> np.ndarray:
        return np.concatenate([dw.ravel() for dw in dws] + [db.ravel() for db in dbs])

    # -- evaluation ---------------------------------------------------------
    def _check_input(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"input trailing dim {x.shape} incompatible with in_dim {self.in_dim}")
        return np.ascontiguousarray(x), single

    def forward(self, x: np.ndarray) -> np.ndarray:
        x, single = self._check_input(x)
        y = backend.impl.mlp_forward(self.weights, self.biases, x, _HEAD_CODES[self.head])
        return y[0] if single else y

    def forward_cache(self, x: np.ndarray):
        x, _ = self._check_input(x)
        return backend.impl.mlp_forward_cache(self.weights, self.biases, x, _HEAD_CODES[self.head])

    def backward(self, cache, y: np.ndarray, dy: np.ndarray):
        """Upstream dy (w.r.t. head output) -> (flat parameter grads, input grads)."""
        dws, dbs, dx = backend.impl.mlp_backward(
            self.weights, self.biases, cache, y, np.ascontiguousarray(dy, dtype=np.float64),
            _HEAD_CODES[self.head])
        return self.grads_to_flat(dws, dbs), dx

    def value_and_param_grads(self, x: np.ndarray, dy: np.ndarray):
        y, cache = self.forward_cache(x)
        gflat, _ = self.backward(cache, y, dy)
        return y, gflat

    # -- tape route (general autodiff; also the oracle for the kernels) -----
    def forward_tape(self, tape: Tape, x, param_vars: list[Var] | None = None):
        """Record the forward pass on `tape`; returns (output var, param vars)."""
        x_arr, _ = self._check_input(np.asarray(x, dtype=np.float64))
        if param_vars is None:
            param_vars = [tape.var(w) for w in self.weights] + [tape.var(b) for b in self.biases]
        n = len(self.weights)
        w_vars, b_vars = param_vars[:n], param_vars[n:]
        h = tape.var(x_arr)
        for k in range(n - 1):
            h = tape.tanh(h @ w_vars[k] + b_vars[k])
        z = h @ w_vars[-1] + b_vars[-1]
        if self.head == "identity":
            y = z
        elif self.head == "exp":
            y = tape.exp(tape.clip(z, -backend.EXP_CLAMP, backend.EXP_CLAMP))
        else:
            y = tape.softmax(z, axis=-1)
        return y, param_vars


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    return params.forward(x)
