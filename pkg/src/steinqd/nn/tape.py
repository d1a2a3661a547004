"""Reverse-mode automatic differentiation over recorded numpy computations.

A :class:`Tape` records primitive operations in execution order. Calling
:func:`backward` on a scalar output walks the record in reverse and
accumulates exact gradients into every participating :class:`Var`. The tape
is rebuilt per minibatch; nothing here is reused across loss evaluations.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, ShapeError


def _as_f64(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Var:
    """A node value living on a tape. Values are immutable once created."""

    __slots__ = ("tape", "value", "grad")

    def __init__(self, tape: "Tape", value: np.ndarray):
        self.tape = tape
        self.value = value
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def _accumulate(self, g: np.ndarray) -> None:
        g = _unbroadcast(np.asarray(g, dtype=np.float64), self.value.shape)
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad = self.grad + g

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return self.tape.add(self, self.tape.lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.tape.sub(self, self.tape.lift(other))

    def __rsub__(self, other):
        return self.tape.sub(self.tape.lift(other), self)

    def __mul__(self, other):
        return self.tape.mul(self, self.tape.lift(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.tape.div(self, self.tape.lift(other))

    def __rtruediv__(self, other):
        return self.tape.div(self.tape.lift(other), self)

    def __neg__(self):
        return self.tape.mul(self, self.tape.lift(-1.0))

    def __matmul__(self, other):
        return self.tape.matmul(self, self.tape.lift(other))


class _Node:
    __slots__ = ("out", "parents", "fwd", "bwd")

    def __init__(self, out, parents, fwd, bwd):
        self.out = out
        self.parents = parents
        self.fwd = fwd
        self.bwd = bwd


class Tape:
    """Ordered record of primitive operations; topological by construction."""

    def __init__(self):
        self.nodes: list[_Node] = []

    # -- leaves ----------------------------------------------------------
    def var(self, value) -> Var:
        return Var(self, _as_f64(value))

    def lift(self, value) -> Var:
        if isinstance(value, Var):
            return value
        return self.var(value)

    def _record(self, value, parents, fwd, bwd) -> Var:
        out = Var(self, value)
        self.nodes.append(_Node(out, parents, fwd, bwd))
        return out

    # -- elementwise primitives -------------------------------------------
    def add(self, a: Var, b: Var) -> Var:
        fwd = lambda: a.value + b.value
        return self._record(fwd(), (a, b), fwd, lambda g: (g, g))

    def sub(self, a: Var, b: Var) -> Var:
        fwd = lambda: a.value - b.value
        return self._record(fwd(), (a, b), fwd, lambda g: (g, -g))

    def mul(self, a: Var, b: Var) -> Var:
        fwd = lambda: a.value * b.value
        return self._record(fwd(), (a, b), fwd, lambda g: (g * b.value, g * a.value))

    def div(self, a: Var, b: Var) -> Var:
        fwd = lambda: a.value / b.value
        return self._record(
            fwd(), (a, b), fwd,
            lambda g: (g / b.value, -g * a.value / (b.value * b.value)),
        )

    def pow_const(self, a: Var, p: float) -> Var:
        fwd = lambda: a.value ** p
        return self._record(fwd(), (a,), fwd, lambda g: (g * p * a.value ** (p - 1.0),))

    def square(self, a: Var) -> Var:
        return self.pow_const(a, 2.0)

    def tanh(self, a: Var) -> Var:
        y = np.tanh(a.value)
        return self._record(y, (a,), lambda: np.tanh(a.value),
                            lambda g, _y=y: (g * (1.0 - _y * _y),))

    def exp(self, a: Var) -> Var:
        y = np.exp(a.value)
        return self._record(y, (a,), lambda: np.exp(a.value), lambda g, _y=y: (g * _y,))

    def log(self, a: Var) -> Var:
        fwd = lambda: np.log(a.value)
        return self._record(fwd(), (a,), fwd, lambda g: (g / a.value,))

    def clip(self, a: Var, lo: float, hi: float) -> Var:
        # subgradient: pass-through strictly inside, zero on the clamped set
        fwd = lambda: np.clip(a.value, lo, hi)
        mask = (a.value > lo) & (a.value < hi)
        return self._record(fwd(), (a,), fwd, lambda g, _m=mask: (g * _m,))

    def minimum(self, a: Var, b: Var) -> Var:
        # ties route the gradient to the first argument
        fwd = lambda: np.minimum(a.value, b.value)
        take_a = a.value <= b.value
        return self._record(fwd(), (a, b), fwd,
                            lambda g, _m=take_a: (g * _m, g * (~_m)))

    def where(self, cond: np.ndarray, a: Var, b: Var) -> Var:
        cond = np.asarray(cond, dtype=bool)
        fwd = lambda: np.where(cond, a.value, b.value)
        return self._record(fwd(), (a, b), fwd, lambda g: (g * cond, g * (~cond)))

    # -- structural primitives ---------------------------------------------
    def matmul(self, a: Var, b: Var) -> Var:
        if a.value.ndim != 2 or b.value.ndim != 2:
            raise ShapeError(f"matmul expects 2-d operands, got {a.shape} @ {b.shape}")
        if a.value.shape[1] != b.value.shape[0]:
            raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
        fwd = lambda: a.value @ b.value
        return self._record(fwd(), (a, b), fwd,
                            lambda g: (g @ b.value.T, a.value.T @ g))

    def sum(self, a: Var, axis=None, keepdims: bool = False) -> Var:
        fwd = lambda: a.value.sum(axis=axis, keepdims=keepdims)

        def bwd(g):
            if axis is None:
                return (np.broadcast_to(g, a.value.shape).copy(),)
            g_exp = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(g_exp, a.value.shape).copy(),)

        return self._record(fwd(), (a,), fwd, bwd)

    def mean(self, a: Var, axis=None, keepdims: bool = False) -> Var:
        n = a.value.size if axis is None else a.value.shape[axis]
        return self.mul(self.sum(a, axis=axis, keepdims=keepdims), self.lift(1.0 / n))

    def take_rows(self, a: Var, idx: np.ndarray) -> Var:
        """Row gather: out[k] = a[idx[k], :] (or a[idx[k]] for 1-d a)."""
        idx = np.asarray(idx, dtype=np.intp)
        fwd = lambda: a.value[idx]

        def bwd(g):
            out = np.zeros_like(a.value)
            np.add.at(out, idx, g)
            return (out,)

        return self._record(fwd(), (a,), fwd, bwd)

    def take_elems(self, a: Var, rows: np.ndarray, cols: np.ndarray) -> Var:
        """Element gather from a 2-d array: out[k] = a[rows[k], cols[k]]."""
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        fwd = lambda: a.value[rows, cols]

        def bwd(g):
            out = np.zeros_like(a.value)
            np.add.at(out, (rows, cols), g)
            return (out,)

        return self._record(fwd(), (a,), fwd, bwd)

    def logsumexp(self, a: Var, axis: int = -1) -> Var:
        m = a.value.max(axis=axis, keepdims=True)
        y = np.log(np.exp(a.value - m).sum(axis=axis)) + np.squeeze(m, axis=axis)

        def fwd():
            mm = a.value.max(axis=axis, keepdims=True)
            return np.log(np.exp(a.value - mm).sum(axis=axis)) + np.squeeze(mm, axis=axis)

        def bwd(g):
            sm = np.exp(a.value - np.expand_dims(self_out.value, axis))
            return (np.expand_dims(g, axis) * sm,)

        self_out = self._record(y, (a,), fwd, bwd)
        return self_out

    def softmax(self, a: Var, axis: int = -1) -> Var:
        z = a.value - a.value.max(axis=axis, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=axis, keepdims=True)

        def fwd():
            zz = a.value - a.value.max(axis=axis, keepdims=True)
            ee = np.exp(zz)
            return ee / ee.sum(axis=axis, keepdims=True)

        def bwd(g, _y=y):
            dot = (g * _y).sum(axis=axis, keepdims=True)
            return (_y * (g - dot),)

        return self._record(y, (a,), fwd, bwd)

    # -- replay / backward ----------------------------------------------
    def replay(self) -> bool:
        """Re-run every recorded forward; True when all outputs reproduce bit-exactly."""
        ok = True
        for node in self.nodes:
            redo = node.fwd()
            if not np.array_equal(np.asarray(redo), node.out.value):
                ok = False
            node.out.value = np.asarray(redo, dtype=np.float64)
        return ok


def backward(tape: Tape, loss: Var) -> None:
    """Reverse sweep from a scalar `loss`; populates `.grad` on tape Vars.

    Vars that do not influence the loss keep a zero gradient (reported as
    zeros by :func:`grad_of`).
    """
    if loss.value.size != 1:
        raise ContractError(f"loss must be scalar, got shape {loss.value.shape}")
    for node in tape.nodes:
        node.out.grad = None
    loss.grad = np.ones_like(loss.value)
    for node in reversed(tape.nodes):
        g = node.out.grad
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.bwd(g)):
            parent._accumulate(pg)


def grad_of(v: Var) -> np.ndarray:
    """Gradient accumulated in `v` by the last backward pass (zeros if none)."""
    if v.grad is None:
        return np.zeros_like(v.value)
    return v.grad
