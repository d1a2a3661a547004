"""Pure-numpy MLP kernels; reference implementation for the compiled core.

Networks are tanh-MLPs: ``h_{k+1} = tanh(h_k @ W_k + b_k)`` for hidden
layers, a linear output layer, then one of three heads. Backward takes the
upstream gradient w.r.t. the head output and returns parameter gradients
plus the input gradient.
"""

import numpy as np

HEAD_IDENTITY = 0
HEAD_EXP = 1
HEAD_SOFTMAX = 2

# exp-head pre-activation clamp; keeps ratio estimates finite
EXP_CLAMP = 30.0

NAME = "python"


def _apply_head(z, head):
    if head == HEAD_IDENTITY:
        return z
    if head == HEAD_EXP:
        y = np.clip(z, -EXP_CLAMP, EXP_CLAMP)
        np.exp(y, out=y)
        return y
    if head == HEAD_SOFTMAX:
        e = np.exp(z - z.max(axis=1, keepdims=True))
        e /= e.sum(axis=1, keepdims=True)
        return e
    raise ValueError(f"unknown head code {head}")


def _hidden_forward(h, w, b):
    pre = h @ w
    pre += b
    np.tanh(pre, out=pre)
    return pre


def mlp_forward(ws, bs, x, head):
    """Forward pass only. `x` is (N, din); returns (N, dout)."""
    h = x
    for k in range(len(ws) - 1):
        h = _hidden_forward(h, ws[k], bs[k])
    z = h @ ws[-1]
    z += bs[-1]
    return _apply_head(z, head)


def mlp_forward_cache(ws, bs, x, head):
    """Forward pass keeping activations for backward.

    Returns (y, cache) with cache = (activations list incl. input, pre-head z).
    """
    acts = [x]
    h = x
    for k in range(len(ws) - 1):
        h = _hidden_forward(h, ws[k], bs[k])
        acts.append(h)
    z = h @ ws[-1]
    z += bs[-1]
    return _apply_head(z, head), (acts, z)


def mlp_backward(ws, bs, cache, y, dy, head):
    """Backprop of upstream `dy` (gradient w.r.t. head output).

    Returns (dws, dbs, dx).
    """
    acts, z = cache
    if head == HEAD_IDENTITY:
        dz = dy
    elif head == HEAD_EXP:
        mask = (z > -EXP_CLAMP) & (z < EXP_CLAMP)
        dz = dy * y * mask
    elif head == HEAD_SOFTMAX:
        dz = y * (dy - (dy * y).sum(axis=1, keepdims=True))
    else:
        raise ValueError(f"unknown head code {head}")

    n_layers = len(ws)
    dws = [None] * n_layers
    dbs = [None] * n_layers
    g = dz
    for k in range(n_layers - 1, -1, -1):
        a_prev = acts[k]
        dws[k] = a_prev.T @ g
        dbs[k] = g.sum(axis=0)
        g = g @ ws[k].T
        if k > 0:
            g *= 1.0 - acts[k] * acts[k]
    return dws, dbs, g
