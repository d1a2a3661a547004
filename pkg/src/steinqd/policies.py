"""Policy parameterizations and value functions.

All policies share one gradient interface: ``log_prob(states, actions)``
evaluates log-densities, ``logp_backward(states, actions, coeffs)`` returns
the flat-parameter gradient of sum_k coeffs[k] * log pi(a_k | s_k). The PPO
machinery and every policy-gradient estimator are built on these two calls.
"""

from __future__ import annotations

import math

import numpy as np

from .envs import ContinuousMaze, TabularMDP
from .errors import ContractError
from .nn.mlp import MlpParams

LOG_STD_FLOOR = math.log(0.05)


def _stable_log_softmax(z):
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def _one_hot(idx, n):
    out = np.zeros((len(idx), n))
    out[np.arange(len(idx)), np.asarray(idx, dtype=np.intp)] = 1.0
    return out


class TabularSoftmaxPolicy:
    kind = "tabular-softmax"

    def __init__(self, n_states: int, n_actions: int, logits: np.ndarray | None = None):
        self.n_states = n_states
        self.n_actions = n_actions
        self.logits = np.zeros((n_states, n_actions)) if logits is None else \
            np.asarray(logits, dtype=np.float64).copy()
        self._cache = None  # (log-probs, probs, cumulative) for the current logits

    @property
    def n_params(self) -> int:
        return self.logits.size

    def get_flat(self) -> np.ndarray:
        return self.logits.ravel().copy()

    def set_flat(self, flat: np.ndarray) -> None:
        self.logits[...] = np.asarray(flat, dtype=np.float64).reshape(self.logits.shape)
        self._cache = None

    def clone(self) -> "TabularSoftmaxPolicy":
        return TabularSoftmaxPolicy(self.n_states, self.n_actions, self.logits)

    def _tables(self):
        if self._cache is None:
            logp = _stable_log_softmax(self.logits)
            probs = np.exp(logp)
            self._cache = (logp, probs, np.cumsum(probs, axis=1))
        return self._cache

    def probs_table(self) -> np.ndarray:
        return self._tables()[1]

    def action_probs(self, state: int) -> np.ndarray:
        return self.probs_table()[int(state)]

    def sample_batch(self, states, rng) -> np.ndarray:
        cum = self._tables()[2][np.asarray(states, dtype=np.intp)]
        u = rng.random(cum.shape[0])
        return np.minimum((u[:, None] > cum).sum(axis=1), self.n_actions - 1).astype(np.intp)

    def sample_one(self, state, rng) -> int:
        cum = self._tables()[2][int(state)]
        return min(int(np.searchsorted(cum, rng.random(), side="right")), self.n_actions - 1)

    def log_prob(self, states, actions) -> np.ndarray:
        logp = self._tables()[0]
        return logp[np.asarray(states, dtype=np.intp), np.asarray(actions, dtype=np.intp)]

    def logp_backward(self, states, actions, coeffs) -> np.ndarray:
        states = np.asarray(states, dtype=np.intp)
        actions = np.asarray(actions, dtype=np.intp)
        coeffs = np.asarray(coeffs, dtype=np.float64)
        probs = self.probs_table()[states]
        grad = np.zeros_like(self.logits)
        np.add.at(grad, (states, actions), coeffs)
        np.add.at(grad, states, -coeffs[:, None] * probs)
        return grad.ravel()


class MlpCategoricalPolicy:
    kind = "mlp-categorical"

    def __init__(self, n_states: int, n_actions: int, hidden, rng):
        self.n_states = n_states
        self.n_actions = n_actions
        self.net = MlpParams.create(n_states, list(hidden), n_actions, head="identity", rng=rng)
        self._cache = None  # full (log-probs, probs, cumulative) tables

    @property
    def n_params(self) -> int:
        return self.net.n_params

    def get_flat(self):
        return self.net.get_flat()

    def set_flat(self, flat):
        self.net.set_flat(flat)
        self._cache = None

    def _tables(self):
        # the state space is finite; evaluate the network once per parameter version
        if self._cache is None:
            z = self.net.forward(_one_hot(np.arange(self.n_states), self.n_states))
            logp = _stable_log_softmax(z)
            probs = np.exp(logp)
            self._cache = (logp, probs, np.cumsum(probs, axis=1))
        return self._cache

    def probs_table(self) -> np.ndarray:
        return self._tables()[1]

    def action_probs(self, state):
        return self.probs_table()[int(state)]

    def sample_batch(self, states, rng):
        cum = self._tables()[2][np.asarray(states, dtype=np.intp)]
        u = rng.random(cum.shape[0])
        return np.minimum((u[:, None] > cum).sum(axis=1), self.n_actions - 1).astype(np.intp)

    def sample_one(self, state, rng):
        cum = self._tables()[2][int(state)]
        return min(int(np.searchsorted(cum, rng.random(), side="right")), self.n_actions - 1)

    def log_prob(self, states, actions):
        logp = self._tables()[0][np.asarray(states, dtype=np.intp)]
        return logp[np.arange(len(actions)), np.asarray(actions, dtype=np.intp)]

    def logp_backward(self, states, actions, coeffs):
        x = _one_hot(states, self.n_states)
        z, cache = self.net.forward_cache(x)
        probs = np.exp(_stable_log_softmax(z))
        dz = -np.asarray(coeffs)[:, None] * probs
        dz[np.arange(len(actions)), np.asarray(actions, dtype=np.intp)] += coeffs
        gflat, _ = self.net.backward(cache, z, dz)
        return gflat


class MlpGaussianPolicy:
    """Diagonal Gaussian with a state-independent learned log-std,
    floored at log(0.05) to prevent premature collapse."""

    kind = "mlp-gaussian"

    def __init__(self, obs_dim: int, action_dim: int, hidden, rng,
                 obs_shift=None, obs_scale=None, init_log_std: float = math.log(0.5)):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.net = MlpParams.create(obs_dim, list(hidden), action_dim, head="identity", rng=rng)
        self.log_std = np.full(action_dim, float(init_log_std))
        self.obs_shift = np.zeros(obs_dim) if obs_shift is None else np.asarray(obs_shift, dtype=np.float64)
        self.obs_scale = np.ones(obs_dim) if obs_scale is None else np.asarray(obs_scale, dtype=np.float64)

    @property
    def n_params(self) -> int:
        return self.net.n_params + self.action_dim

    def get_flat(self):
        return np.concatenate([self.net.get_flat(), self.log_std])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        self.net.set_flat(flat[:self.net.n_params])
        self.log_std[...] = flat[self.net.n_params:]

    def _features(self, states):
        return (np.atleast_2d(np.asarray(states, dtype=np.float64)) + self.obs_shift) * self.obs_scale

    def _std(self):
        return np.exp(np.maximum(self.log_std, LOG_STD_FLOOR))

    def mean_std(self, state):
        mean = self.net.forward(self._features(state))[0]
        return mean, self._std()

    def sample_batch(self, states, rng):
        mean = self.net.forward(self._features(states))
        return mean + self._std() * rng.standard_normal(mean.shape)

    def sample_one(self, state, rng):
        return self.sample_batch(np.asarray(state)[None, :], rng)[0]

    def log_prob(self, states, actions):
        mean = self.net.forward(self._features(states))
        std = self._std()
        delta = (np.asarray(actions, dtype=np.float64) - mean) / std
        return -0.5 * (delta * delta).sum(axis=1) - np.log(std).sum() \
            - 0.5 * self.action_dim * math.log(2.0 * math.pi)

    def logp_backward(self, states, actions, coeffs):
        x = self._features(states)
        mean, cache = self.net.forward_cache(x)
        std = self._std()
        delta = (np.asarray(actions, dtype=np.float64) - mean) / std
        coeffs = np.asarray(coeffs, dtype=np.float64)
        dmean = coeffs[:, None] * delta / std
        gnet, _ = self.net.backward(cache, mean, dmean)
        # floored entries stop responding to the std gradient
        active = self.log_std > LOG_STD_FLOOR
        dlogstd = (coeffs[:, None] * (delta * delta - 1.0)).sum(axis=0) * active
        return np.concatenate([gnet, dlogstd])


def action_distribution(policy, state):
    """Action distribution at one state: probabilities for discrete
    policies, (mean, std) for Gaussian policies."""
    if policy.kind in ("tabular-softmax", "mlp-categorical"):
        return policy.action_probs(state)
    if policy.kind == "mlp-gaussian":
        return policy.mean_std(state)
    raise ContractError(f"unknown policy kind {policy.kind}")


# ---------------------------------------------------------------------------
# value functions (PPO baselines)


class TabularValue:
    kind = "tabular"

    def __init__(self, n_states: int):
        self.table = np.zeros(n_states)

    @property
    def n_params(self):
        return self.table.size

    def get_flat(self):
        return self.table.copy()

    def set_flat(self, flat):
        self.table[...] = np.asarray(flat, dtype=np.float64)

    def values(self, states):
        return self.table[np.asarray(states, dtype=np.intp)]

    def value_backward(self, states, upstream):
        grad = np.zeros_like(self.table)
        np.add.at(grad, np.asarray(states, dtype=np.intp), np.asarray(upstream, dtype=np.float64))
        return grad


class MlpValue:
    kind = "mlp"

    def __init__(self, obs_dim: int, hidden, rng, obs_shift=None, obs_scale=None):
        self.net = MlpParams.create(obs_dim, list(hidden), 1, head="identity", rng=rng)
        self.obs_shift = np.zeros(obs_dim) if obs_shift is None else np.asarray(obs_shift, dtype=np.float64)
        self.obs_scale = np.ones(obs_dim) if obs_scale is None else np.asarray(obs_scale, dtype=np.float64)

    @property
    def n_params(self):
        return self.net.n_params

    def get_flat(self):
        return self.net.get_flat()

    def set_flat(self, flat):
        self.net.set_flat(flat)

    def _features(self, states):
        return (np.atleast_2d(np.asarray(states, dtype=np.float64)) + self.obs_shift) * self.obs_scale

    def values(self, states):
        return self.net.forward(self._features(states))[:, 0]

    def value_backward(self, states, upstream):
        x = self._features(states)
        y, cache = self.net.forward_cache(x)
        gflat, _ = self.net.backward(cache, y, np.asarray(upstream, dtype=np.float64)[:, None])
        return gflat


# ---------------------------------------------------------------------------
# construction helpers


def maze_obs_transform(maze: ContinuousMaze):
    """Shift/scale mapping maze positions into [-1, 1] per axis."""
    shift = -np.array([maze.n_cols / 2.0, maze.n_rows / 2.0])
    scale = np.array([2.0 / maze.n_cols, 2.0 / maze.n_rows])
    return shift, scale


def make_policy(env, kind: str, hidden, rng):
    if isinstance(env, TabularMDP):
        if kind in ("auto", "tabular-softmax"):
            return TabularSoftmaxPolicy(env.n_states, env.n_actions)
        if kind == "mlp-categorical":
            return MlpCategoricalPolicy(env.n_states, env.n_actions, hidden, rng)
        raise ContractError(f"policy kind {kind!r} unsupported on tabular envs")
    if isinstance(env, ContinuousMaze):
        if kind in ("auto", "mlp-gaussian"):
            shift, scale = maze_obs_transform(env)
            return MlpGaussianPolicy(2, 2, hidden, rng, obs_shift=shift, obs_scale=scale)
        raise ContractError(f"policy kind {kind!r} unsupported on the maze")
    raise ContractError(f"unknown environment type {type(env).__name__}")


def make_value_fn(env, hidden, rng):
    if isinstance(env, TabularMDP):
        return TabularValue(env.n_states)
    shift, scale = maze_obs_transform(env)
    return MlpValue(2, hidden, rng, obs_shift=shift, obs_scale=scale)
