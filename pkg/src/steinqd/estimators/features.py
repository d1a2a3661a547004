"""State-action featurization for the ratio-estimator networks."""

from __future__ import annotations

import numpy as np

from ..envs import ContinuousMaze, TabularMDP
from ..errors import ContractError


class SAFeaturizer:
    """Maps (state, action) pairs to network inputs.

    Tabular: one-hot state concatenated with one-hot action. Maze: scaled
    position concatenated with scaled displacement, everything roughly in
    [-1, 1].
    """

    def __init__(self, env):
        if isinstance(env, TabularMDP):
            self.tabular = True
            self.n_states = env.n_states
            self.n_actions = env.n_actions
            self.dim = env.n_states + env.n_actions
        elif isinstance(env, ContinuousMaze):
            self.tabular = False
            self.state_shift = -np.array([env.n_cols / 2.0, env.n_rows / 2.0])
            self.state_scale = np.array([2.0 / env.n_cols, 2.0 / env.n_rows])
            self.action_scale = 1.0 / env.step_scale
            self.dim = 4
        else:
            raise ContractError(f"no featurizer for {type(env).__name__}")

    def phi(self, states, actions) -> np.ndarray:
        if self.tabular:
            states = np.asarray(states, dtype=np.intp)
            actions = np.asarray(actions, dtype=np.intp)
            out = np.zeros((len(states), self.dim))
            out[np.arange(len(states)), states] = 1.0
            out[np.arange(len(states)), self.n_states + actions] = 1.0
            return out
        s = (np.asarray(states, dtype=np.float64) + self.state_shift) * self.state_scale
        a = np.asarray(actions, dtype=np.float64) * self.action_scale
        return np.concatenate([s, a], axis=1)

    def all_cells(self):
        """Tabular only: enumerate every (s, a) cell with its features."""
        if not self.tabular:
            raise ContractError("cell enumeration requires a tabular environment")
        states = np.repeat(np.arange(self.n_states), self.n_actions)
        actions = np.tile(np.arange(self.n_actions), self.n_states)
        return states, actions, self.phi(states, actions)
