"""Environment suite: exact tabular MDPs plus a continuous point-mass maze.

Tabular environments are infinite-horizon discounted MDPs; sampling truncates
episodes at a horizon but all exact computations use the infinite-horizon
formulation. The maze has deterministic kinematics with per-axis wall
clipping and is evaluated only empirically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError

ROW_STOCHASTIC_TOL = 1e-10


@dataclass(frozen=True)
class TabularMDP:
    transition: np.ndarray  # P[s, a, s']
    reward: np.ndarray      # r[s, a]
    mu0: np.ndarray         # initial state distribution
    gamma: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=np.float64)
        r = np.asarray(self.reward, dtype=np.float64)
        mu = np.asarray(self.mu0, dtype=np.float64)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "mu0", mu)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise ConfigError(f"transition tensor must be (S, A, S), got {p.shape}")
        if r.shape != p.shape[:2]:
            raise ConfigError(f"reward table shape {r.shape} != {p.shape[:2]}")
        if mu.shape != (p.shape[0],):
            raise ConfigError(f"mu0 shape {mu.shape} incompatible with S={p.shape[0]}")
        if (p < 0).any():
            raise ConfigError("transition probabilities must be non-negative")
        rows = p.sum(axis=2)
        if np.abs(rows - 1.0).max() > ROW_STOCHASTIC_TOL:
            raise ConfigError(f"transition rows must sum to 1 (max dev {np.abs(rows - 1).max():.3g})")
        if abs(mu.sum() - 1.0) > ROW_STOCHASTIC_TOL or (mu < 0).any():
            raise ConfigError("mu0 must be a probability distribution")
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigError(f"gamma must be in [0, 1), got {self.gamma}")
        # cached inverse-CDF tables; one uniform draw per sample
        object.__setattr__(self, "_cum_p", np.cumsum(p, axis=2))
        object.__setattr__(self, "_cum_mu0", np.cumsum(mu))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def is_tabular(self) -> bool:
        return True

    def reset(self, rng: np.random.Generator) -> int:
        return min(int(np.searchsorted(self._cum_mu0, rng.random(), side="right")),
                   self.n_states - 1)

    def step(self, state: int, action: int, rng: np.random.Generator):
        if not (0 <= state < self.n_states):
            raise DomainError(f"state {state} out of range")
        if not (0 <= action < self.n_actions):
            raise DomainError(f"action {action} out of range")
        nxt = min(int(np.searchsorted(self._cum_p[state, action], rng.random(), side="right")),
                  self.n_states - 1)
        return nxt, float(self.reward[state, action]), False


def zero_reward(env):
    """Wrapper returning reward 0 every step; dynamics untouched."""
    if isinstance(env, TabularMDP):
        return replace(env, reward=np.zeros_like(env.reward))
    if isinstance(env, ContinuousMaze):
        return replace(env, reward_off=True)
    raise ConfigError(f"cannot zero rewards of {type(env).__name__}")


# ---------------------------------------------------------------------------
# deceptive corridor

STAY, LEFT, RIGHT = 0, 1, 2


def make_deceptive_corridor(length: int, threshold: int, action_penalty: float = 0.1,
                            gamma: float = 0.99, move_reward: float = 1.0) -> TabularMDP:
    """Chain MDP with a deceptive action-penalty trap.

    Actions are {stay, left, right}. Moving costs `action_penalty`; signed
    movement reward `move_reward` flows only in states at or past index
    `threshold` (still granted at the right edge, where motion self-loops,
    so the distal mode sustains its reward). Staying is free, which makes
    "never move" a local optimum.
    """
    if not (0 < threshold < length):
        raise ConfigError(f"threshold must lie strictly inside the corridor, got {threshold} for length {length}")
    n = length
    p = np.zeros((n, 3, n))
    r = np.zeros((n, 3))
    for s in range(n):
        p[s, STAY, s] = 1.0
        p[s, LEFT, max(s - 1, 0)] = 1.0
        p[s, RIGHT, min(s + 1, n - 1)] = 1.0
        in_reward_zone = s >= threshold
        r[s, LEFT] = -action_penalty - (move_reward if in_reward_zone else 0.0)
        r[s, RIGHT] = -action_penalty + (move_reward if in_reward_zone else 0.0)
    mu0 = np.zeros(n)
    mu0[0] = 1.0
    return TabularMDP(p, r, mu0, gamma,
                      metadata={"kind": "corridor", "length": length, "threshold": threshold,
                                "action_penalty": action_penalty, "move_reward": move_reward})


# ---------------------------------------------------------------------------
# grid mazes (tabular) and the continuous point-mass maze

UP, DOWN, GLEFT, GRIGHT = 0, 1, 2, 3
_MOVES = {UP: (-1, 0), DOWN: (1, 0), GLEFT: (0, -1), GRIGHT: (0, 1)}


def _parse_grid(grid: list[str]):
    if not grid or any(len(row) != len(grid[0]) for row in grid):
        raise ConfigError("grid must be a non-empty list of equal-length strings")
    start = goal = None
    walls = set()
    for i, row in enumerate(grid):
        for j, c in enumerate(row):
            if c == "#":
                walls.add((i, j))
            elif c == "S":
                start = (i, j)
            elif c == "G":
                goal = (i, j)
            elif c != ".":
                raise ConfigError(f"unknown grid character {c!r} at ({i}, {j})")
    if start is None:
        raise ConfigError("grid needs an S cell")
    if goal is None:
        goal = start  # degenerate grids (e.g. 1x1) collapse goal onto start
    return len(grid), len(grid[0]), walls, start, goal


def _goal_reachable(n_rows, n_cols, walls, start, goal) -> bool:
    seen = {start}
    frontier = [start]
    while frontier:
        cell = frontier.pop()
        if cell == goal:
            return True
        for di, dj in _MOVES.values():
            nxt = (cell[0] + di, cell[1] + dj)
            if (0 <= nxt[0] < n_rows and 0 <= nxt[1] < n_cols
                    and nxt not in walls and nxt not in seen):
                seen.add(nxt)
                frontier.append(nxt)
    return False


def make_gridmaze(spec: dict) -> TabularMDP:
    """4-action gridworld; per-step reward exp(-euclidean distance to goal)
    measured at the cell the move lands in."""
    grid = spec.get("grid")
    gamma = float(spec.get("gamma", 0.99))
    n_rows, n_cols, walls, start, goal = _parse_grid(grid)
    cells = [(i, j) for i in range(n_rows) for j in range(n_cols) if (i, j) not in walls]
    index = {c: k for k, c in enumerate(cells)}
    n = len(cells)
    p = np.zeros((n, 4, n))
    r = np.zeros((n, 4))
    for c, s in index.items():
        for a, (di, dj) in _MOVES.items():
            nxt = (c[0] + di, c[1] + dj)
            if nxt not in index:
                nxt = c  # wall or boundary: stay put
            p[s, a, index[nxt]] = 1.0
            r[s, a] = math.exp(-math.hypot(nxt[0] - goal[0], nxt[1] - goal[1]))
    mu0 = np.zeros(n)
    mu0[index[start]] = 1.0
    meta = {"kind": "gridmaze", "grid": list(grid), "cells": cells,
            "start": start, "goal": goal, "horizon": int(spec.get("horizon", 200)),
            "warnings": []}
    if not _goal_reachable(n_rows, n_cols, walls, start, goal):
        meta["warnings"].append("goal unreachable from start")
    return TabularMDP(p, r, mu0, gamma, metadata=meta)


@dataclass(frozen=True)
class ContinuousMaze:
    """Point mass in a grid of unit cells; walls clip motion per axis."""

    wall_cells: frozenset
    n_rows: int
    n_cols: int
    start: tuple
    goal: tuple
    gamma: float = 0.99
    step_scale: float = 0.4
    horizon: int = 200
    reward_off: bool = False

    @property
    def is_tabular(self) -> bool:
        return False

    @property
    def n_actions(self) -> int:
        return 2  # action vector dimension

    def _is_wall(self, x: float, y: float) -> bool:
        i, j = int(y), int(x)
        if not (0 <= i < self.n_rows and 0 <= j < self.n_cols):
            return True
        return (i, j) in self.wall_cells

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([self.start[1] + 0.5, self.start[0] + 0.5])

    def step(self, pos: np.ndarray, action: np.ndarray, rng: np.random.Generator = None):
        a = np.clip(np.asarray(action, dtype=np.float64), -self.step_scale, self.step_scale)
        x, y = float(pos[0]), float(pos[1])
        nx = float(np.clip(x + a[0], 1e-6, self.n_cols - 1e-6))
        if self._is_wall(nx, y):
            nx = x
        ny = float(np.clip(y + a[1], 1e-6, self.n_rows - 1e-6))
        if self._is_wall(nx, ny):
            ny = y
        new = np.array([nx, ny])
        gx, gy = self.goal[1] + 0.5, self.goal[0] + 0.5
        reward = 0.0 if self.reward_off else math.exp(-math.hypot(nx - gx, ny - gy))
        return new, reward, False


def make_maze(spec: dict) -> ContinuousMaze:
    grid = spec.get("grid")
    n_rows, n_cols, walls, start, goal = _parse_grid(grid)
    return ContinuousMaze(
        wall_cells=frozenset(walls), n_rows=n_rows, n_cols=n_cols,
        start=start, goal=goal, gamma=float(spec.get("gamma", 0.99)),
        step_scale=float(spec.get("step_scale", 0.4)),
        horizon=int(spec.get("horizon", 200)))


def load_grid_spec(path: str) -> dict:
    """Load a maze/gridworld spec from a JSON file; keys: grid, gamma, horizon."""
    with open(path) as fh:
        spec = json.load(fh)
    allowed = {"grid", "gamma", "horizon", "step_scale"}
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in grid spec: {sorted(unknown)}")
    if "grid" not in spec:
        raise ConfigError("grid spec requires a 'grid' key")
    return spec


# layouts used by the bundled experiments
OPEN_GRID_3X3 = {"grid": ["...", ".G.", "S.."], "gamma": 0.95}

UMAZE_GRID = {
    "grid": [
        "#######",
        "#.....#",
        "#.###.#",
        "#.#G#.#",
        "#.#.#.#",
        "#..S..#",
        "#######",
    ],
    "gamma": 0.99,
}
