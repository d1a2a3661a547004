"""Rollout collection with the sample annotations the ratio estimators need.

Expectations over a policy's discounted occupancy are estimated by weighting
each transition by gamma^t (normalized), so no samples are discarded. Each
batch can carry, per target policy, next-state actions a' ~ pi_target(s')
and fresh initial actions a0 ~ pi_target(s0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError


@dataclass
class Transition:
    state: object
    action: object
    reward: float
    next_state: object
    done: bool
    t: int


@dataclass
class Trajectory:
    transitions: list
    terminal: bool = False


@dataclass
class RolloutBatch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    t: np.ndarray
    episode_id: np.ndarray
    disc_w: np.ndarray                 # gamma^t per transition
    ep_starts: np.ndarray              # first index of each episode
    init_states: np.ndarray            # one per episode
    gamma: float
    next_action_ann: dict = field(default_factory=dict)   # member -> a' per transition
    init_action_ann: dict = field(default_factory=dict)   # member -> a0 per episode

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def n_episodes(self) -> int:
        return len(self.ep_starts)

    def episode_returns(self) -> np.ndarray:
        """Normalized discounted return per episode: (1-gamma) sum gamma^t r."""
        out = np.zeros(self.n_episodes)
        np.add.at(out, self.episode_id, self.disc_w * self.rewards)
        return (1.0 - self.gamma) * out


def collect_rollouts(env, policy, n_transitions: int, horizon: int,
                     rng: np.random.Generator,
                     target_policies: dict | None = None,
                     ann_rng: np.random.Generator | None = None) -> RolloutBatch:
    """Collect exactly `n_transitions` transitions in episodes of `horizon` steps.

    `target_policies` maps member index -> policy; for each one, a' and a0
    annotations are sampled from a separate `ann_rng` stream so the main
    trajectory stream is independent of how many targets are requested.
    """
    if n_transitions <= 0:
        raise ContractError("n_transitions must be positive")
    if target_policies and ann_rng is None:
        raise ContractError("annotation sampling requires ann_rng")

    states, actions, rewards, next_states, dones, ts, ep_ids = [], [], [], [], [], [], []
    ep_starts, init_states = [], []
    collected = 0
    episode = 0
    while collected < n_transitions:
        s = env.reset(rng)
        ep_starts.append(collected)
        init_states.append(s)
        for t in range(horizon):
            a = policy.sample_one(s, rng)
            s_next, r, done = env.step(s, a, rng)
            states.append(s)
            actions.append(a)
            rewards.append(r)
            next_states.append(s_next)
            dones.append(done)
            ts.append(t)
            ep_ids.append(episode)
            s = s_next
            collected += 1
            if done or collected >= n_transitions:
                break
        episode += 1

    t_arr = np.asarray(ts, dtype=np.intp)
    batch = RolloutBatch(
        states=np.asarray(states),
        actions=np.asarray(actions),
        rewards=np.asarray(rewards, dtype=np.float64),
        next_states=np.asarray(next_states),
        dones=np.asarray(dones, dtype=bool),
        t=t_arr,
        episode_id=np.asarray(ep_ids, dtype=np.intp),
        disc_w=env.gamma ** t_arr.astype(np.float64),
        ep_starts=np.asarray(ep_starts, dtype=np.intp),
        init_states=np.asarray(init_states),
        gamma=env.gamma,
    )
    if target_policies:
        for m in sorted(target_policies):
            pol = target_policies[m]
            batch.next_action_ann[m] = pol.sample_batch(batch.next_states, ann_rng)
            batch.init_action_ann[m] = pol.sample_batch(batch.init_states, ann_rng)
    return batch


def to_trajectories(batch: RolloutBatch) -> list[Trajectory]:
    out = []
    for e in range(batch.n_episodes):
        mask = batch.episode_id == e
        trans = [Transition(batch.states[k], batch.actions[k], float(batch.rewards[k]),
                            batch.next_states[k], bool(batch.dones[k]), int(batch.t[k]))
                 for k in np.flatnonzero(mask)]
        out.append(Trajectory(trans, terminal=bool(batch.dones[mask].any())))
    return out


def collect_trajectories(env, policy, n_episodes: int, horizon: int,
                         rng: np.random.Generator) -> list[Trajectory]:
    """Full episodes for evaluation dumps and behavior metrics."""
    batch = collect_rollouts(env, policy, n_episodes * horizon, horizon, rng)
    return to_trajectories(batch)[:n_episodes]
