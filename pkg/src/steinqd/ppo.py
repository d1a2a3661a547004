"""Clipped-surrogate policy optimization and policy-gradient vectors.

`ppo_update` is the full multi-epoch minibatch algorithm used to apply
updates; `policy_gradient_vector` produces the single gradient vectors the
ensemble combination consumes (quality and divergence terms). Both weight
samples by normalized gamma^t so expectations target the discounted
occupancy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .nn.adam import AdamState, adam_step
from .rollouts import RolloutBatch


@dataclass
class PpoConfig:
    clip: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    policy_lr: float = 1e-4
    value_lr: float = 1e-3
    gamma: float = 0.99
    gae_lambda: float = 0.95


def discounted_reward_to_go(batch: RolloutBatch, rewards, gamma: float,
                            bootstrap: np.ndarray | None = None) -> np.ndarray:
    """Per-transition discounted reward-to-go within episodes.

    `bootstrap` (value of next_states) closes truncated episodes; terminal
    transitions (done=True) contribute no tail.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    rtg = np.zeros_like(rewards)
    start_set = set(batch.ep_starts.tolist())
    acc = 0.0
    for k in range(batch.n - 1, -1, -1):
        last_of_episode = (k + 1 in start_set) or (k + 1 == batch.n)
        if last_of_episode:
            tail = 0.0 if batch.dones[k] or bootstrap is None else float(bootstrap[k])
            acc = rewards[k] + gamma * tail
        else:
            acc = rewards[k] + gamma * acc
        rtg[k] = acc
    return rtg


def gae_advantages(batch: RolloutBatch, rewards, v_states, v_next, gamma: float,
                   lam: float, normalize: bool = False) -> np.ndarray:
    """Generalized advantage recursion per episode (raw unless `normalize`)."""
    rewards = np.asarray(rewards, dtype=np.float64)
    not_done = 1.0 - batch.dones.astype(np.float64)
    delta = rewards + gamma * v_next * not_done - v_states
    adv = np.zeros_like(delta)
    start_set = set(batch.ep_starts.tolist())
    acc = 0.0
    for k in range(batch.n - 1, -1, -1):
        if (k + 1 in start_set) or (k + 1 == batch.n):
            acc = delta[k]
        else:
            acc = delta[k] + gamma * lam * acc
        adv[k] = acc
    return normalize_advantages(adv) if normalize else adv


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance; the scale step is skipped for a flat batch."""
    centered = adv - adv.mean()
    std = centered.std()
    if std > 1e-8:
        centered = centered / std
    return centered


def _check_rewards(rewards, source: str):
    bad = np.flatnonzero(~np.isfinite(np.asarray(rewards, dtype=np.float64)))
    if bad.size:
        raise NumericError(f"non-finite reward from {source} at transition {int(bad[0])}")


def clipped_surrogate_upstream(ratio, adv, clip):
    """d min(r A, clip(r) A) / d log pi per sample.

    Equals r*A while the unclipped branch is active (including the interior
    of the clip interval) and 0 once the clipped branch dominates, so
    transitions already past the trust region contribute nothing.
    """
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    return np.where(unclipped <= clipped, unclipped, 0.0)


def ppo_update(policy, value_fn, batch: RolloutBatch, rewards, cfg: PpoConfig,
               update_rng: np.random.Generator,
               policy_opt: AdamState, value_opt: AdamState,
               extra_policy_grad: np.ndarray | None = None,
               self_scale: float = 1.0,
               reward_source: str = "environment") -> dict:
    """Clipped-PPO update of `policy` (and value regression) on `rewards`.

    `extra_policy_grad`, when given, is a frozen loss-space gradient added to
    every policy minibatch step (the ensemble's cross-member term);
    `self_scale` multiplies the batch's own clipped-surrogate gradient.
    """
    _check_rewards(rewards, reward_source)
    v_s = value_fn.values(batch.states)
    v_n = value_fn.values(batch.next_states)
    adv = gae_advantages(batch, rewards, v_s, v_n, cfg.gamma, cfg.gae_lambda)
    adv = normalize_advantages(adv)
    targets = discounted_reward_to_go(batch, rewards, cfg.gamma, bootstrap=v_n)
    logp_old = policy.log_prob(batch.states, batch.actions)

    n = batch.n
    clip_frac = 0.0
    steps = 0
    for _ in range(cfg.epochs):
        perm = update_rng.permutation(n)
        for lo in range(0, n, cfg.minibatch):
            mb = perm[lo:lo + cfg.minibatch]
            w = batch.disc_w[mb]
            w = w / w.sum()

            logp = policy.log_prob(batch.states[mb], batch.actions[mb])
            ratio = np.exp(logp - logp_old[mb])
            upstream = clipped_surrogate_upstream(ratio, adv[mb], cfg.clip)
            dloss_dlogp = -self_scale * w * upstream
            g_pol = policy.logp_backward(batch.states[mb], batch.actions[mb], dloss_dlogp)
            if extra_policy_grad is not None:
                g_pol = g_pol + extra_policy_grad
            policy.set_flat(adam_step(policy_opt, policy.get_flat(), g_pol))

            pred = value_fn.values(batch.states[mb])
            g_val = value_fn.value_backward(batch.states[mb], 2.0 * w * (pred - targets[mb]))
            value_fn.set_flat(adam_step(value_opt, value_fn.get_flat(), g_val))

            clip_frac += float((upstream == 0.0).mean())
            steps += 1

    return {
        "mean_reward": float(np.mean(rewards)),
        "adv_std_raw": float(np.std(gae_advantages(batch, rewards, v_s, v_n, cfg.gamma, cfg.gae_lambda))),
        "clip_fraction": clip_frac / max(steps, 1),
        "value_mse": float(np.mean((value_fn.values(batch.states) - targets) ** 2)),
    }


def policy_gradient_vector(policy, batch: RolloutBatch, rewards,
                           value_fn=None, gamma: float | None = None,
                           lam: float = 1.0, normalize: bool = True) -> np.ndarray:
    """Ascent-direction policy gradient over one batch, as a flat vector.

    With a value function: GAE(lambda) advantages; without: discounted
    reward-to-go. Advantages are normalized per batch by default, matching
    the update path's treatment.
    """
    _check_rewards(rewards, "gradient-vector rewards")
    gamma = batch.gamma if gamma is None else gamma
    if value_fn is None:
        v_s = np.zeros(batch.n)
        v_n = np.zeros(batch.n)
    else:
        v_s = value_fn.values(batch.states)
        v_n = value_fn.values(batch.next_states)
    adv = gae_advantages(batch, rewards, v_s, v_n, gamma, lam)
    if normalize:
        adv = normalize_advantages(adv)
    w = batch.disc_w / batch.disc_w.sum()
    return policy.logp_backward(batch.states, batch.actions, w * adv)
