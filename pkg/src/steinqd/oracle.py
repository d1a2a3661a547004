"""Exact occupancy measures, returns, ratios and f-divergences on tabular MDPs.

Return values follow the normalized convention: occupancy measures carry the
(1 - gamma) factor and sum to one, so the exact return is a plain inner
product with the reward table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .divergences import FDivergenceKind, exact_divergence_tables
from .envs import TabularMDP
from .errors import NumericError, SupportViolationError

FLOW_TOL = 1e-8


@dataclass(frozen=True)
class OccupancyMeasure:
    rho: np.ndarray  # (S, A), non-negative, sums to 1
    gamma: float
    mode: str = "exact"  # "exact" | "empirical"

    def state_marginal(self) -> np.ndarray:
        return self.rho.sum(axis=1)


@dataclass(frozen=True)
class RatioTable:
    zeta: np.ndarray  # (S, A)
    both_zero_is_one: bool = True


def _policy_table(policy, mdp: TabularMDP) -> np.ndarray:
    if isinstance(policy, np.ndarray):
        table = policy
    else:
        table = policy.probs_table()
    table = np.asarray(table, dtype=np.float64)
    if table.shape != (mdp.n_states, mdp.n_actions):
        raise NumericError(f"policy table shape {table.shape} != {(mdp.n_states, mdp.n_actions)}")
    return table


def exact_state_occupancy(mdp: TabularMDP, policy) -> np.ndarray:
    """Solve d = (1 - gamma) mu0 + gamma P_pi^T d by LU factorization."""
    pi = _policy_table(policy, mdp)
    p_pi = np.einsum("sa,sap->sp", pi, mdp.transition)
    a = np.eye(mdp.n_states) - mdp.gamma * p_pi.T
    try:
        d = scipy.linalg.lu_solve(scipy.linalg.lu_factor(a), (1.0 - mdp.gamma) * mdp.mu0)
    except scipy.linalg.LinAlgError as exc:  # cannot occur for gamma < 1; guarded anyway
        raise NumericError(f"occupancy linear system is singular: {exc}") from exc
    if not np.isfinite(d).all():
        raise NumericError("occupancy solve produced non-finite values")
    return d


def exact_occupancy(mdp: TabularMDP, policy) -> OccupancyMeasure:
    pi = _policy_table(policy, mdp)
    d = exact_state_occupancy(mdp, pi)
    return OccupancyMeasure(rho=d[:, None] * pi, gamma=mdp.gamma, mode="exact")


def flow_residual(mdp: TabularMDP, policy, rho: np.ndarray) -> float:
    """Max |rho - flow-operator(rho)| per (s', a') cell; 0 for the exact measure."""
    pi = _policy_table(policy, mdp)
    inflow = np.einsum("sa,sap->p", rho, mdp.transition)
    target = ((1.0 - mdp.gamma) * mdp.mu0 + mdp.gamma * inflow)[:, None] * pi
    return float(np.abs(rho - target).max())


def power_iteration_occupancy(mdp: TabularMDP, policy, n_terms: int = 2000) -> OccupancyMeasure:
    """Truncated sum (1-gamma) sum_t gamma^t mu_t; independent check of the solve."""
    pi = _policy_table(policy, mdp)
    p_pi = np.einsum("sa,sap->sp", pi, mdp.transition)
    mu_t = mdp.mu0.copy()
    d = np.zeros(mdp.n_states)
    scale = 1.0 - mdp.gamma
    for t in range(n_terms):
        d += scale * (mdp.gamma ** t) * mu_t
        mu_t = p_pi.T @ mu_t
    return OccupancyMeasure(rho=d[:, None] * pi, gamma=mdp.gamma, mode="exact")


def exact_return(mdp: TabularMDP, policy) -> float:
    occ = exact_occupancy(mdp, policy)
    return float((occ.rho * mdp.reward).sum())


def exact_values(mdp: TabularMDP, policy):
    """State and state-action values (unnormalized discounted sums)."""
    pi = _policy_table(policy, mdp)
    p_pi = np.einsum("sa,sap->sp", pi, mdp.transition)
    r_pi = (pi * mdp.reward).sum(axis=1)
    v = np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * p_pi, r_pi)
    q = mdp.reward + mdp.gamma * np.einsum("sap,p->sa", mdp.transition, v)
    return v, q


def exact_policy_gradient(mdp: TabularMDP, logits: np.ndarray) -> np.ndarray:
    """Gradient of the normalized return w.r.t. tabular-softmax logits.

    Policy-gradient theorem with the (1-gamma)-normalized occupancy:
    grad[s, b] = sum_a rho(s, a) (delta_ab - pi(b|s)) Q(s, a).
    """
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    pi = e / e.sum(axis=1, keepdims=True)
    occ = exact_occupancy(mdp, pi)
    _, q = exact_values(mdp, pi)
    weighted = occ.rho * q                      # (S, A)
    return weighted - pi * weighted.sum(axis=1, keepdims=True)


def value_iteration(mdp: TabularMDP, tol: float = 1e-10, max_iter: int = 100000):
    """Optimal values and a greedy deterministic policy table."""
    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        q = mdp.reward + mdp.gamma * np.einsum("sap,p->sa", mdp.transition, v)
        v_new = q.max(axis=1)
        if np.abs(v_new - v).max() < tol:
            v = v_new
            break
        v = v_new
    q = mdp.reward + mdp.gamma * np.einsum("sap,p->sa", mdp.transition, v)
    greedy = np.zeros((mdp.n_states, mdp.n_actions))
    greedy[np.arange(mdp.n_states), q.argmax(axis=1)] = 1.0
    return v, greedy


def exact_ratio(rho_i, rho_j) -> RatioTable:
    """Cellwise rho_i / rho_j; 0/0 cells become 1, j-only zeros are an error."""
    ri = rho_i.rho if isinstance(rho_i, OccupancyMeasure) else np.asarray(rho_i, dtype=np.float64)
    rj = rho_j.rho if isinstance(rho_j, OccupancyMeasure) else np.asarray(rho_j, dtype=np.float64)
    if ri.shape != rj.shape:
        raise NumericError(f"occupancy shapes differ: {ri.shape} vs {rj.shape}")
    violations = np.argwhere((rj == 0.0) & (ri > 0.0))
    if violations.size:
        raise SupportViolationError([tuple(map(int, c)) for c in violations])
    zeta = np.ones_like(ri)
    mask = rj > 0.0
    zeta[mask] = ri[mask] / rj[mask]
    return RatioTable(zeta=zeta)


def empirical_occupancy(states, actions, disc_w, n_states: int, n_actions: int,
                        gamma: float) -> OccupancyMeasure:
    """Discount-weighted visitation frequencies from sampled transitions."""
    rho = np.zeros((n_states, n_actions))
    np.add.at(rho, (np.asarray(states, dtype=np.intp), np.asarray(actions, dtype=np.intp)),
              np.asarray(disc_w, dtype=np.float64))
    total = rho.sum()
    if total <= 0:
        raise NumericError("no visitation mass in batch")
    return OccupancyMeasure(rho=rho / total, gamma=gamma, mode="empirical")


def exact_divergence(kind: FDivergenceKind, rho_i, rho_j):
    """Divergence D_f(rho_i, rho_j) by direct summation over S x A."""
    ri = rho_i.rho if isinstance(rho_i, OccupancyMeasure) else np.asarray(rho_i, dtype=np.float64)
    rj = rho_j.rho if isinstance(rho_j, OccupancyMeasure) else np.asarray(rho_j, dtype=np.float64)
    return exact_divergence_tables(kind, ri, rj)


def random_mdp(n_states: int, n_actions: int, gamma: float,
               rng: np.random.Generator, reward_scale: float = 1.0,
               branching: int | None = None) -> TabularMDP:
    """Random MDP with Dirichlet transition rows; used throughout testing.

    `branching` restricts each (s, a) to that many possible successors
    (Garnet-style), giving less stochastic dynamics than the dense default.
    """
    if branching is None or branching >= n_states:
        p = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    else:
        p = np.zeros((n_states, n_actions, n_states))
        for s in range(n_states):
            for a in range(n_actions):
                succ = rng.choice(n_states, size=branching, replace=False)
                p[s, a, succ] = rng.dirichlet(np.ones(branching))
    r = reward_scale * rng.standard_normal((n_states, n_actions))
    mu0 = rng.dirichlet(np.ones(n_states))
    return TabularMDP(p, r, mu0, gamma, metadata={"kind": "random"})
