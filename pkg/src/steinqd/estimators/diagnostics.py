"""Estimator-vs-oracle error measurement on tabular environments."""

from __future__ import annotations

import numpy as np

from ..oracle import exact_occupancy, exact_ratio
from .base import EvalView, RatioEstimator

RHO_FLOOR = 1e-6


def cellwise_log_zeta(estimator: RatioEstimator, view: EvalView, n_states: int,
                      n_actions: int):
    """Per-cell mean of log zeta-hat over a transition view.

    Transition-level estimates (ValueDICE) are averaged in log domain within
    each visited cell; pointwise estimators are constant per cell anyway.
    Returns (table, visited-mask).
    """
    z = np.asarray(estimator.zeta_view(view), dtype=np.float64)
    logz = np.log(np.maximum(z, 1e-300))
    total = np.zeros((n_states, n_actions))
    count = np.zeros((n_states, n_actions))
    s = np.asarray(view.states, dtype=np.intp)
    a = np.asarray(view.actions, dtype=np.intp)
    np.add.at(total, (s, a), logz)
    np.add.at(count, (s, a), 1.0)
    visited = count > 0
    table = np.zeros_like(total)
    table[visited] = total[visited] / count[visited]
    return table, visited


def weighted_log_ratio_error(estimator: RatioEstimator, mdp, policy_i, policy_j,
                             view_j: EvalView) -> float:
    """rho_j-weighted mean |log zeta-hat - log zeta| over supported cells."""
    occ_i = exact_occupancy(mdp, policy_i.probs_table())
    occ_j = exact_occupancy(mdp, policy_j.probs_table())
    zeta_star = exact_ratio(occ_i, occ_j).zeta
    est_log, visited = cellwise_log_zeta(estimator, view_j, mdp.n_states, mdp.n_actions)
    mask = (occ_j.rho > RHO_FLOOR) & visited
    w = occ_j.rho[mask]
    err = np.abs(est_log[mask] - np.log(zeta_star[mask]))
    return float((w * err).sum() / w.sum())
