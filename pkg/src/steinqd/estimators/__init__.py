"""Interchangeable estimators of the stationary-distribution ratio."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .base import (EvalView, OracleRatioEstimator, PairData, RatioEstimator,
                   make_eval_view, make_pair_data, weighted_indices)
from .dualdice import DualDiceEstimator
from .features import SAFeaturizer
from .gendice import GenDiceEstimator
from .nce import NceFamily, NcePairEstimator
from .valuedice import ValueDiceEstimator

ESTIMATOR_KINDS = ("oracle", "nce", "dualdice", "valuedice", "gendice")


def build_estimators(kind: str, n_members: int, env, policies, feat: SAFeaturizer,
                     hidden, lr: float, minibatch: int, gendice_penalty: float,
                     rng: np.random.Generator):
    """All n(n-1) ordered-pair estimators, plus the shared NCE family if any.

    Returns (pair_map, nce_family_or_None). Construction order is fixed so
    parameter initialization is reproducible.
    """
    if kind not in ESTIMATOR_KINDS:
        raise ConfigError(f"unknown estimator kind {kind!r}")
    pairs = [(i, j) for i in range(n_members) for j in range(n_members) if i != j]
    family = None
    if kind == "nce" and n_members >= 2:
        family = NceFamily(n_members, feat.dim, hidden, lr, rng)
    est = {}
    for (i, j) in pairs:
        if kind == "oracle":
            est[(i, j)] = OracleRatioEstimator(i, j, env, policies)
        elif kind == "nce":
            est[(i, j)] = NcePairEstimator(i, j, family)
        elif kind == "dualdice":
            est[(i, j)] = DualDiceEstimator(i, j, feat.dim, hidden, lr, minibatch, rng)
        elif kind == "valuedice":
            est[(i, j)] = ValueDiceEstimator(i, j, feat.dim, hidden, lr, minibatch,
                                             env.gamma, rng)
        else:
            est[(i, j)] = GenDiceEstimator(i, j, feat.dim, hidden, lr, minibatch,
                                           gendice_penalty, rng)
    return est, family


__all__ = [
    "EvalView", "PairData", "RatioEstimator", "OracleRatioEstimator",
    "DualDiceEstimator", "ValueDiceEstimator", "GenDiceEstimator",
    "NceFamily", "NcePairEstimator", "SAFeaturizer",
    "make_eval_view", "make_pair_data", "weighted_indices",
    "build_estimators", "ESTIMATOR_KINDS",
]
