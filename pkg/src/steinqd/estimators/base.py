"""Common interfaces for the distribution-ratio estimators.

Every estimator targets one ordered pair (i, j) and estimates
zeta_ij(s, a) = rho_i(s, a) / rho_j(s, a). Training data comes as
`PairData`: the j-side batch annotated with member-i actions, i-side
transitions, and initial-state samples. Evaluation happens per transition
through `zeta_view`; estimators that only need (s, a) ignore the
next-state features.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..oracle import exact_occupancy, exact_ratio
from .features import SAFeaturizer

ZETA_LO = 1e-6
ZETA_HI = 1e6


@dataclass
class EvalView:
    """Per-transition arrays an estimator may evaluate on."""
    states: np.ndarray
    actions: np.ndarray
    phi_sa: np.ndarray
    phi_next: np.ndarray | None   # phi(s', a' ~ pi_i), None when unannotated
    disc_w: np.ndarray


@dataclass
class PairData:
    i: int
    j: int
    view_i: EvalView
    view_j: EvalView
    phi_init: np.ndarray          # phi(s0, a0 ~ pi_i) from j-side episodes
    gamma: float


def make_eval_view(feat: SAFeaturizer, batch, member_i: int | None) -> EvalView:
    phi_next = None
    if member_i is not None and member_i in batch.next_action_ann:
        phi_next = feat.phi(batch.next_states, batch.next_action_ann[member_i])
    return EvalView(
        states=batch.states, actions=batch.actions,
        phi_sa=feat.phi(batch.states, batch.actions),
        phi_next=phi_next, disc_w=batch.disc_w)


def make_pair_data(feat: SAFeaturizer, batches, i: int, j: int) -> PairData:
    batch_j = batches[j]
    if i not in batch_j.init_action_ann:
        raise ContractError(f"batch {j} lacks initial-action annotations for member {i}")
    return PairData(
        i=i, j=j,
        view_i=make_eval_view(feat, batches[i], i),
        view_j=make_eval_view(feat, batch_j, i),
        phi_init=feat.phi(batch_j.init_states, batch_j.init_action_ann[i]),
        gamma=batch_j.gamma)


def weighted_indices(rng: np.random.Generator, weights: np.ndarray, size: int) -> np.ndarray:
    """Indices drawn with replacement proportional to `weights`."""
    cum = np.cumsum(weights)
    cum = cum / cum[-1]
    return np.minimum(np.searchsorted(cum, rng.random(size), side="right"), len(weights) - 1)


class PolyakAverage:
    """Exponential average of a network's flat parameters.

    Simultaneous-gradient saddle training oscillates around the solution;
    reading the ratio off averaged iterates is far more stable than the raw
    ones. Evaluation swaps the average in and restores afterwards.
    """

    def __init__(self, net, decay: float = 0.995):
        self.decay = decay
        self.flat = net.get_flat()

    def step(self, net) -> None:
        self.flat = self.decay * self.flat + (1.0 - self.decay) * net.get_flat()

    class _Swapped:
        def __init__(self, net, avg_flat):
            self.net = net
            self.avg_flat = avg_flat

        def __enter__(self):
            self.saved = self.net.get_flat()
            self.net.set_flat(self.avg_flat)
            return self.net

        def __exit__(self, *exc):
            self.net.set_flat(self.saved)
            return False

    def swapped(self, net):
        return PolyakAverage._Swapped(net, self.flat)

    def to_dict(self):
        return {"decay": self.decay, "flat": self.flat.tolist()}

    def load(self, d):
        self.decay = d["decay"]
        self.flat = np.asarray(d["flat"], dtype=np.float64)


class RatioEstimator(abc.ABC):
    """Interface contract: evaluate is non-negative; update is deterministic
    given its rng and inputs."""

    def __init__(self, i: int, j: int):
        self.i = i
        self.j = j

    @abc.abstractmethod
    def update(self, data: PairData, steps: int, rng: np.random.Generator) -> dict:
        """Run `steps` optimization steps; returns diagnostics."""

    @abc.abstractmethod
    def zeta_view(self, view: EvalView) -> np.ndarray:
        """zeta_ij per transition of the view."""

    def state_dict(self) -> dict:
        return {}

    def load_state_dict(self, state: dict) -> None:
        pass


class OracleRatioEstimator(RatioEstimator):
    """Exact tabular ratio; update is a no-op, evaluation recomputes from the
    live policy objects so it always reflects current parameters."""

    method = "oracle"

    def __init__(self, i: int, j: int, mdp, policies):
        if not getattr(mdp, "is_tabular", False):
            raise ContractError("oracle estimator requires a tabular environment")
        super().__init__(i, j)
        self.mdp = mdp
        self.policies = policies

    def update(self, data: PairData, steps: int, rng) -> dict:
        return {}

    def zeta_table(self) -> np.ndarray:
        occ_i = exact_occupancy(self.mdp, self.policies[self.i].probs_table())
        occ_j = exact_occupancy(self.mdp, self.policies[self.j].probs_table())
        return exact_ratio(occ_i, occ_j).zeta

    def zeta_view(self, view: EvalView) -> np.ndarray:
        table = self.zeta_table()
        return table[np.asarray(view.states, dtype=np.intp),
                     np.asarray(view.actions, dtype=np.intp)]
