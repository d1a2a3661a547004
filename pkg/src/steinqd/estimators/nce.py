"""Noise-contrastive stationary-density models.

One positive density model per ensemble member, shared across every pair
involving it. Member i's model trains against the binary-classification
objective with its own batch as data and the pooled other-member batches as
noise; the noise density term is the uniform mixture of the other members'
current models. Ratios are plain quotients of two models.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from ..nn.adam import AdamState, adam_step
from ..nn.mlp import MlpParams
from .base import ZETA_HI, ZETA_LO, EvalView, PairData, RatioEstimator, weighted_indices


class NceFamily:
    def __init__(self, n_members: int, in_dim: int, hidden, lr: float,
                 rng: np.random.Generator):
        if n_members < 2:
            raise ContractError("NCE noise mixture needs an ensemble of size >= 2")
        self.n = n_members
        self.models = [MlpParams.create(in_dim, list(hidden), 1, head="exp", rng=rng)
                       for _ in range(n_members)]
        self.opts = [AdamState.create(m.n_params, lr) for m in self.models]

    def density(self, member: int, phi: np.ndarray) -> np.ndarray:
        return self.models[member].forward(phi)[:, 0]

    def noise_density(self, member: int, phi: np.ndarray) -> np.ndarray:
        others = [m for m in range(self.n) if m != member]
        acc = np.zeros(len(phi))
        for m in others:
            acc += self.density(m, phi)
        return acc / len(others)

    def update(self, views: list[EvalView], steps: int, minibatch: int,
               rng: np.random.Generator) -> dict:
        """One ascent pass per member, in index order (noise models update
        within the sweep, Gauss-Seidel style)."""
        if len(views) != self.n:
            raise ContractError(f"expected {self.n} member views, got {len(views)}")
        losses = []
        for i in range(self.n):
            data_phi = views[i].phi_sa
            data_w = views[i].disc_w
            noise_parts = [views[m] for m in range(self.n) if m != i]
            noise_phi = np.concatenate([v.phi_sa for v in noise_parts])
            # each other member contributes equal total noise mass
            noise_w = np.concatenate([v.disc_w / v.disc_w.sum() for v in noise_parts])

            model, opt = self.models[i], self.opts[i]
            last = 0.0
            for _ in range(steps):
                d_idx = weighted_indices(rng, data_w, minibatch)
                n_idx = weighted_indices(rng, noise_w, minibatch)
                xd, xn = data_phi[d_idx], noise_phi[n_idx]
                x = np.concatenate([xd, xn])
                rho, cache = model.forward_cache(x)
                rho = rho[:, 0]
                p_noise = self.noise_density(i, x)
                frac = rho / (rho + p_noise)
                # d objective / d log rho: (1 - frac) on data, -frac on noise
                dlogr = np.empty(2 * minibatch)
                dlogr[:minibatch] = (1.0 - frac[:minibatch]) / minibatch
                dlogr[minibatch:] = -frac[minibatch:] / minibatch
                last = float(np.log(frac[:minibatch]).mean()
                             + np.log(1.0 - frac[minibatch:] + 1e-300).mean())
                # dL/drho = dL/dlogrho / rho; the exp-head backward supplies
                # the remaining rho factor
                gflat, _ = model.backward(cache, rho[:, None], -dlogr[:, None] / rho[:, None])
                model.set_flat(adam_step(opt, model.get_flat(), gflat))
            losses.append(last)
        return {"nce_objective": losses}

    def state_dict(self) -> dict:
        return {"models": [m.get_flat().tolist() for m in self.models],
                "opts": [o.to_dict() for o in self.opts]}

    def load_state_dict(self, state: dict) -> None:
        for m, flat in zip(self.models, state["models"]):
            m.set_flat(np.asarray(flat))
        self.opts = [AdamState.from_dict(d) for d in state["opts"]]


class NcePairEstimator(RatioEstimator):
    """Pair view over the shared family: zeta_ij = rho_i / rho_j."""

    method = "nce"

    def __init__(self, i: int, j: int, family: NceFamily):
        super().__init__(i, j)
        self.family = family

    def update(self, data: PairData, steps: int, rng) -> dict:
        # the family is trained once per iteration by the trainer
        return {}

    def zeta_view(self, view: EvalView) -> np.ndarray:
        num = self.family.density(self.i, view.phi_sa)
        den = self.family.density(self.j, view.phi_sa)
        return np.clip(num / den, ZETA_LO, ZETA_HI)
