"""Min-max ratio estimation via the quadratic Fenchel conjugate.

Objective over j-side transitions annotated with i-actions:

    min_nu max_g  E_j[(nu(s,a) - gamma nu(s',a')) g(s,a) - g(s,a)^2 / 2]
                  - (1 - gamma) E_init[nu(s0, a0)]

Both sides take simultaneous Adam steps with the same learning rate. The
ratio is read from the g head, clamped positive.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from ..nn.adam import AdamState, adam_step
from ..nn.mlp import MlpParams
from .base import (ZETA_HI, ZETA_LO, EvalView, PairData, PolyakAverage,
                   RatioEstimator, weighted_indices)


class DualDiceEstimator(RatioEstimator):
    method = "dualdice"

    def __init__(self, i: int, j: int, in_dim: int, hidden, lr: float,
                 minibatch: int, rng: np.random.Generator):
        super().__init__(i, j)
        self.nu = MlpParams.create(in_dim, list(hidden), 1, head="identity", rng=rng)
        # g carries the ratio estimate; bias 1 starts it at zeta = 1
        self.g = MlpParams.create(in_dim, list(hidden), 1, head="identity", rng=rng, out_bias=1.0)
        self.nu_opt = AdamState.create(self.nu.n_params, lr)
        self.g_opt = AdamState.create(self.g.n_params, lr)
        self.g_avg = PolyakAverage(self.g)
        self.minibatch = minibatch

    def update(self, data: PairData, steps: int, rng: np.random.Generator) -> dict:
        view = data.view_j
        if view.phi_next is None:
            raise ContractError(f"pair ({self.i}, {self.j}): batch lacks a' annotations for member {self.i}")
        gamma = data.gamma
        b = self.minibatch
        b0 = min(b, len(data.phi_init))
        last = 0.0
        for _ in range(steps):
            idx = weighted_indices(rng, view.disc_w, b)
            i0 = weighted_indices(rng, np.ones(len(data.phi_init)), b0)
            phi_sa = view.phi_sa[idx]
            phi_next = view.phi_next[idx]
            phi_0 = data.phi_init[i0]

            stacked = np.concatenate([phi_sa, phi_next, phi_0])
            nu_all, nu_cache = self.nu.forward_cache(stacked)
            nu_sa = nu_all[:b, 0]
            nu_next = nu_all[b:2 * b, 0]
            g_sa, g_cache = self.g.forward_cache(phi_sa)
            g_sa = g_sa[:, 0]

            x = nu_sa - gamma * nu_next
            last = float(np.mean(x * g_sa - 0.5 * g_sa ** 2)
                         - (1.0 - gamma) * np.mean(nu_all[2 * b:, 0]))

            # nu descends J; gradients flow through all three evaluation slots
            dnu = np.zeros((len(stacked), 1))
            dnu[:b, 0] = g_sa / b
            dnu[b:2 * b, 0] = -gamma * g_sa / b
            dnu[2 * b:, 0] = -(1.0 - gamma) / b0
            gnu, _ = self.nu.backward(nu_cache, nu_all, dnu)
            # g ascends J
            dg = -((x - g_sa) / b)[:, None]
            gg, _ = self.g.backward(g_cache, g_sa[:, None], dg)

            self.nu.set_flat(adam_step(self.nu_opt, self.nu.get_flat(), gnu))
            self.g.set_flat(adam_step(self.g_opt, self.g.get_flat(), gg))
            self.g_avg.step(self.g)
        return {"dualdice_objective": last}

    def zeta_view(self, view: EvalView) -> np.ndarray:
        with self.g_avg.swapped(self.g) as g:
            out = g.forward(view.phi_sa)[:, 0]
        return np.clip(out, ZETA_LO, ZETA_HI)

    def state_dict(self) -> dict:
        return {"nu": self.nu.get_flat().tolist(), "g": self.g.get_flat().tolist(),
                "nu_opt": self.nu_opt.to_dict(), "g_opt": self.g_opt.to_dict(),
                "g_avg": self.g_avg.to_dict()}

    def load_state_dict(self, state: dict) -> None:
        self.nu.set_flat(np.asarray(state["nu"]))
        self.g.set_flat(np.asarray(state["g"]))
        self.nu_opt = AdamState.from_dict(state["nu_opt"])
        self.g_opt = AdamState.from_dict(state["g_opt"])
        self.g_avg.load(state["g_avg"])
