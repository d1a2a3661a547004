"""Ratio estimation through the Donsker-Varadhan representation.

A single network nu is trained by descending

    log E_j[exp(nu(s,a) - gamma nu(s',a'))] - (1 - gamma) E_init[nu(s0, a0)]

using max-subtracted log-mean-exp. The log-ratio is recovered per
transition as nu(s,a) - gamma nu(s',a') up to an additive constant; the
constant is fixed by self-normalization, E_j[zeta] = 1 on a j-side
reference batch kept from the most recent update.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from ..nn.adam import AdamState, adam_step
from ..nn.mlp import MlpParams
from .base import (ZETA_HI, EvalView, PairData, PolyakAverage, RatioEstimator,
                   weighted_indices)


class ValueDiceEstimator(RatioEstimator):
    method = "valuedice"

    def __init__(self, i: int, j: int, in_dim: int, hidden, lr: float,
                 minibatch: int, gamma: float, rng: np.random.Generator):
        super().__init__(i, j)
        self.nu = MlpParams.create(in_dim, list(hidden), 1, head="identity", rng=rng)
        self.nu_opt = AdamState.create(self.nu.n_params, lr)
        self.nu_avg = PolyakAverage(self.nu)
        self.minibatch = minibatch
        self.gamma = gamma
        self._ref = None  # (phi_sa, phi_next, disc_w) from the last j-side data

    def _x_values(self, phi_sa, phi_next, gamma):
        stacked = np.concatenate([phi_sa, phi_next])
        nu_all = self.nu.forward(stacked)[:, 0]
        n = len(phi_sa)
        return nu_all[:n] - gamma * nu_all[n:]

    def update(self, data: PairData, steps: int, rng: np.random.Generator) -> dict:
        view = data.view_j
        if view.phi_next is None:
            raise ContractError(f"pair ({self.i}, {self.j}): batch lacks a' annotations for member {self.i}")
        gamma = data.gamma
        b = self.minibatch
        b0 = min(b, len(data.phi_init))
        self._ref = (view.phi_sa, view.phi_next, view.disc_w)
        last = 0.0
        for _ in range(steps):
            idx = weighted_indices(rng, view.disc_w, b)
            i0 = weighted_indices(rng, np.ones(len(data.phi_init)), b0)
            phi_sa = view.phi_sa[idx]
            phi_next = view.phi_next[idx]
            phi_0 = data.phi_init[i0]

            stacked = np.concatenate([phi_sa, phi_next, phi_0])
            nu_all, cache = self.nu.forward_cache(stacked)
            x = nu_all[:b, 0] - gamma * nu_all[b:2 * b, 0]

            m = x.max()
            e = np.exp(x - m)
            p = e / e.sum()                      # softmax: d log-mean-exp / dx
            last = float(m + np.log(e.mean()) - (1.0 - gamma) * nu_all[2 * b:, 0].mean())

            dnu = np.zeros((len(stacked), 1))
            dnu[:b, 0] = p
            dnu[b:2 * b, 0] = -gamma * p
            dnu[2 * b:, 0] = -(1.0 - gamma) / b0
            gnu, _ = self.nu.backward(cache, nu_all, dnu)
            self.nu.set_flat(adam_step(self.nu_opt, self.nu.get_flat(), gnu))
            self.nu_avg.step(self.nu)
        return {"valuedice_objective": last}

    def _shift(self) -> float:
        """log-domain constant making the reference batch's weighted mean 1."""
        if self._ref is None:
            return 0.0
        phi_sa, phi_next, disc_w = self._ref
        x = self._x_values(phi_sa, phi_next, self.gamma)
        w = disc_w / disc_w.sum()
        m = x.max()
        return -(m + np.log((w * np.exp(x - m)).sum()))

    def zeta_view(self, view: EvalView) -> np.ndarray:
        if view.phi_next is None:
            raise ContractError("ValueDICE evaluation needs next-state annotations")
        with self.nu_avg.swapped(self.nu):
            x = self._x_values(view.phi_sa, view.phi_next, self.gamma)
            shift = self._shift()
        z = np.exp(np.minimum(x + shift, np.log(ZETA_HI)))
        return np.maximum(z, 1e-12)

    def state_dict(self) -> dict:
        ref = None
        if self._ref is not None:
            ref = [a.tolist() for a in self._ref]
        return {"nu": self.nu.get_flat().tolist(), "nu_opt": self.nu_opt.to_dict(),
                "nu_avg": self.nu_avg.to_dict(), "ref": ref}

    def load_state_dict(self, state: dict) -> None:
        self.nu.set_flat(np.asarray(state["nu"]))
        self.nu_opt = AdamState.from_dict(state["nu_opt"])
        self.nu_avg.load(state["nu_avg"])
        if state.get("ref") is not None:
            r = state["ref"]
            self._ref = (np.asarray(r[0]), np.asarray(r[1]), np.asarray(r[2]))
