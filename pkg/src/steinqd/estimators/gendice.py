"""Ratio estimation from the Bellman flow constraint with a chi-squared
variational discriminator and a norm penalty.

    min_theta max_{g,u}  (1-gamma) E_init[g] + gamma E_j[zeta(s,a) g(s',a')]
                         - E_j[zeta(s,a) f*(g(s,a))]
                         + lambda (E_j[u zeta(s,a) - u] - u^2/2)

with f*(y) = y + y^2/4 (conjugate of (u-1)^2). The penalty keeps
E_j[zeta] near 1 and prevents degenerate solutions. zeta has an exponential
head so the estimate stays positive.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from ..nn.adam import AdamState, adam_step
from ..nn.mlp import MlpParams
from .base import (ZETA_HI, EvalView, PairData, PolyakAverage, RatioEstimator,
                   weighted_indices)


def chi2_conjugate(y):
    return y + 0.25 * y * y


def chi2_conjugate_grad(y):
    return 1.0 + 0.5 * y


class GenDiceEstimator(RatioEstimator):
    method = "gendice"

    def __init__(self, i: int, j: int, in_dim: int, hidden, lr: float,
                 minibatch: int, penalty: float, rng: np.random.Generator):
        super().__init__(i, j)
        if not penalty > 0:
            raise ContractError(f"penalty coefficient must be positive, got {penalty}")
        self.zeta_net = MlpParams.create(in_dim, list(hidden), 1, head="exp", rng=rng)
        self.g_net = MlpParams.create(in_dim, list(hidden), 1, head="identity", rng=rng)
        self.zeta_opt = AdamState.create(self.zeta_net.n_params, lr)
        self.g_opt = AdamState.create(self.g_net.n_params, lr)
        self.zeta_avg = PolyakAverage(self.zeta_net)
        self.u = 0.0
        self.u_lr = lr
        self.penalty = penalty
        self.minibatch = minibatch

    def update(self, data: PairData, steps: int, rng: np.random.Generator) -> dict:
        view = data.view_j
        if view.phi_next is None:
            raise ContractError(f"pair ({self.i}, {self.j}): batch lacks a' annotations for member {self.i}")
        gamma = data.gamma
        lam = self.penalty
        b = self.minibatch
        b0 = min(b, len(data.phi_init))
        last = 0.0
        for _ in range(steps):
            idx = weighted_indices(rng, view.disc_w, b)
            i0 = weighted_indices(rng, np.ones(len(data.phi_init)), b0)
            phi_sa = view.phi_sa[idx]
            phi_next = view.phi_next[idx]
            phi_0 = data.phi_init[i0]

            zeta, z_cache = self.zeta_net.forward_cache(phi_sa)
            zeta = zeta[:, 0]
            g_stack = np.concatenate([phi_sa, phi_next, phi_0])
            g_all, g_cache = self.g_net.forward_cache(g_stack)
            g_sa = g_all[:b, 0]
            g_next = g_all[b:2 * b, 0]
            g_0 = g_all[2 * b:, 0]

            fstar = chi2_conjugate(g_sa)
            last = float((1 - gamma) * g_0.mean() + gamma * (zeta * g_next).mean()
                         - (zeta * fstar).mean()
                         + lam * ((self.u * zeta - self.u).mean() - 0.5 * self.u ** 2))

            # zeta descends J
            dzeta = ((gamma * g_next - fstar + lam * self.u) / b)[:, None]
            gz, _ = self.zeta_net.backward(z_cache, zeta[:, None], dzeta)
            # g and u ascend J
            dg = np.zeros((len(g_stack), 1))
            dg[:b, 0] = zeta * chi2_conjugate_grad(g_sa) / b
            dg[b:2 * b, 0] = -gamma * zeta / b
            dg[2 * b:, 0] = -(1.0 - gamma) / b0
            gg, _ = self.g_net.backward(g_cache, g_all, dg)
            du = lam * (zeta.mean() - 1.0 - self.u)

            self.zeta_net.set_flat(adam_step(self.zeta_opt, self.zeta_net.get_flat(), gz))
            self.g_net.set_flat(adam_step(self.g_opt, self.g_net.get_flat(), gg))
            self.zeta_avg.step(self.zeta_net)
            self.u += self.u_lr * du
        return {"gendice_objective": last, "gendice_u": self.u}

    def zeta_view(self, view: EvalView) -> np.ndarray:
        with self.zeta_avg.swapped(self.zeta_net) as net:
            out = net.forward(view.phi_sa)[:, 0]
        return np.minimum(out, ZETA_HI)

    def state_dict(self) -> dict:
        return {"zeta": self.zeta_net.get_flat().tolist(), "g": self.g_net.get_flat().tolist(),
                "zeta_opt": self.zeta_opt.to_dict(), "g_opt": self.g_opt.to_dict(),
                "zeta_avg": self.zeta_avg.to_dict(), "u": self.u}

    def load_state_dict(self, state: dict) -> None:
        self.zeta_net.set_flat(np.asarray(state["zeta"]))
        self.g_net.set_flat(np.asarray(state["g"]))
        self.zeta_opt = AdamState.from_dict(state["zeta_opt"])
        self.g_opt = AdamState.from_dict(state["g_opt"])
        self.zeta_avg.load(state["zeta_avg"])
        self.u = float(state["u"])
