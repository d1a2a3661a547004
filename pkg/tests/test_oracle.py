import numpy as np
import pytest

from steinqd.divergences import FDivergenceKind, generator_f
from steinqd.envs import TabularMDP, make_deceptive_corridor, zero_reward
from steinqd.errors import SupportViolationError
from steinqd.oracle import (OccupancyMeasure, empirical_occupancy, exact_divergence,
                            exact_occupancy, exact_policy_gradient, exact_ratio,
                            exact_return, exact_values, flow_residual,
                            power_iteration_occupancy, random_mdp)

from helpers import central_diff, rel_err

ALL_KINDS = list(FDivergenceKind)


def softmax_table(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def uniform_policy(mdp):
    return np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)


def test_single_state_single_action():
    mdp = TabularMDP(np.ones((1, 1, 1)), np.zeros((1, 1)), np.ones(1), 0.9)
    occ = exact_occupancy(mdp, np.ones((1, 1)))
    assert occ.rho[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_two_state_chain_geometric_masses():
    # A -> B, B absorbing, start at A, gamma 0.9: d(A) = 1 - gamma, d(B) = gamma
    p = np.zeros((2, 1, 2))
    p[0, 0, 1] = 1.0
    p[1, 0, 1] = 1.0
    mdp = TabularMDP(p, np.zeros((2, 1)), np.array([1.0, 0.0]), 0.9)
    occ = exact_occupancy(mdp, np.ones((2, 1)))
    assert occ.state_marginal() == pytest.approx([0.1, 0.9], abs=1e-12)


def test_occupancy_matches_power_iteration():
    rng = np.random.default_rng(0)
    mdp = random_mdp(5, 3, 0.9, rng)
    pol = rng.dirichlet(np.ones(3), size=5)
    occ = exact_occupancy(mdp, pol)
    trunc = power_iteration_occupancy(mdp, pol, n_terms=2000)
    assert np.abs(occ.rho - trunc.rho).max() < 1e-6


def test_occupancy_satisfies_flow_constraint():
    rng = np.random.default_rng(1)
    for _ in range(5):
        mdp = random_mdp(6, 2, 0.95, rng)
        pol = rng.dirichlet(np.ones(2), size=6)
        occ = exact_occupancy(mdp, pol)
        assert flow_residual(mdp, pol, occ.rho) < 1e-8
        assert occ.rho.sum() == pytest.approx(1.0, abs=1e-8)
        assert (occ.rho >= 0).all()


def test_exact_return_zero_and_constant_reward():
    rng = np.random.default_rng(2)
    mdp = random_mdp(4, 2, 0.9, rng)
    pol = uniform_policy(mdp)
    assert exact_return(zero_reward(mdp), pol) == 0.0
    const = TabularMDP(mdp.transition, np.full((4, 2), 3.7), mdp.mu0, mdp.gamma)
    assert exact_return(const, pol) == pytest.approx(3.7, abs=1e-10)


def test_exact_return_matches_vectorized_monte_carlo():
    rng = np.random.default_rng(3)
    mdp = random_mdp(4, 3, 0.9, rng)
    pol = rng.dirichlet(np.ones(3), size=4)
    target = exact_return(mdp, pol)

    n_ep, horizon = 100_000, 150
    cum_p = np.cumsum(mdp.transition, axis=2)
    cum_pi = np.cumsum(pol, axis=1)
    states = (rng.random(n_ep)[:, None] > np.cumsum(mdp.mu0)[None, :]).sum(axis=1)
    returns = np.zeros(n_ep)
    for t in range(horizon):
        actions = (rng.random(n_ep)[:, None] > cum_pi[states]).sum(axis=1)
        returns += (mdp.gamma ** t) * mdp.reward[states, actions]
        states = (rng.random(n_ep)[:, None] > cum_p[states, actions]).sum(axis=1)
    est = (1 - mdp.gamma) * returns
    se = est.std(ddof=1) / np.sqrt(n_ep)
    assert abs(est.mean() - target) < 3 * se + 1e-4


def test_exact_values_bellman_consistency():
    rng = np.random.default_rng(4)
    mdp = random_mdp(5, 2, 0.9, rng)
    pol = rng.dirichlet(np.ones(2), size=5)
    v, q = exact_values(mdp, pol)
    assert np.allclose(v, (pol * q).sum(axis=1), atol=1e-10)
    # return identity: eta = (1-gamma) mu0 . v
    assert exact_return(mdp, pol) == pytest.approx(
        (1 - mdp.gamma) * float(mdp.mu0 @ v), abs=1e-10)


def test_exact_ratio_identical_measures():
    rng = np.random.default_rng(5)
    mdp = random_mdp(4, 2, 0.9, rng)
    occ = exact_occupancy(mdp, uniform_policy(mdp))
    assert np.allclose(exact_ratio(occ, occ).zeta, 1.0, atol=1e-12)


def test_exact_ratio_half_support():
    rj = np.full((2, 2), 0.25)
    ri = np.array([[0.5, 0.5], [0.0, 0.0]])
    zeta = exact_ratio(ri, rj).zeta
    assert set(np.unique(zeta)) == {0.0, 2.0}


def test_exact_ratio_expectation_is_one():
    rng = np.random.default_rng(6)
    mdp = random_mdp(6, 3, 0.95, rng)
    occ_i = exact_occupancy(mdp, rng.dirichlet(np.ones(3), size=6))
    occ_j = exact_occupancy(mdp, rng.dirichlet(np.ones(3), size=6))
    zeta = exact_ratio(occ_i, occ_j).zeta
    assert float((occ_j.rho * zeta).sum()) == pytest.approx(1.0, abs=1e-10)


def test_exact_ratio_support_violation_lists_cells():
    rj = np.array([[0.5, 0.5], [0.0, 0.0]])
    ri = np.array([[0.25, 0.25], [0.25, 0.25]])
    with pytest.raises(SupportViolationError) as exc:
        exact_ratio(ri, rj)
    assert (1, 0) in exc.value.cells and (1, 1) in exc.value.cells


def test_zero_over_zero_cells_default_to_one():
    rj = np.array([[1.0, 0.0]])
    ri = np.array([[1.0, 0.0]])
    assert exact_ratio(ri, rj).zeta[0, 1] == 1.0


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_divergence_zero_on_identical(kind):
    rng = np.random.default_rng(7)
    p = rng.dirichlet(np.ones(8))
    d = exact_divergence(kind, p, p)
    assert not d.infinite
    assert d.value == pytest.approx(0.0, abs=1e-12)


def test_js_disjoint_support_is_log2():
    p = np.array([0.5, 0.5, 0.0, 0.0])
    q = np.array([0.0, 0.0, 0.5, 0.5])
    assert exact_divergence(FDivergenceKind.JS, p, q).value == pytest.approx(np.log(2), abs=1e-12)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_divergence_matches_generator_route(kind):
    rng = np.random.default_rng(8)
    p = rng.dirichlet(np.ones(10))
    q = rng.dirichlet(np.ones(10))
    via_generator = float((q * generator_f(kind, p / q)).sum())
    assert exact_divergence(kind, p, q).value == pytest.approx(via_generator, abs=1e-10)


@pytest.mark.parametrize("kind", [FDivergenceKind.JS, FDivergenceKind.TRIANGULAR,
                                  FDivergenceKind.SQ_HELLINGER,
                                  FDivergenceKind.TOTAL_VARIATION,
                                  FDivergenceKind.SYMMETRIC_KL])
def test_symmetric_kinds(kind):
    rng = np.random.default_rng(9)
    p = rng.dirichlet(np.ones(7))
    q = rng.dirichlet(np.ones(7))
    assert exact_divergence(kind, p, q).value == pytest.approx(
        exact_divergence(kind, q, p).value, abs=1e-12)


def test_kl_reverse_kl_duality_and_infinite_flag():
    rng = np.random.default_rng(10)
    p = rng.dirichlet(np.ones(5))
    q = rng.dirichlet(np.ones(5))
    assert exact_divergence(FDivergenceKind.KL, p, q).value == pytest.approx(
        exact_divergence(FDivergenceKind.REVERSE_KL, q, p).value, abs=1e-14)
    q2 = q.copy(); q2[0] = 0.0; q2 /= q2.sum()
    assert exact_divergence(FDivergenceKind.KL, p, q2).infinite
    assert exact_divergence(FDivergenceKind.REVERSE_KL, q2, p).infinite
    assert exact_divergence(FDivergenceKind.SYMMETRIC_KL, p, q2).infinite


def test_divergence_nonnegative_random_pairs():
    rng = np.random.default_rng(11)
    for _ in range(20):
        p = rng.dirichlet(np.ones(6))
        q = rng.dirichlet(np.ones(6))
        for kind in ALL_KINDS:
            d = exact_divergence(kind, p, q)
            assert d.infinite or d.value >= 0.0


def test_js_integral_equals_zeta_form():
    rng = np.random.default_rng(12)
    mdp = random_mdp(5, 2, 0.9, rng)
    occ_i = exact_occupancy(mdp, rng.dirichlet(np.ones(2), size=5))
    occ_j = exact_occupancy(mdp, rng.dirichlet(np.ones(2), size=5))
    zeta = exact_ratio(occ_i, occ_j).zeta
    zform = (0.5 * (occ_i.rho * np.log(zeta / (1 + zeta))).sum()
             + 0.5 * (occ_j.rho * np.log(1 / (1 + zeta))).sum() + np.log(2))
    assert exact_divergence(FDivergenceKind.JS, occ_i.rho, occ_j.rho).value == pytest.approx(
        zform, abs=1e-10)
    kls_zform = float((occ_i.rho * np.log(zeta)).sum() - (occ_j.rho * np.log(zeta)).sum())
    assert exact_divergence(FDivergenceKind.SYMMETRIC_KL, occ_i.rho, occ_j.rho).value == \
        pytest.approx(kls_zform, abs=1e-10)


def test_exact_policy_gradient_matches_finite_differences():
    rng = np.random.default_rng(13)
    mdp = random_mdp(3, 3, 0.9, rng)
    logits = rng.standard_normal((3, 3)) * 0.5

    def f(flat):
        return exact_return(mdp, softmax_table(flat.reshape(3, 3)))

    g = exact_policy_gradient(mdp, logits)
    fd = central_diff(f, logits.ravel(), step=1e-6).reshape(3, 3)
    assert rel_err(g, fd, floor=1e-7).max() < 1e-4


def test_empirical_occupancy_normalizes():
    occ = empirical_occupancy([0, 0, 1], [1, 0, 1], [1.0, 0.5, 0.25], 2, 2, 0.9)
    assert isinstance(occ, OccupancyMeasure)
    assert occ.rho.sum() == pytest.approx(1.0)
    assert occ.mode == "empirical"


def test_corridor_return_agrees_with_oracle_modules():
    mdp = make_deceptive_corridor(12, 6, action_penalty=0.1, gamma=0.99)
    right = np.zeros((12, 3)); right[:, 2] = 1.0
    occ = exact_occupancy(mdp, right)
    assert exact_return(mdp, right) == pytest.approx(float((occ.rho * mdp.reward).sum()))
