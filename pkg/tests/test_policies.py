import numpy as np
import pytest

from steinqd.envs import make_deceptive_corridor, make_maze
from steinqd.policies import (LOG_STD_FLOOR, MlpCategoricalPolicy, MlpGaussianPolicy,
                              TabularSoftmaxPolicy, TabularValue, action_distribution,
                              make_policy, make_value_fn)

from helpers import central_diff, rel_err


def test_zero_logits_give_uniform():
    pol = TabularSoftmaxPolicy(4, 3)
    assert np.allclose(pol.action_probs(2), 1.0 / 3.0, atol=1e-15)


def test_probabilities_sum_to_one_random_params():
    rng = np.random.default_rng(0)
    pol = TabularSoftmaxPolicy(5, 4, logits=rng.standard_normal((5, 4)) * 3)
    table = pol.probs_table()
    assert np.abs(table.sum(axis=1) - 1.0).max() < 1e-12
    assert (table > 0).all()

    mlp = MlpCategoricalPolicy(5, 4, [16], rng)
    mlp.set_flat(rng.standard_normal(mlp.n_params) * 0.5)
    table = mlp.probs_table()
    assert np.abs(table.sum(axis=1) - 1.0).max() < 1e-12


@pytest.mark.parametrize("kind", ["tabular", "mlp-cat", "mlp-gauss"])
def test_log_density_gradient_matches_finite_differences(kind):
    rng = np.random.default_rng(1)
    if kind == "tabular":
        pol = TabularSoftmaxPolicy(4, 3, logits=rng.standard_normal((4, 3)))
        states = rng.integers(0, 4, size=12)
        actions = rng.integers(0, 3, size=12)
    elif kind == "mlp-cat":
        pol = MlpCategoricalPolicy(4, 3, [8], rng)
        pol.set_flat(rng.standard_normal(pol.n_params) * 0.3)
        states = rng.integers(0, 4, size=12)
        actions = rng.integers(0, 3, size=12)
    else:
        pol = MlpGaussianPolicy(2, 2, [8], rng)
        pol.set_flat(np.concatenate([rng.standard_normal(pol.net.n_params) * 0.3,
                                     [-0.5, -0.2]]))
        states = rng.standard_normal((12, 2))
        actions = rng.standard_normal((12, 2))
    coeffs = rng.standard_normal(12)
    flat0 = pol.get_flat()

    def f(flat):
        pol.set_flat(flat)
        return float((coeffs * pol.log_prob(states, actions)).sum())

    g = pol.logp_backward(states, actions, coeffs)
    pol.set_flat(flat0)
    fd = central_diff(f, flat0)
    pol.set_flat(flat0)
    mask = (np.abs(fd) > 1e-6) | (np.abs(g) > 1e-6)
    assert rel_err(g[mask], fd[mask]).max() < 1e-4


def test_sampling_frequencies_match_distribution():
    rng = np.random.default_rng(2)
    pol = TabularSoftmaxPolicy(2, 3, logits=np.array([[1.0, 0.0, -1.0], [0.0, 0.0, 0.0]]))
    n = 40_000
    actions = pol.sample_batch(np.zeros(n, dtype=np.intp), rng)
    freq = np.bincount(actions, minlength=3) / n
    probs = pol.action_probs(0)
    sigma = np.sqrt(probs * (1 - probs) / n)
    assert (np.abs(freq - probs) < 4 * sigma).all()


def test_gaussian_std_floor_and_gradient_mask():
    rng = np.random.default_rng(3)
    pol = MlpGaussianPolicy(2, 2, [8], rng)
    pol.log_std[...] = [LOG_STD_FLOOR - 1.0, 0.0]
    _, std = pol.mean_std(np.zeros(2))
    assert std[0] == pytest.approx(0.05)
    states = rng.standard_normal((6, 2))
    actions = rng.standard_normal((6, 2))
    g = pol.logp_backward(states, actions, np.ones(6))
    dlogstd = g[pol.net.n_params:]
    assert dlogstd[0] == 0.0  # floored entry stops responding
    assert dlogstd[1] != 0.0


def test_action_distribution_dispatch():
    rng = np.random.default_rng(4)
    tab = TabularSoftmaxPolicy(3, 2)
    assert action_distribution(tab, 1) == pytest.approx([0.5, 0.5])
    gauss = MlpGaussianPolicy(2, 2, [8], rng)
    mean, std = action_distribution(gauss, np.zeros(2))
    assert mean.shape == (2,) and std.shape == (2,)


def test_make_policy_and_value_fn_for_envs():
    rng = np.random.default_rng(5)
    corridor = make_deceptive_corridor(6, 3)
    pol = make_policy(corridor, "auto", [64, 64], rng)
    assert pol.kind == "tabular-softmax"
    val = make_value_fn(corridor, [64, 64], rng)
    assert isinstance(val, TabularValue)

    maze = make_maze({"grid": ["G.", ".S"]})
    pol = make_policy(maze, "auto", [64, 64], rng)
    assert pol.kind == "mlp-gaussian"
    # observation normalization keeps features within [-1, 1]
    feats = pol._features(np.array([[2.0, 2.0], [0.0, 0.0]]))
    assert np.abs(feats).max() <= 1.0 + 1e-12


def test_value_backward_matches_finite_differences():
    rng = np.random.default_rng(6)
    val = make_value_fn(make_maze({"grid": ["G.", ".S"]}), [8], rng)
    val.set_flat(rng.standard_normal(val.n_params) * 0.3)
    states = rng.standard_normal((7, 2))
    upstream = rng.standard_normal(7)
    flat0 = val.get_flat()

    def f(flat):
        val.set_flat(flat)
        return float((upstream * val.values(states)).sum())

    g = val.value_backward(states, upstream)
    val.set_flat(flat0)
    fd = central_diff(f, flat0)
    val.set_flat(flat0)
    mask = (np.abs(fd) > 1e-6) | (np.abs(g) > 1e-6)
    assert rel_err(g[mask], fd[mask]).max() < 1e-4
