import numpy as np
import pytest

from steinqd.envs import RIGHT, make_deceptive_corridor
from steinqd.errors import ContractError
from steinqd.oracle import empirical_occupancy, exact_occupancy, random_mdp
from steinqd.policies import TabularSoftmaxPolicy
from steinqd.rollouts import collect_rollouts, collect_trajectories, to_trajectories


def right_policy(n_states):
    logits = np.zeros((n_states, 3))
    logits[:, RIGHT] = 60.0  # effectively deterministic
    return TabularSoftmaxPolicy(n_states, 3, logits)


def test_deterministic_rollout_trajectory():
    mdp = make_deceptive_corridor(6, 3)
    batch = collect_rollouts(mdp, right_policy(6), 8, horizon=8, rng=np.random.default_rng(0))
    assert batch.states.tolist() == [0, 1, 2, 3, 4, 5, 5, 5]
    assert batch.actions.tolist() == [RIGHT] * 8
    assert batch.t.tolist() == list(range(8))


def test_transition_count_and_episode_structure():
    mdp = make_deceptive_corridor(6, 3)
    pol = TabularSoftmaxPolicy(6, 3)
    batch = collect_rollouts(mdp, pol, 25, horizon=10, rng=np.random.default_rng(1))
    assert batch.n == 25
    assert batch.n_episodes == 3
    assert batch.ep_starts.tolist() == [0, 10, 20]
    assert np.allclose(batch.disc_w, mdp.gamma ** batch.t)
    # timesteps restart from 0 at each episode boundary
    for e in range(batch.n_episodes):
        ts = batch.t[batch.episode_id == e]
        assert ts.tolist() == list(range(len(ts)))


def test_rollouts_deterministic_given_seed():
    mdp = random_mdp(4, 3, 0.9, np.random.default_rng(7))
    pol = TabularSoftmaxPolicy(4, 3, logits=np.random.default_rng(8).standard_normal((4, 3)))
    b1 = collect_rollouts(mdp, pol, 100, 20, np.random.default_rng(42))
    b2 = collect_rollouts(mdp, pol, 100, 20, np.random.default_rng(42))
    assert np.array_equal(b1.states, b2.states)
    assert np.array_equal(b1.actions, b2.actions)
    assert np.array_equal(b1.rewards, b2.rewards)


def test_annotations_do_not_perturb_trajectories():
    mdp = random_mdp(4, 3, 0.9, np.random.default_rng(9))
    pol = TabularSoftmaxPolicy(4, 3)
    other = TabularSoftmaxPolicy(4, 3, logits=np.random.default_rng(10).standard_normal((4, 3)))
    plain = collect_rollouts(mdp, pol, 200, 50, np.random.default_rng(5))
    annotated = collect_rollouts(mdp, pol, 200, 50, np.random.default_rng(5),
                                 target_policies={0: pol, 1: other},
                                 ann_rng=np.random.default_rng(6))
    assert np.array_equal(plain.states, annotated.states)
    assert np.array_equal(plain.actions, annotated.actions)
    assert set(annotated.next_action_ann) == {0, 1}
    assert len(annotated.next_action_ann[1]) == annotated.n
    assert len(annotated.init_action_ann[1]) == annotated.n_episodes


def test_annotations_require_rng():
    mdp = random_mdp(3, 2, 0.9, np.random.default_rng(11))
    pol = TabularSoftmaxPolicy(3, 2)
    with pytest.raises(ContractError):
        collect_rollouts(mdp, pol, 10, 5, np.random.default_rng(0),
                         target_policies={0: pol})


def test_empirical_occupancy_converges_to_exact():
    # 2-state MDP, total-variation within 0.05 at 1e5 discount-weighted samples
    rng = np.random.default_rng(12)
    mdp = random_mdp(2, 2, 0.9, rng)
    pol = TabularSoftmaxPolicy(2, 2, logits=rng.standard_normal((2, 2)))
    batch = collect_rollouts(mdp, pol, 100_000, horizon=150, rng=np.random.default_rng(13))
    emp = empirical_occupancy(batch.states, batch.actions, batch.disc_w, 2, 2, mdp.gamma)
    exact = exact_occupancy(mdp, pol.probs_table())
    tv = 0.5 * np.abs(emp.rho - exact.rho).sum()
    assert tv < 0.05


def test_trajectory_conversion_and_episode_returns():
    mdp = make_deceptive_corridor(6, 3, gamma=0.9)
    batch = collect_rollouts(mdp, right_policy(6), 20, horizon=10, rng=np.random.default_rng(2))
    trajs = to_trajectories(batch)
    assert len(trajs) == 2
    assert all(tr.transitions[0].t == 0 for tr in trajs)
    dones = [t.done for t in trajs[0].transitions]
    assert sum(dones) == 0  # infinite-horizon env: truncation only

    rets = batch.episode_returns()
    expect = 0.1 * sum(0.9 ** t * batch.rewards[t] for t in range(10))
    assert rets[0] == pytest.approx(expect)


def test_collect_trajectories_counts():
    mdp = make_deceptive_corridor(6, 3)
    trajs = collect_trajectories(mdp, right_policy(6), 3, 12, np.random.default_rng(3))
    assert len(trajs) == 3
    assert all(len(tr.transitions) == 12 for tr in trajs)
