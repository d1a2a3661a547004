import numpy as np
import pytest

from steinqd.envs import (LEFT, RIGHT, STAY, ContinuousMaze, TabularMDP, load_grid_spec,
                          make_deceptive_corridor, make_gridmaze, make_maze, zero_reward)
from steinqd.errors import ConfigError, DomainError
from steinqd.oracle import exact_return, value_iteration


def test_row_stochastic_validation():
    p = np.ones((2, 1, 2)) * 0.4  # rows sum to 0.8
    with pytest.raises(ConfigError):
        TabularMDP(p, np.zeros((2, 1)), np.array([1.0, 0.0]), 0.9)


def test_invalid_state_action_rejected():
    mdp = make_deceptive_corridor(5, 2)
    rng = np.random.default_rng(0)
    with pytest.raises(DomainError):
        mdp.step(99, 0, rng)
    with pytest.raises(DomainError):
        mdp.step(0, 7, rng)


def test_deterministic_transition_sampling():
    mdp = make_deceptive_corridor(6, 3)
    rng = np.random.default_rng(1)
    nxt, r, done = mdp.step(2, RIGHT, rng)
    assert (nxt, done) == (3, False)
    assert mdp.step(0, LEFT, rng)[0] == 0  # wall clamp


def test_stochastic_row_frequencies_within_3_sigma():
    rng = np.random.default_rng(2)
    row = np.array([0.5, 0.2, 0.25, 0.05])
    p = np.broadcast_to(row, (4, 1, 4)).copy()
    mdp = TabularMDP(p, np.zeros((4, 1)), np.array([1.0, 0, 0, 0]), 0.9)
    n = 100_000
    counts = np.zeros(4)
    for _ in range(n):
        counts[mdp.step(0, 0, rng)[0]] += 1
    freq = counts / n
    sigma = np.sqrt(row * (1 - row) / n)
    assert (np.abs(freq - row) <= 3 * sigma + 1e-12).all()


def test_corridor_requires_interior_threshold():
    with pytest.raises(ConfigError):
        make_deceptive_corridor(10, 0)
    with pytest.raises(ConfigError):
        make_deceptive_corridor(10, 10)


def test_corridor_stay_policy_returns_zero():
    mdp = make_deceptive_corridor(10, 5, action_penalty=0.1, gamma=0.99)
    stay = np.zeros((10, 3))
    stay[:, STAY] = 1.0
    assert exact_return(mdp, stay) == pytest.approx(0.0, abs=1e-12)


def test_corridor_always_right_matches_geometric_hand_sum():
    length, d, pen, gamma = 10, 5, 0.1, 0.99
    mdp = make_deceptive_corridor(length, d, action_penalty=pen, gamma=gamma)
    right = np.zeros((length, 3))
    right[:, RIGHT] = 1.0
    # states below d pay the penalty for the first d steps; from step d on the
    # agent sits in the reward zone (self-looping at the right edge)
    hand = -pen * (1 - gamma ** d) + (1.0 - pen) * gamma ** d
    assert exact_return(mdp, right) == pytest.approx(hand, abs=1e-10)
    assert exact_return(mdp, right) > 0.5


def test_corridor_greedy_lookahead_is_trapped():
    mdp = make_deceptive_corridor(10, 5)
    # one-step lookahead from zero values: reward alone; stay (0) beats moving (-0.1)
    greedy_actions = mdp.reward.argmax(axis=1)
    assert greedy_actions[0] == STAY
    greedy = np.zeros((10, 3))
    greedy[np.arange(10), greedy_actions] = 1.0
    assert exact_return(mdp, greedy) == pytest.approx(0.0, abs=1e-12)


def test_corridor_has_two_return_local_optima():
    mdp = make_deceptive_corridor(10, 5)
    stay = np.zeros((10, 3)); stay[:, STAY] = 1.0
    right = np.zeros((10, 3)); right[:, RIGHT] = 1.0
    r_stay, r_right = exact_return(mdp, stay), exact_return(mdp, right)
    assert r_right > r_stay
    # stay is locally optimal: blending a little motion into it only hurts
    for eps in (0.001, 0.005, 0.01):
        blend = (1 - eps) * stay + eps * right
        assert exact_return(mdp, blend) < r_stay


def test_gridmaze_1x1_self_loops():
    mdp = make_gridmaze({"grid": ["S"], "gamma": 0.9})
    assert mdp.n_states == 1 and mdp.n_actions == 4
    assert (mdp.transition[0, :, 0] == 1.0).all()


def test_gridmaze_3x3_construction():
    mdp = make_gridmaze({"grid": ["...", ".G.", "S.."], "gamma": 0.95})
    assert mdp.n_states == 9
    assert mdp.n_actions == 4
    assert not mdp.metadata["warnings"]


def test_gridmaze_optimal_policy_follows_shortest_path():
    mdp = make_gridmaze({"grid": ["...", ".G.", "S.."], "gamma": 0.95})
    _, greedy = value_iteration(mdp)
    cells = mdp.metadata["cells"]
    idx = {c: k for k, c in enumerate(cells)}
    s = idx[mdp.metadata["start"]]
    goal = idx[mdp.metadata["goal"]]
    rng = np.random.default_rng(0)
    steps = 0
    while s != goal and steps < 10:
        s, _, _ = mdp.step(s, int(greedy[s].argmax()), rng)
        steps += 1
    assert steps == 2  # manhattan shortest path from corner start to center


def test_gridmaze_unreachable_goal_warns():
    mdp = make_gridmaze({"grid": ["S#G"], "gamma": 0.9})
    assert any("unreachable" in w for w in mdp.metadata["warnings"])


def test_zero_reward_wrapper():
    mdp = make_deceptive_corridor(8, 4)
    wrapped = zero_reward(mdp)
    rng = np.random.default_rng(3)
    assert wrapped.step(5, RIGHT, rng)[1] == 0.0
    right = np.zeros((8, 3)); right[:, RIGHT] = 1.0
    assert exact_return(wrapped, right) == 0.0


def test_zero_reward_preserves_dynamics_bit_exactly():
    mdp = make_gridmaze({"grid": ["..G", "S.."], "gamma": 0.9})
    wrapped = zero_reward(mdp)
    r1 = np.random.default_rng(11)
    r2 = np.random.default_rng(11)
    s1, s2 = mdp.reset(r1), wrapped.reset(r2)
    for _ in range(50):
        a = s1 % 4
        s1, _, _ = mdp.step(s1, a, r1)
        s2, _, _ = wrapped.step(s2, a, r2)
        assert s1 == s2


def test_maze_wall_blocks_one_axis():
    maze = make_maze({"grid": ["###", "#.#", "#S#", "###"], "step_scale": 0.9})
    pos = maze.reset(np.random.default_rng(0))
    new, _, _ = maze.step(pos, np.array([0.8, -0.5]))  # x blocked by wall, y free
    assert new[0] == pytest.approx(pos[0])
    assert new[1] == pytest.approx(pos[1] - 0.5)


def test_maze_reward_is_distance_based_and_zeroable():
    maze = make_maze({"grid": ["G.", ".S"]})
    pos = maze.reset(np.random.default_rng(0))
    _, r, _ = maze.step(pos, np.array([0.0, 0.0]))
    assert 0 < r < 1
    z = zero_reward(maze)
    _, r0, _ = z.step(pos, np.array([0.0, 0.0]))
    assert r0 == 0.0


def test_maze_motion_and_determinism():
    maze = make_maze({"grid": ["....", ".S..", "...."], "step_scale": 0.3})
    pos = maze.reset(np.random.default_rng(0))
    a = np.array([0.2, 0.1])
    n1, r1, _ = maze.step(pos, a)
    n2, r2, _ = maze.step(pos, a)
    assert np.array_equal(n1, n2) and r1 == r2
    assert np.allclose(n1, pos + a)


def test_grid_spec_loader_rejects_unknown_keys(tmp_path):
    path = tmp_path / "maze.json"
    path.write_text('{"grid": ["SG"], "bogus": 1}')
    with pytest.raises(ConfigError):
        load_grid_spec(str(path))
    path.write_text('{"grid": ["SG"], "gamma": 0.9}')
    spec = load_grid_spec(str(path))
    assert make_gridmaze(spec).n_states == 2
