import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from reprobandit.environments import (
    ActionSet,
    Distribution,
    LinearEnvironment,
    MabEnvironment,
    RewardStream,
    environment_from_dict,
    environment_to_dict,
    gap_profile,
    load_environment,
    pull_linear,
    pull_linear_many,
    pull_mab,
    pull_mab_many,
    sample_mean_linear,
)
from reprobandit.errors import InvalidAction, InvalidArm


@pytest.mark.parametrize("mu", [1.0, 0.0])
def test_deterministic_bernoulli(mu):
    env = MabEnvironment((mu,))
    assert pull_mab(env, 0, RewardStream(5)) == mu


def test_bernoulli_mean():
    x = pull_mab_many(MabEnvironment((0.3,)), 0, 10**6, RewardStream(11))
    assert abs(x.mean() - 0.3) <= 0.002


@given(st.lists(st.floats(0, 1), min_size=1, max_size=5), st.sampled_from(list(Distribution)), st.integers(0, 2**32))
@settings(max_examples=50)
def test_rewards_bounded(means, kind, seed):
    env = MabEnvironment(tuple(means), kind)
    stream = RewardStream(seed)
    for a in range(env.K):
        x = pull_mab_many(env, a, 200, stream)
        assert np.all((x >= 0.0) & (x <= 1.0))


def test_uniform_around_mean_has_right_mean():
    x = pull_mab_many(MabEnvironment((0.8,), "uniform_around_mean"), 0, 10**5, RewardStream(2))
    assert abs(x.mean() - 0.8) < 0.003
    assert x.min() >= 0.6 and x.max() <= 1.0


def test_invalid_arm():
    with pytest.raises(InvalidArm):
        pull_mab(MabEnvironment((0.5, 0.5)), 2, RewardStream(0))


@pytest.mark.parametrize(
    "means,gaps,H",
    [((0.9, 0.5), (0, 0.4), 2.5), ((0.7, 0.7), (0, 0), 0.0), ((0.9, 0.8, 0.4), (0, 0.1, 0.5), 12.0)],
)
def test_gap_profile(means, gaps, H):
    g, h = gap_profile(MabEnvironment(means))
    np.testing.assert_allclose(g, gaps, atol=1e-12)
    assert h == pytest.approx(H)


def test_reward_seeds_independent():
    env = MabEnvironment((0.5,))
    a = pull_mab_many(env, 0, 10**5, RewardStream(1)).astype(int)
    b = pull_mab_many(env, 0, 10**5, RewardStream(2)).astype(int)
    table = np.zeros((2, 2))
    np.add.at(table, (a, b), 1)
    assert stats.chi2_contingency(table)[1] > 0.001


def test_stream_per_arm_is_order_free():
    env = MabEnvironment((0.5, 0.5))
    s1, s2 = RewardStream(9), RewardStream(9)
    x1 = pull_mab_many(env, 0, 10, s1)
    pull_mab_many(env, 1, 37, s2)
    x2 = pull_mab_many(env, 0, 10, s2)
    np.testing.assert_array_equal(x1, x2)


def test_linear_noiseless_examples():
    env = LinearEnvironment(np.array([1.0, 0.0]), ActionSet.unit_ball(2), 0.0)
    assert pull_linear(env, [0.0, 1.0], RewardStream(0)) == 0.0
    env = LinearEnvironment(np.array([0.6, 0.8]), ActionSet.unit_ball(2), 0.0)
    assert pull_linear(env, [0.6, 0.8], RewardStream(0)) == pytest.approx(1.0)


def test_linear_noisy_mean():
    theta = np.array([0.3, -0.4])
    env = LinearEnvironment(theta, ActionSet.unit_ball(2), 1.0)
    a = np.array([0.8, 0.6])
    x = pull_linear_many(env, a, 10**6, RewardStream(4))
    assert abs(x.mean() - a @ theta) <= 0.004


def test_sample_mean_linear_matches_distribution():
    env = LinearEnvironment(np.array([0.5]), ActionSet.unit_ball(1), 1.0)
    m = np.array([sample_mean_linear(env, [1.0], 100, RewardStream([3, k])) for k in range(4000)])
    assert abs(m.mean() - 0.5) < 0.01
    assert abs(m.std() - 0.1) < 0.01


def test_action_norm_checked():
    env = LinearEnvironment(np.array([0.0, 0.0]), ActionSet.unit_ball(2), 0.0)
    with pytest.raises(InvalidAction):
        pull_linear(env, [1.0, 0.1], RewardStream(0))
    pull_linear(env, [1.0 + 5e-10, 0.0], RewardStream(0))


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2), st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_noiseless_pull_is_pure(theta, a):
    theta, a = np.array(theta), np.array(a)
    if np.linalg.norm(theta) > 1 or np.linalg.norm(a) > 1:
        return
    env = LinearEnvironment(theta, ActionSet.unit_ball(2), 0.0)
    assert pull_linear(env, a, RewardStream(1)) == pull_linear(env, a, RewardStream(2)) == float(a @ theta)


def test_theta_norm_checked():
    with pytest.raises(ValueError):
        LinearEnvironment(np.array([1.0, 1.0]), ActionSet.unit_ball(2))


def test_hypercube_vertices_unit_norm():
    pts = ActionSet.hypercube_vertices(3).materialize()
    assert pts.shape == (8, 3)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0)


def test_best_value():
    theta = np.array([0.3, 0.4])
    assert ActionSet.unit_ball(2).best_value(theta) == pytest.approx(0.5)
    assert ActionSet.finite([[1, 0], [0, 1]]).best_value(theta) == pytest.approx(0.4)


def test_config_roundtrip(tmp_path):
    env = LinearEnvironment(np.array([0.1, 0.2]), ActionSet.finite([[1, 0], [0, 1]]), 0.5)
    p = tmp_path / "env.json"
    p.write_text(json.dumps(environment_to_dict(env)))
    back = load_environment(p)
    np.testing.assert_array_equal(back.theta_star, env.theta_star)
    np.testing.assert_array_equal(back.action_set.points, env.action_set.points)
    mab = environment_from_dict({"kind": "mab", "means": [0.1, 0.9]})
    assert environment_from_dict(environment_to_dict(mab)) == mab
    with pytest.raises(ValueError):
        environment_from_dict({"kind": "other"})
