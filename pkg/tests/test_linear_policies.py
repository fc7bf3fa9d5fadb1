import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import cKDTree

from reprobandit.environments import ActionSet, LinearEnvironment, RewardStream
from reprobandit.errors import DegenerateArmSet, InsufficientSamples, NetTooLarge, SingularDesign
from reprobandit.linear_policies import (
    build_net,
    coarse_net_eta,
    least_squares,
    least_squares_from_stats,
    lse_sq_request,
    reproducible_lse,
    reproducible_lse_from_means,
    run_alg3,
    run_alg4,
)
from reprobandit.optimal_design import design_to_multiset, frank_wolfe_design, ky_initialize
from reprobandit.repro_sq import grid_offset, required_samples
from reprobandit.shared_randomness import SharedSeed


def pair(fn, env, T, rho, k, **kw):
    a = fn(env, T, rho, SharedSeed(k), RewardStream([1, k]), **kw)
    b = fn(env, T, rho, SharedSeed(k), RewardStream([2, k]), **kw)
    return a, b


# -- least squares --------------------------------------------------------

def test_lse_basis_noiseless():
    theta = np.array([0.3, -0.2, 0.7])
    fit = least_squares([(e, float(e @ theta)) for e in np.eye(3)])
    np.testing.assert_allclose(fit.theta_hat, theta, atol=1e-10)
    np.testing.assert_array_equal(fit.gram, np.eye(3))


@given(st.lists(st.integers(1, 5), min_size=3, max_size=3))
def test_lse_duplicates_noiseless(reps):
    theta = np.array([0.1, 0.5, -0.4])
    arms = np.array([[1, 0, 0], [0.6, 0.8, 0], [0, 0.6, -0.8]])
    pulls = [(a, float(a @ theta)) for a, r in zip(arms, reps) for _ in range(r)]
    np.testing.assert_allclose(least_squares(pulls).theta_hat, theta, atol=1e-10)


def test_lse_singular():
    with pytest.raises(SingularDesign):
        least_squares([([1.0, 0.0], 1.0), ([2.0, 0.0], 2.0)])


def test_lse_condition_warning():
    with pytest.warns(RuntimeWarning):
        least_squares_from_stats([[1.0, 0.0], [1.0, 1e-7]], [1, 1], [0.0, 0.0])


def _lse_errors(arms, counts, theta, sigma, runs, rng):
    """sup_a |<a, th - th*>| for ``runs`` independent LSEs, via per-arm reward sums."""
    means = arms @ theta
    sums = counts * means + sigma * np.sqrt(counts) * rng.standard_normal((runs, len(counts)))
    V = (arms * counts[:, None]).T @ arms
    est = np.linalg.solve(V, arms.T @ sums.T).T
    return np.abs((est - theta) @ arms.T).max(axis=1)


def _five_arms():
    arms = np.random.default_rng(0).normal(size=(5, 2))
    return arms / np.linalg.norm(arms, axis=1, keepdims=True)


@pytest.mark.parametrize("delta", [0.05, 1e-4])
def test_multiset_confidence_calibration(delta):
    arms, theta = _five_arms(), np.array([0.4, -0.3])
    des = frank_wolfe_design(arms, ky_initialize(arms, SharedSeed(0)))
    eps = 0.1
    counts = design_to_multiset(des, eps, delta)
    err = _lse_errors(des.support, counts.astype(float), theta, 1.0, 10**4, np.random.default_rng(1))
    assert np.mean(err > eps) <= 2 * delta


def test_alg3_batch_size_confidence():
    K, T, d = 5, 10**6, 2
    arms, theta = _five_arms(), np.array([0.4, -0.3])
    des = frank_wolfe_design(arms, ky_initialize(arms, SharedSeed(0)))
    beta, q = 2304, T ** (1 / math.ceil(math.log(T)))
    eps_tilde = math.sqrt(d * math.log(K * T * T) / (beta * q))
    counts = design_to_multiset(des, eps_tilde, 1 / (K * T * T)).astype(float)
    err = _lse_errors(des.support, counts, theta, 1.0, 10**4, np.random.default_rng(2))
    assert np.mean(err <= eps_tilde) >= 1 - 1 / (K * T * T)


def test_error_scale_halves_with_four_times_pulls():
    arms, theta = _five_arms(), np.array([0.2, 0.1])
    des = frank_wolfe_design(arms, ky_initialize(arms, SharedSeed(0)))
    counts = design_to_multiset(des, 0.2, 0.05).astype(float)
    rng = np.random.default_rng(3)
    q1 = np.quantile(_lse_errors(des.support, counts, theta, 1.0, 20_000, rng), 0.95)
    q4 = np.quantile(_lse_errors(des.support, 4 * counts, theta, 1.0, 20_000, rng), 0.95)
    assert q4 / q1 == pytest.approx(0.5, rel=0.2)


# -- nets -----------------------------------------------------------------

def test_finite_net_verbatim():
    pts = np.array([[0.1, 0.2], [-0.5, 0.5]])
    net = build_net(ActionSet.finite(pts), 0.01)
    np.testing.assert_array_equal(net.points, pts)


def test_one_dimensional_lattice():
    net = build_net(ActionSet.unit_ball(1), 0.5)
    np.testing.assert_allclose(np.sort(net.points.ravel()), [-1, -0.5, 0, 0.5, 1])


def test_ball_cover_audit():
    net = build_net(ActionSet.unit_ball(2), 0.1)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(10**5, 2))
    x *= (rng.uniform(size=(10**5, 1)) ** 0.5) / np.linalg.norm(x, axis=1, keepdims=True)
    dist, _ = cKDTree(net.points).query(x)
    assert dist.max() <= 0.1
    assert net.size <= (3 / 0.1) ** 2
    assert np.all(np.linalg.norm(net.points, axis=1) <= 1 + 1e-12)


@pytest.mark.parametrize("d,eta", [(1, 0.3), (2, 0.25), (3, 0.4)])
def test_net_cover_boundary_points(d, eta):
    net = build_net(ActionSet.unit_ball(d), eta)
    rng = np.random.default_rng(d)
    x = rng.normal(size=(20_000, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    dist, _ = cKDTree(net.points).query(x)
    assert dist.max() <= eta
    assert net.size <= (3 / eta) ** d


def test_net_too_large():
    with pytest.raises(NetTooLarge):
        build_net(ActionSet.unit_ball(4), 1e-3)


def test_coarse_eta():
    assert coarse_net_eta(10**7, 2) == pytest.approx(10 ** (-0.7))


def test_hypercube_net_is_vertex_list():
    net = build_net(ActionSet.hypercube_vertices(3), 0.5)
    assert net.size == 8


# -- reproducible LSE -----------------------------------------------------

def test_rlse_exact_when_values_on_grid():
    # noiseless means land on the shared grid, so rounding is the identity
    theta = np.array([0.5, -0.25])
    support = np.eye(2)
    seed = SharedSeed(11)
    tau, rho, delta = 0.22, 0.5, 0.01
    req = [lse_sq_request(tau, rho, delta, 2, 2, 0, a) for a in range(2)]
    offsets = [grid_offset(seed, r) for r in req]
    spacing = req[0].tau
    theta = np.array([offsets[0] + 3 * spacing, offsets[1] - 2 * spacing])
    counts = [required_samples(r) for r in req]
    out = reproducible_lse([np.full(c, v) for c, v in zip(counts, theta)], support, rho, delta, tau, seed)
    np.testing.assert_allclose(out, theta, atol=1e-12)


def test_rlse_scalar():
    seed = SharedSeed(2)
    req = lse_sq_request(0.5, 0.5, 0.01, 1, 1)
    n = required_samples(req)
    out = reproducible_lse([np.full(n, 0.37)], np.array([[1.0]]), 0.5, 0.01, 0.5, seed)
    u, s = grid_offset(seed, req), req.tau
    m = (out[0] - u) / s
    assert abs(m - round(m)) < 1e-9 and abs(out[0] - 0.37) <= s / 2 + 1e-12


def test_rlse_insufficient_samples():
    with pytest.raises(InsufficientSamples):
        reproducible_lse([np.zeros(10), np.zeros(10)], np.eye(2), 0.5, 0.01, 0.5, SharedSeed(0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.integers(1, 10**6), min_size=3, max_size=3))
def test_rlse_grid_structure(s, means, counts):
    support = np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]])
    seed = SharedSeed(s)
    theta, v = reproducible_lse_from_means(support, counts, means, 0.5, 0.01, 0.3, seed, batch=4, strict=False)
    n = np.array(counts, dtype=float)
    V = (support * n[:, None]).T @ support
    np.testing.assert_allclose(V @ theta, support.T @ (n * v), rtol=1e-9, atol=1e-9)
    for a in range(3):
        req = lse_sq_request(0.3, 0.5, 0.01, 2, 3, 4, a)
        m = (v[a] - grid_offset(seed, req)) / req.tau
        assert abs(m - round(m)) < 1e-6


# -- alg3 ---------------------------------------------------------------

def test_alg3_gap_two_noiseless():
    env = LinearEnvironment(np.array([1.0]), ActionSet.finite([[1.0], [-1.0]]), 0.0)
    a, b = pair(run_alg3, env, 10**6, 0.5, 0)
    assert np.array_equal(a.arms, b.arms) and a.batch_log == b.batch_log
    for e in a.batch_log:
        assert e["theta"] == pytest.approx([1.0], abs=1e-9)
        if e["eps_tilde"] + e["eps_bar"] < 2.0:
            assert e["eliminated"] == [1]
            break
        assert e["eliminated"] == []
    else:
        pytest.fail("no batch reached the elimination scale")
    assert a.arms[-1] == 0


def test_alg3_single_arm():
    env = LinearEnvironment(np.array([0.5, 0.5]), ActionSet.finite([[0.6, 0.8]]), 1.0)
    tr = run_alg3(env, 1000, 0.5, SharedSeed(0), RewardStream(0))
    assert tr.T == 1000 and np.all(tr.arms == 0)


def test_alg3_rejects_non_spanning():
    env = LinearEnvironment(np.array([0.5, 0.5]), ActionSet.finite([[1.0, 0.0], [0.5, 0.0]]), 1.0)
    with pytest.raises(DegenerateArmSet):
        run_alg3(env, 10**5, 0.5, SharedSeed(0), RewardStream(0))


def test_alg3_active_set_collapses_to_a_line():
    arms = [[1.0, 0.0], [0.9, 0.0], [0.0, -1.0]]
    env = LinearEnvironment(np.array([1.0, 0.0]), ActionSet.finite(arms), 0.0)
    tr = run_alg3(env, 3 * 10**6, 1.0, SharedSeed(0), RewardStream(0))
    assert tr.T == 3 * 10**6
    sizes = [e["active"] for e in tr.batch_log]
    assert 2 in sizes and tr.arms[-1] == 0


def test_alg3_noiseless_exact_and_paired():
    arms = _five_arms()
    env = LinearEnvironment(np.array([0.3, 0.6]), ActionSet.finite(arms), 0.0)
    a, b = pair(run_alg3, env, 2 * 10**6, 0.5, 1)
    assert np.array_equal(a.arms, b.arms)
    for e in a.batch_log:
        np.testing.assert_allclose(e["theta"], env.theta_star, atol=1e-9)


def test_alg3_best_arm_survives_under_accurate_estimates():
    arms = _five_arms()
    theta = np.array([0.5, 0.5])
    env = LinearEnvironment(theta, ActionSet.finite(arms), 0.3)
    best = int(np.argmax(arms @ theta))
    audited = 0
    for k in range(6):
        tr = run_alg3(env, 2 * 10**6, 0.5, SharedSeed(k), RewardStream(k))
        for e in tr.batch_log:
            if np.abs(arms @ (np.array(e["theta"]) - theta)).max() <= e["eps_tilde"]:
                audited += 1
                assert best not in e["eliminated"]
    assert audited > 0


# -- alg4 ---------------------------------------------------------------

def _replay_alg4(points, log):
    active = np.arange(len(points))
    for e in log:
        vals = points[active] @ np.array(e["theta"])
        keep = ~(vals < vals.max() - 2 * e["eps"])
        assert e["active"] == len(active) and e["eliminated"] == int((~keep).sum())
        active = active[keep]
    return active


def test_alg4_one_dimensional_noiseless():
    env = LinearEnvironment(np.array([1.0]), ActionSet.unit_ball(1), 0.0)
    a, b = pair(run_alg4, env, 10**6, 0.5, 0, net_eta=0.05)
    assert np.array_equal(a.arms, b.arms) and a.batch_log == b.batch_log
    survivors = _replay_alg4(a.points, a.batch_log)
    assert a.points[a.arms[-1], 0] == pytest.approx(1.0)
    assert np.all(a.points[survivors, 0] >= 1.0 - 2 * a.batch_log[-1]["eps"] - 0.05)
    assert sum(e["eliminated"] for e in a.batch_log) > 0


def test_alg4_finite_equals_own_net():
    pts = _five_arms()
    theta = np.array([0.2, -0.7])
    env = LinearEnvironment(theta, ActionSet.finite(pts), 0.3)
    netted = LinearEnvironment(theta, ActionSet.finite(build_net(env.action_set, 0.1).points), 0.3)
    a = run_alg4(env, 10**6, 0.5, SharedSeed(4), RewardStream(4), net_eta=0.1)
    b = run_alg4(netted, 10**6, 0.5, SharedSeed(4), RewardStream(4), net_eta=0.1)
    np.testing.assert_array_equal(a.arms, b.arms)
    np.testing.assert_array_equal(a.rewards, b.rewards)


def test_alg4_default_net_too_large():
    env = LinearEnvironment(np.array([0.3, 0.3]), ActionSet.unit_ball(2), 0.3)
    with pytest.raises(NetTooLarge):
        run_alg4(env, 10**6, 0.5, SharedSeed(0), RewardStream(0))


def test_alg4_strict_mode_refuses_short_samples():
    env = LinearEnvironment(np.array([0.3, 0.3]), ActionSet.unit_ball(2), 0.3)
    with pytest.raises(InsufficientSamples):
        run_alg4(env, 10**6, 0.5, SharedSeed(0), RewardStream(0), net_eta=0.5, strict=True)


def test_alg4_even_allocation_and_log_fields():
    env = LinearEnvironment(np.array([0.3, 0.3]), ActionSet.unit_ball(2), 0.3)
    tr = run_alg4(env, 10**6, 0.5, SharedSeed(0), RewardStream(0), net_eta=0.5, even_allocation=True)
    assert tr.T == 10**6
    for e in tr.batch_log:
        assert {"batch", "active", "g", "eps", "core_size"} <= set(e)
        assert e["g"] <= 4 * 2 + 1e-9
        assert e["per_arm_min"] * e["core_size"] == e["pulls"]


def test_alg4_noiseless_estimates_close():
    env = LinearEnvironment(np.array([0.6, -0.3]), ActionSet.unit_ball(2), 0.0)
    tr = run_alg4(env, 2 * 10**6, 0.5, SharedSeed(0), RewardStream(0), net_eta=coarse_net_eta(2 * 10**6, 2))
    for e in tr.batch_log:
        # rounding error of at most half a cell per core arm, amplified by at most 11d
        assert np.linalg.norm(np.array(e["theta"]) - env.theta_star) <= min(e["eps"], 1.0)
    _replay_alg4(tr.points, tr.batch_log)
