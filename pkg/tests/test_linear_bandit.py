"""Finite-menu linear bandit with optional offline warm start."""
import numpy as np
import pytest

from pricing_lab.linear_bandit import (ActionSet, lb_build_env,
                                       lb_clairvoyant_new, lb_policy_new,
                                       lb_run, lb_select_action, lb_update)


def small_env(n_offline=0, v_true=0.0, seed=3, d=3, k=8):
    return lb_build_env(d=d, k=k, n_offline=n_offline, v_true=v_true,
                        noise_R=0.1, a_max=1.0, theta_norm=1.0,
                        master_seed=seed, rep=0)


def online_policy(env, T=200):
    return lb_policy_new(None, 0.0, 1.0, 1.0 / T ** 2, T, d=env.d,
                         a_max=env.a_max, s_bound=1.0, noise_R=env.noise_R)


def informed_policy(env, T=200, v_bound=0.05):
    return lb_policy_new(env.offline_pairs(), v_bound, 1.0, 1.0 / T ** 2, T,
                         d=env.d, a_max=env.a_max, s_bound=1.0,
                         noise_R=env.noise_R)


def test_action_set_validation():
    with pytest.raises(ValueError):
        ActionSet(np.empty((0, 3)), 1.0)
    with pytest.raises(ValueError):
        ActionSet(np.array([[2.0, 0.0]]), 1.0)
    menu = ActionSet(np.array([[1.0, 0.0], [0.0, 0.5]]), 1.0)
    assert (menu.k, menu.d) == (2, 2)


def test_environment_shapes():
    env = small_env(n_offline=50)
    assert env.offline_actions.shape == (50, 3)
    assert env.offline_rewards.shape == (50,)
    assert env.n_offline == 50
    assert np.linalg.norm(env.theta_star) == pytest.approx(1.0)
    np.testing.assert_allclose(np.linalg.norm(env.offline_actions, axis=1), 1.0)


def test_offline_pairs_empty_log_is_none():
    assert small_env(n_offline=0).offline_pairs() is None
    assert small_env(n_offline=5).offline_pairs() is not None


def test_bias_construction():
    env = small_env(n_offline=10, v_true=0.3)
    assert np.linalg.norm(env.theta_prime - env.theta_star) == pytest.approx(0.3)
    clean = small_env(n_offline=10, v_true=0.0)
    np.testing.assert_array_equal(clean.theta_prime, clean.theta_star)


def test_selection_is_the_optimistic_argmax():
    env = small_env()
    pol = online_policy(env)
    rng = np.random.default_rng(0)
    from pricing_lab.confidence import linear_max
    for t in range(10):
        g = rng.standard_normal((6, 3))
        menu = ActionSet(g / np.linalg.norm(g, axis=1, keepdims=True), 1.0)
        conf = pol.confidence_set()
        idx = lb_select_action(pol, menu)
        vals = [linear_max(conf, a) for a in menu.actions]
        assert vals[idx] >= max(vals) - 1e-9
        lb_update(pol, menu.actions[idx], float(rng.normal()))
    assert pol.rounds == 10


def test_select_update_alternation():
    env = small_env()
    pol = online_policy(env)
    menu = ActionSet(np.eye(3), 1.0)
    with pytest.raises(RuntimeError):
        lb_update(pol, menu.actions[0], 0.0)
    idx = lb_select_action(pol, menu)
    with pytest.raises(RuntimeError):
        lb_select_action(pol, menu)
    lb_update(pol, menu.actions[idx], 0.0)


def test_dimension_mismatch_is_rejected():
    env = small_env()
    pol = online_policy(env)
    with pytest.raises(ValueError):
        lb_select_action(pol, ActionSet(np.eye(4), 1.0))


def test_clairvoyant_has_zero_regret():
    env = small_env()
    trace = lb_run(env, lb_clairvoyant_new(env.theta_star), T=100, seed=5)
    np.testing.assert_array_equal(trace.instant, np.zeros(100))
    assert trace.policy == "lb_clairvoyant"


def test_run_is_deterministic_and_nonnegative():
    env = small_env()
    a = lb_run(env, online_policy(env), T=150, seed=5)
    b = lb_run(env, online_policy(env), T=150, seed=5)
    np.testing.assert_array_equal(a.instant, b.instant)
    assert a.instant.min() >= 0.0
    np.testing.assert_allclose(a.cum, np.cumsum(a.instant))


def test_no_offline_rows_reduces_to_the_online_policy():
    env = small_env(n_offline=0)
    T = 150
    a = lb_run(env, online_policy(env, T), T=T, seed=9)
    b = lb_run(env, informed_policy(env, T), T=T, seed=9)
    np.testing.assert_array_equal(a.instant, b.instant)


def test_rich_clean_offline_data_helps():
    T = 300
    finals = {"online": [], "informed": []}
    for rep in range(3):
        env = lb_build_env(d=3, k=8, n_offline=1500, v_true=0.02,
                           noise_R=0.1, a_max=1.0, theta_norm=1.0,
                           master_seed=17, rep=rep)
        finals["online"].append(
            lb_run(env, online_policy(env, T), T=T, seed=23, rep=rep).final)
        finals["informed"].append(
            lb_run(env, informed_policy(env, T, v_bound=0.05), T=T, seed=23,
                   rep=rep).final)
    assert np.mean(finals["informed"]) < np.mean(finals["online"])


def test_policy_parameter_validation():
    with pytest.raises(ValueError):
        lb_policy_new(None, -0.1, 1.0, 0.01, 10, d=3, a_max=1.0, s_bound=1.0,
                      noise_R=0.1)
    with pytest.raises(ValueError):
        lb_policy_new(None, 0.0, 0.0, 0.01, 10, d=3, a_max=1.0, s_bound=1.0,
                      noise_R=0.1)
    with pytest.raises(ValueError):
        lb_policy_new((np.ones((3, 3)), np.ones(2)), 0.0, 1.0, 0.01, 10, d=3,
                      a_max=1.0, s_bound=1.0, noise_R=0.1)
