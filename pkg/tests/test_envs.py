import math

import numpy as np
import pytest

from contilab.envs import (
    Ar1ScalarEnv,
    BitFlipEnv,
    CoinSwapEnv,
    GaussianAr1BanditEnv,
    GoalMdpEnv,
    LogitEnv,
    build_env,
)
from contilab.errors import ConfigurationError
from contilab.rng import RngStream


def _stderr(x):
    return np.std(x, ddof=1) / math.sqrt(len(x))


def test_ar1_noiseless_geometric_decay():
    env = Ar1ScalarEnv(eta=0.9, zeta=0.0, sigma=0.0, mu0=1.0, sigma0=0.0)
    env.reset(RngStream(0))
    obs = [env.step(0.0) for _ in range(4)]
    assert obs == pytest.approx([0.9, 0.81, 0.729, 0.6561], abs=1e-12)


def test_ar1_frozen_latent_observation_variance():
    env = Ar1ScalarEnv(eta=1.0, zeta=0.0, sigma=0.7, mu0=0.0, sigma0=0.0)
    env.reset(RngStream(1))
    ys = np.array([env.step(0.0) for _ in range(100_000)])
    assert env.theta == 0.0
    var = np.var(ys)
    se = np.std(ys**2, ddof=1) / math.sqrt(len(ys))
    assert abs(var - 0.49) < 4 * se


def test_ar1_stationary_parameterization():
    eta = 0.8
    env = Ar1ScalarEnv(eta=eta, zeta=math.sqrt(1 - eta * eta), sigma=0.0, mu0=0.0, sigma0=1.0)
    env.reset(RngStream(2))
    thetas = []
    for _ in range(100_000):
        env.step(0.0)
        thetas.append(env.theta)
    thetas = np.array(thetas)
    # batch-mean stderr to respect autocorrelation
    batches = np.array([b.mean() for b in np.split(thetas**2, 100)])
    assert abs(np.var(thetas) - 1.0) < 4 * batches.std(ddof=1) / 10


def test_ar1_reward_is_negative_squared_error():
    env = Ar1ScalarEnv(eta=0.9, zeta=0.5, sigma=1.0)
    assert env.reward(0.5, 2.0) == -2.25


def test_coin_fixed_bias_head_rate():
    env = CoinSwapEnv([{"prior": ["fixed", 0.8], "swap_prob": 0.0},
                       {"prior": ["fixed", 0.3], "swap_prob": 0.0}])
    env.reset(RngStream(3))
    tosses = np.array([env.step(0) for _ in range(100_000)])
    assert abs(tosses.mean() - 0.8) < 4 * _stderr(tosses)


def test_coin_fast_replacement_heads_near_half():
    env = CoinSwapEnv([{"prior": ["dyadic", 0.5], "swap_prob": 0.999}])
    env.reset(RngStream(4))
    tosses = np.array([env.step(0) for _ in range(100_000)])
    assert abs(tosses.mean() - 0.5) < 4 * _stderr(tosses)


def test_coin_full_replacement_uncorrelated():
    env = CoinSwapEnv([{"prior": ["dyadic", 0.5], "swap_prob": 1.0}])
    env.reset(RngStream(5))
    tosses = np.array([env.step(0) for _ in range(100_000)], dtype=float)
    x, y = tosses[:-1] - tosses.mean(), tosses[1:] - tosses.mean()
    lag1 = (x * y).mean() / tosses.var()
    assert abs(lag1) < 4 / math.sqrt(len(tosses))


def test_coin_invalid_arm():
    env = CoinSwapEnv([{"prior": ["fixed", 0.5], "swap_prob": 0.0}])
    env.reset(RngStream(0))
    with pytest.raises(ValueError):
        env.step(3)


def test_bandit_frozen_latent_mean():
    env = GaussianAr1BanditEnv(arms=2, eta=1.0, zeta=0.0, sigma=1.0)
    env.reset(RngStream(6))
    theta0 = env.thetas[0]
    rewards = np.array([env.step(0) for _ in range(100_000)])
    assert abs(rewards.mean() - theta0) < 4 * _stderr(rewards)


def test_bandit_iid_variance():
    env = GaussianAr1BanditEnv(arms=1, eta=0.0, zeta=1.0, sigma=0.5)
    env.reset(RngStream(7))
    rewards = np.array([env.step(0) for _ in range(100_000)])
    se = np.std(rewards**2, ddof=1) / math.sqrt(len(rewards))
    assert abs(np.var(rewards) - 1.25) < 4 * se


def test_bandit_latent_autocovariance():
    eta = 0.8
    env = GaussianAr1BanditEnv(arms=2, eta=eta, sigma=1.0)  # zeta defaults to stationary
    env.reset(RngStream(8))
    thetas = []
    for _ in range(100_000):
        env.step(0)
        thetas.append(env.thetas[1])  # unpulled arm advances identically
    th = np.array(thetas)
    for k in (1, 3):
        prod = th[:-k] * th[k:]
        batches = np.array([b.mean() for b in np.array_split(prod, 100)])
        se = batches.std(ddof=1) / 10
        assert abs(prod.mean() - eta**k) < 4 * se


def test_bitflip_flip_rate_and_fair_start():
    env = BitFlipEnv(prior=["fixed", 0.3])
    firsts = []
    for seed in range(2_000):
        env.reset(RngStream(seed))
        firsts.append(env.step(0))
    assert abs(np.mean(firsts) - 0.5) < 4 * math.sqrt(0.25 / 2_000)

    env.reset(RngStream(77))
    bits = np.array([env.step(0) for _ in range(50_000)])
    flips = (bits[1:] != bits[:-1]).astype(float)
    assert abs(flips.mean() - 0.3) < 4 * _stderr(flips)


def test_logit_env_rate_matches_latent():
    env = LogitEnv()
    env.reset(RngStream(9))
    p = 1.0 / (1.0 + math.exp(-env.theta))
    obs = np.array([env.step(0.5) for _ in range(50_000)])
    assert abs(obs.mean() - p) < 4 * _stderr(obs)
    assert env.reward(0.25, 1) == pytest.approx(math.log(0.25))
    assert env.reward(0.25, 0) == pytest.approx(math.log(0.75))


def test_goal_mdp_rows_stay_stochastic():
    env = GoalMdpEnv(resample_prob=0.05)
    env.reset(RngStream(10))
    for _ in range(500):
        env.step(0)
    assert env.resample_events > 0
    sums = env.P.sum(axis=2)
    assert np.all(np.abs(sums - 1.0) < 1e-12)
    assert np.all(env.P >= 0.0)


def test_goal_mdp_resample_rate():
    env = GoalMdpEnv(resample_prob=1e-3)
    env.reset(RngStream(11))
    steps = 100_000
    for _ in range(steps):
        env.step(0)
    expected = 30 * 1e-3 * steps
    sd = math.sqrt(steps * 30 * 1e-3 * (1 - 1e-3))
    assert abs(env.resample_events - expected) < 4 * sd


def test_goal_mdp_greedy_policy_earns_target():
    # frozen MDP: the scaled goal reward makes the greedy plan earn ~0.5/step
    from contilab.mdp_tools import goal_mdp, goal_reward_scale, greedy_policy

    env = GoalMdpEnv(resample_prob=0.0)
    env.reset(RngStream(12))
    r_goal, q_star = goal_reward_scale(env.P, env.goal_state, 0.9)
    assert r_goal == env.goal_reward
    policy = greedy_policy(q_star)
    g = RngStream(13).generator()
    state, total, steps = 0, 0.0, 300_000
    cum = np.cumsum(env.P, axis=2)
    for _ in range(steps):
        nxt = int(np.searchsorted(cum[state, policy[state]], g.random()))
        nxt = min(nxt, env.n_states - 1)
        if nxt == env.goal_state:
            total += r_goal
        state = nxt
    assert abs(total / steps - 0.5) < 0.02


def test_goal_mdp_reward_paid_on_arrival():
    env = GoalMdpEnv(resample_prob=0.0)
    env.reset(RngStream(14))
    nxt = env.step(1)
    expected = env.goal_reward if nxt == env.goal_state else 0.0
    assert env.reward(1, nxt) == expected


def test_build_env_unknown_kind():
    with pytest.raises(ConfigurationError, match="unknown env kind"):
        build_env({"kind": "warp_drive"})
    with pytest.raises(ConfigurationError, match="bad parameters"):
        build_env({"kind": "ar1", "eta": 0.5, "zeta": 0.1, "sigma": 0.1, "bogus": 1})


def test_env_param_validation():
    with pytest.raises(ValueError):
        Ar1ScalarEnv(eta=1.5, zeta=0.1, sigma=0.1)
    with pytest.raises(ValueError):
        GoalMdpEnv(resample_prob=-0.1)
    with pytest.raises(ValueError):
        CoinSwapEnv([])
