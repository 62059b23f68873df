"""Environment families: scalar AR(1) tracking, replaceable coins, AR(1)
Gaussian bandits, logit and bit-flip binary streams, and a goal MDP whose
transition rows are randomly replaced over time.

Environments are single-owner stateful objects: construct with parameters,
bind randomness once with ``reset(stream)``, then call ``step(action)`` and
``reward(action, observation)`` in alternation. Each instance consumes only
its own child streams, so replays are exact.
"""

from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

from .errors import ConfigurationError
from .mdp_tools import goal_reward_scale
from .rng import RngStream

_EVENT_BLOCK = 4096


def _draw_bias(prior, buf):
    kind = prior[0]
    if kind == "fixed":
        return float(prior[1])
    if kind == "dyadic":
        p_hi = float(prior[1]) if len(prior) > 1 else 0.5
        return 1.0 if buf.uniform() < p_hi else 0.0
    if kind == "beta":
        return float(buf.generator.beta(float(prior[1]), float(prior[2])))
    if kind == "uniform":
        return buf.uniform()
    raise ConfigurationError(f"unknown bias prior {prior!r}")


class Ar1ScalarEnv:
    """Noisy scalar AR(1) latent: theta <- eta*theta + N(0, zeta^2),
    observation = theta + N(0, sigma^2), reward = -(obs - action)^2."""

    action_space = ("real",)
    observation_space = ("real",)

    def __init__(self, eta: float, zeta: float, sigma: float, mu0: float = 0.0, sigma0: float = 1.0):
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {eta}")
        if zeta < 0.0 or sigma < 0.0 or sigma0 < 0.0:
            raise ValueError("noise scales must be nonnegative")
        self.eta = eta
        self.zeta = zeta
        self.sigma = sigma
        self.mu0 = mu0
        self.sigma0 = sigma0
        self.theta = mu0

    def reset(self, stream: RngStream):
        self._rng = stream.buffer()
        self.theta = self.mu0 + math.sqrt(self.sigma0) * self._rng.normal()

    def step(self, action):
        rng = self._rng
        self.theta = self.eta * self.theta + self.zeta * rng.normal()
        return self.theta + self.sigma * rng.normal()

    def reward(self, action, observation) -> float:
        err = observation - action
        return -(err * err)


class CoinSwapEnv:
    """Coins with latent biases; each step every coin is independently
    replaced with probability ``swap_prob`` (fresh prior draw) before the
    selected coin is tossed. Reward is the toss outcome."""

    observation_space = ("discrete", 2)

    def __init__(self, arms):
        if not arms:
            raise ValueError("at least one arm required")
        self._priors = []
        self._swap_probs = []
        for arm in arms:
            prior = arm["prior"]
            q = float(arm.get("swap_prob", 0.0))
            if not 0.0 <= q <= 1.0:
                raise ValueError(f"swap probability must lie in [0, 1], got {q}")
            self._priors.append(list(prior))
            self._swap_probs.append(q)
        self.n_arms = len(arms)
        self.action_space = ("discrete", self.n_arms)
        self.biases: list[float] = []

    def reset(self, stream: RngStream):
        self._rng = stream.buffer()
        self.biases = [_draw_bias(p, self._rng) for p in self._priors]

    def step(self, arm):
        if not 0 <= arm < self.n_arms:
            raise ValueError(f"arm index {arm} out of range")
        rng = self._rng
        for i, q in enumerate(self._swap_probs):
            if rng.uniform() < q:
                self.biases[i] = _draw_bias(self._priors[i], rng)
        return 1 if rng.uniform() < self.biases[arm] else 0

    def reward(self, action, observation) -> float:
        return float(observation)


class GaussianAr1BanditEnv:
    """Bandit whose per-arm latent means follow independent AR(1) processes.

    Pulling an arm returns theta[arm] + N(0, sigma^2); afterwards every
    latent advances by theta <- eta*theta + N(0, zeta^2), pulled or not.
    ``zeta`` defaults to sqrt(1 - eta^2), which together with sigma0 = 1
    keeps each latent marginally standard normal.
    """

    observation_space = ("real",)

    def __init__(self, arms: int, eta, sigma: float, zeta=None, mu0=0.0, sigma0=1.0):
        if arms < 1:
            raise ValueError("at least one arm required")
        self.n_arms = arms
        self.action_space = ("discrete", arms)
        self.etas = [float(e) for e in (eta if isinstance(eta, (list, tuple)) else [eta] * arms)]
        if zeta is None:
            self.zetas = [math.sqrt(max(0.0, 1.0 - e * e)) for e in self.etas]
        else:
            self.zetas = [float(z) for z in (zeta if isinstance(zeta, (list, tuple)) else [zeta] * arms)]
        self.mu0s = [float(m) for m in (mu0 if isinstance(mu0, (list, tuple)) else [mu0] * arms)]
        self.sigma0s = [float(s) for s in (sigma0 if isinstance(sigma0, (list, tuple)) else [sigma0] * arms)]
        if len(self.etas) != arms or len(self.zetas) != arms:
            raise ValueError("per-arm parameter lists must match the arm count")
        self.sigma = float(sigma)
        self.thetas: list[float] = []

    def reset(self, stream: RngStream):
        self._rng = stream.buffer()
        self.thetas = [m + math.sqrt(s) * self._rng.normal() for m, s in zip(self.mu0s, self.sigma0s)]

    def step(self, arm):
        if not 0 <= arm < self.n_arms:
            raise ValueError(f"arm index {arm} out of range")
        rng = self._rng
        obs = self.thetas[arm] + self.sigma * rng.normal()
        thetas = self.thetas
        for i in range(self.n_arms):
            thetas[i] = self.etas[i] * thetas[i] + self.zetas[i] * rng.normal()
        return obs

    def reward(self, action, observation) -> float:
        return observation


class LogitEnv:
    """Binary stream with a single latent logit theta ~ N(0, 1):
    P(obs = 1) = sigmoid(theta) at every step. Actions are predicted
    probabilities of 1; reward is the log probability assigned to the
    realized bit."""

    action_space = ("real",)
    observation_space = ("discrete", 2)

    def __init__(self):
        self.theta = 0.0

    def reset(self, stream: RngStream):
        self._rng = stream.buffer()
        self.theta = self._rng.normal()
        self._p1 = 1.0 / (1.0 + math.exp(-self.theta))

    def step(self, action):
        return 1 if self._rng.uniform() < self._p1 else 0

    def reward(self, action, observation) -> float:
        p = action if observation == 1 else 1.0 - action
        return math.log(p) if p > 0.0 else float("-inf")


class BitFlipEnv:
    """Binary stream that flips its previous bit with a latent probability p
    drawn once from a prior; the first bit is fair. Reward is 1 when the
    action predicted the emitted bit."""

    action_space = ("discrete", 2)
    observation_space = ("discrete", 2)

    def __init__(self, prior=("beta", 2.0, 1.0)):
        self._prior = list(prior)
        self.p = 0.5
        self.last_bit: int | None = None

    def reset(self, stream: RngStream):
        self._rng = stream.buffer()
        self.p = _draw_bias(self._prior, self._rng)
        self.last_bit = None

    def step(self, action):
        rng = self._rng
        if self.last_bit is None:
            bit = 1 if rng.uniform() < 0.5 else 0
        elif rng.uniform() < self.p:
            bit = 1 - self.last_bit
        else:
            bit = self.last_bit
        self.last_bit = bit
        return bit

    def reward(self, action, observation) -> float:
        return 1.0 if action == observation else 0.0


class GoalMdpEnv:
    """Goal MDP whose Dirichlet transition rows are independently replaced.

    Each step, every (state, action) row is resampled from
    Dirichlet(1/S, ..., 1/S) with probability ``resample_prob``; whenever any
    row changed, the goal-arrival reward is rescaled so the greedy policy of
    the current MDP earns ``target_reward`` per step on average. Arrival at
    the goal state pays that scaled reward, every other transition pays 0.
    A degenerate draw that leaves the goal unreachable under the greedy
    policy raises DegenerateMdpError, which sweep runners record as a failed
    trial.
    """

    def __init__(self, n_states: int = 10, n_actions: int = 3, resample_prob: float = 1e-3,
                 goal_state: int = 0, plan_gamma: float = 0.9, target_reward: float = 0.5,
                 vi_tol: float = 1e-8):
        if not 0.0 <= resample_prob < 1.0:
            raise ValueError(f"resample probability must lie in [0, 1), got {resample_prob}")
        if not 0 <= goal_state < n_states:
            raise ValueError(f"goal state {goal_state} out of range")
        self.n_states = n_states
        self.n_actions = n_actions
        self.resample_prob = resample_prob
        self.goal_state = goal_state
        self.plan_gamma = plan_gamma
        self.target_reward = target_reward
        self.vi_tol = vi_tol
        self.action_space = ("discrete", n_actions)
        self.observation_space = ("discrete", n_states)
        self.resample_events = 0

    def reset(self, stream: RngStream):
        S, A = self.n_states, self.n_actions
        self._row_gen = stream.child("row-draws").generator()
        self._mask_gen = stream.child("row-events").generator()
        self._tr = stream.child("transition").buffer()
        self.P = np.empty((S, A, S))
        for s in range(S):
            for a in range(A):
                self.P[s, a] = self._draw_row()
        self._cum = [[list(np.cumsum(self.P[s, a])) for a in range(A)] for s in range(S)]
        self._q = None
        self._rescale()
        self.state = stream.child("init").buffer().index(S)
        self.resample_events = 0
        self._n_rows = S * A
        self._ev_pos = 0
        if self.resample_prob > 0.0:
            self._refill_events()

    def initial_observation(self):
        return self.state

    def _draw_row(self) -> np.ndarray:
        # Dirichlet(1/S, ...) via normalized Gamma(1/S, 1) draws.
        g = self._row_gen.gamma(1.0 / self.n_states, 1.0, size=self.n_states)
        total = g.sum()
        while total <= 0.0:
            g = self._row_gen.gamma(1.0 / self.n_states, 1.0, size=self.n_states)
            total = g.sum()
        return g / total

    def _rescale(self):
        self.goal_reward, self._q = goal_reward_scale(
            self.P, self.goal_state, self.plan_gamma, self.target_reward, self.vi_tol, q0=self._q
        )

    def _refill_events(self):
        mask = self._mask_gen.random((_EVENT_BLOCK, self._n_rows)) < self.resample_prob
        steps, rows = np.nonzero(mask)
        self._ev_steps = steps.tolist()
        self._ev_rows = rows.tolist()
        self._ev_ptr = 0
        self._ev_n = len(self._ev_steps)
        self._ev_pos = 0

    def step(self, action):
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action index {action} out of range")
        if self.resample_prob > 0.0:
            pos = self._ev_pos
            ptr = self._ev_ptr
            if ptr < self._ev_n and self._ev_steps[ptr] == pos:
                A = self.n_actions
                changed = False
                while ptr < self._ev_n and self._ev_steps[ptr] == pos:
                    flat = self._ev_rows[ptr]
                    s, a = divmod(flat, A)
                    row = self._draw_row()
                    self.P[s, a] = row
                    self._cum[s][a] = list(np.cumsum(row))
                    self.resample_events += 1
                    changed = True
                    ptr += 1
                self._ev_ptr = ptr
                if changed:
                    self._rescale()
            self._ev_pos = pos + 1
            if self._ev_pos == _EVENT_BLOCK:
                self._refill_events()
        cum = self._cum[self.state][action]
        nxt = bisect_right(cum, self._tr.uniform())
        if nxt >= self.n_states:
            nxt = self.n_states - 1
        self.state = nxt
        return nxt

    def reward(self, action, observation) -> float:
        return self.goal_reward if observation == self.goal_state else 0.0


_ENV_KINDS = {
    "ar1": Ar1ScalarEnv,
    "coin_swap": CoinSwapEnv,
    "ar1_bandit": GaussianAr1BanditEnv,
    "logit": LogitEnv,
    "bit_flip": BitFlipEnv,
    "goal_mdp": GoalMdpEnv,
}


def build_env(spec: dict):
    """Instantiate an environment from a {"kind": ..., **params} mapping."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    cls = _ENV_KINDS.get(kind)
    if cls is None:
        raise ConfigurationError(f"unknown env kind {kind!r}; known: {sorted(_ENV_KINDS)}")
    try:
        return cls(**spec)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for env {kind!r}: {exc}") from exc
