"""Arm-selection rules: warm-up, UCBBP, AUCBBP, greedy, epsilon-greedy, oracle.

Each episode a policy is handed the contexts and a frozen model snapshot in
``begin_episode``. Decisions after warm-up depend only on that snapshot and the
contexts (plus pre-drawn randomness for epsilon-greedy), so the full length-H
plan per user is known up front; ``counterfactual_arms`` exposes it for exact
regret scoring.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from mccb.env import SKIP, TAG_EPSILON, ArmCatalog, TrueModel, substream
from mccb.errors import ConfigError
from mccb.glm import ModelState, joint_features_all, sigmoid, ucb_widths
from mccb.planner import clamp_probs, plan_batch

log = logging.getLogger(__name__)

WARMUP, UCB, GREEDY, RANDOM = "warmup", "ucb", "greedy", "random"


@dataclass(frozen=True)
class PolicyDecision:
    user: int
    step: int
    arm: int
    mode: str
    index: Optional[np.ndarray] = field(default=None, compare=False)


@dataclass(frozen=True)
class ScheduleConfig:
    T: int
    T0: int
    N: int
    epsilon: float = 0.1

    def __post_init__(self):
        if not 1 <= self.T0 < self.T:
            raise ConfigError(f"need 1 <= T0 < T, got T0={self.T0}, T={self.T}")
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")


class RoundRobin:
    """Single run-wide counter cycling through the arms."""

    def __init__(self, K: int):
        self.K = K
        self.count = 0

    def next(self) -> int:
        arm = self.count % self.K
        self.count += 1
        return arm


def select_warmup(rr: RoundRobin) -> int:
    return rr.next()


def compute_Mt(t: int, N: int, T: int) -> int:
    """UCB budget max(1, floor(N exp(-t / ln T))) for episode t (1-based)."""
    if T < 2:
        raise ConfigError(f"M_t schedule needs T >= 2, got {T}")
    if t < 1 or N < 1:
        raise ConfigError(f"need t >= 1 and N >= 1, got t={t}, N={N}")
    return max(1, math.floor(N * math.exp(-t / math.log(T))))


def estimated_probs(contexts: np.ndarray, theta_hat: np.ndarray, K: int) -> np.ndarray:
    d = contexts.shape[1]
    return sigmoid(contexts @ theta_hat[:d][:, None] + theta_hat[d:][None, :])


def index_tables(contexts, model: ModelState, beta: float, rewards, H: int):
    """Planned values, widths and UCB/greedy arm choices for every (h, n).

    Returns q (H, N, K), widths (N, K), k_ucb (H, N), k_greedy (H, N).
    """
    K = rewards.size
    probs = clamp_probs(estimated_probs(contexts, model.theta_hat, K))
    q, _, k_greedy = plan_batch(probs, rewards, H)
    widths = ucb_widths(joint_features_all(contexts, K), model)
    if beta == 0.0:
        return q, widths, k_greedy.copy(), k_greedy
    k_ucb = np.argmax(q + beta * widths[None, :, :], axis=2)
    return q, widths, k_ucb, k_greedy


def ucb_choice(q_row, widths, beta: float) -> tuple[int, np.ndarray]:
    """argmax_k q[k] + beta * width[k] (lowest index on ties) and the index values."""
    index = np.asarray(q_row, float) + beta * np.asarray(widths, float)
    return int(np.argmax(index)), index


def select_ucbbp(x, h: int, model: ModelState, beta: float, catalog: ArmCatalog, H: int, user: int = 0):
    """UCB arm for one context at 0-based step h; ``index`` holds U(k) for all arms."""
    q, widths, _, _ = index_tables(np.atleast_2d(x), model, beta, catalog.rewards, H)
    arm, index = ucb_choice(q[h, 0], widths[0], beta)
    return PolicyDecision(user, h, arm, UCB, index)


def top_m(scores: np.ndarray, m: int) -> np.ndarray:
    """Indices of the m largest scores; ties favour the lower index."""
    order = np.lexsort((np.arange(scores.size), -scores))
    return order[:m]


def select_aucbbp(contexts, h: int, model: ModelState, beta: float, catalog: ArmCatalog, H: int, M_t: int,
                  absorbed: Optional[np.ndarray] = None) -> list[PolicyDecision]:
    """AUCBBP decisions at step h for every non-absorbed user."""
    contexts = np.atleast_2d(contexts)
    N = contexts.shape[0]
    if M_t > N:
        log.warning("M_t=%d exceeds N=%d; clamping", M_t, N)
        M_t = N
    q, widths, k_ucb, k_greedy = index_tables(contexts, model, beta, catalog.rewards, H)
    scores = widths[np.arange(N), k_ucb[h]] ** 2
    explore = np.zeros(N, dtype=bool)
    explore[top_m(scores, M_t)] = True
    absorbed = np.zeros(N, dtype=bool) if absorbed is None else np.asarray(absorbed, bool)
    out = []
    for n in range(N):
        if absorbed[n]:
            continue
        if explore[n]:
            out.append(PolicyDecision(n, h, int(k_ucb[h, n]), UCB, q[h, n] + beta * widths[n]))
        else:
            out.append(PolicyDecision(n, h, int(k_greedy[h, n]), GREEDY, q[h, n]))
    return out


def select_epsilon_greedy(x, h: int, model: ModelState, catalog: ArmCatalog, H: int, epsilon: float,
                          rng: np.random.Generator, user: int = 0) -> PolicyDecision:
    u, arm = rng.random(), int(rng.integers(catalog.K))
    if u < epsilon:
        return PolicyDecision(user, h, arm, RANDOM)
    q, _, _, k_greedy = index_tables(np.atleast_2d(x), model, 0.0, catalog.rewards, H)
    return PolicyDecision(user, h, int(k_greedy[h, 0]), GREEDY, q[h, 0])


class Policy:
    """Base class: per-episode planned sequences plus warm-up handling."""

    name = "base"
    uses_warmup = True

    def __init__(self, catalog: ArmCatalog, H: int, schedule: ScheduleConfig, seed: int = 0):
        self.catalog = catalog
        self.K = catalog.K
        self.H = H
        self.schedule = schedule
        self.seed = seed
        self.rr = RoundRobin(self.K)
        self._plan = None
        self._modes = None
        self._warm = False

    def in_warmup(self, t: int) -> bool:
        return self.uses_warmup and t <= self.schedule.T0

    def begin_episode(self, t: int, contexts: np.ndarray, model: ModelState, beta: float) -> None:
        self.t = t
        self.contexts = contexts
        self._warm = self.in_warmup(t)
        self.beta = beta
        if self._warm:
            self._plan = None
            self._modes = None
        else:
            self._plan, self._modes = self.plan(t, contexts, model, beta)

    def plan(self, t, contexts, model, beta):
        """Return (arms, modes), each of shape (N, H)."""
        raise NotImplementedError

    def decide(self, h: int, users: np.ndarray):
        if self._warm:
            arms = np.array([self.rr.next() for _ in users], dtype=int)
            return arms, np.full(users.size, WARMUP, dtype=object)
        return self._plan[users, h], self._modes[users, h]

    def counterfactual_arms(self, played: np.ndarray) -> np.ndarray:
        """Length-H plan per user as if nobody had clicked.

        Outside warm-up this is the precomputed plan. During warm-up the
        realized prefix is kept and each user's round-robin continues
        cyclically from their last shown arm.
        """
        if not self._warm:
            return self._plan
        arms = played.copy()
        for n in range(arms.shape[0]):
            for h in range(1, self.H):
                if arms[n, h] == SKIP:
                    arms[n, h] = (arms[n, h - 1] + 1) % self.K
        return arms


class UCBBP(Policy):
    name = "ucbbp"

    def plan(self, t, contexts, model, beta):
        _, _, k_ucb, _ = index_tables(contexts, model, beta, self.catalog.rewards, self.H)
        return k_ucb.T.copy(), np.full(k_ucb.T.shape, UCB, dtype=object)


class AUCBBP(Policy):
    name = "aucbbp"

    def plan(self, t, contexts, model, beta):
        N = contexts.shape[0]
        _, widths, k_ucb, k_greedy = index_tables(contexts, model, beta, self.catalog.rewards, self.H)
        M_t = min(compute_Mt(t, self.schedule.N, self.schedule.T), N)
        self.M_t = M_t
        arms = k_greedy.T.copy()
        modes = np.full(arms.shape, GREEDY, dtype=object)
        for h in range(self.H):
            scores = widths[np.arange(N), k_ucb[h]] ** 2
            chosen = top_m(scores, M_t)
            arms[chosen, h] = k_ucb[h, chosen]
            modes[chosen, h] = UCB
        return arms, modes


class Greedy(Policy):
    name = "greedy"
    uses_warmup = False

    def plan(self, t, contexts, model, beta):
        _, _, _, k_greedy = index_tables(contexts, model, 0.0, self.catalog.rewards, self.H)
        return k_greedy.T.copy(), np.full(k_greedy.T.shape, GREEDY, dtype=object)


class EpsilonGreedy(Policy):
    """Greedy on the planned values, replaced by a uniform arm with probability epsilon.

    The coin and the random arm for every (user, step) cell are drawn up front
    from a stream keyed by (seed, episode), so the realized sequence is recorded
    and scored exactly.
    """

    name = "epsilon-greedy"
    uses_warmup = False

    def plan(self, t, contexts, model, beta):
        N = contexts.shape[0]
        rng = substream(self.seed, TAG_EPSILON, t)
        coins = rng.random((N, self.H))
        random_arms = rng.integers(self.K, size=(N, self.H))
        _, _, _, k_greedy = index_tables(contexts, model, 0.0, self.catalog.rewards, self.H)
        explore = coins < self.schedule.epsilon
        arms = np.where(explore, random_arms, k_greedy.T)
        modes = np.where(explore, RANDOM, GREEDY).astype(object)
        return arms, modes


class Oracle(Policy):
    """Plans with the true parameter; scores zero pseudo-regret by construction."""

    name = "oracle"
    uses_warmup = False

    def __init__(self, catalog, H, schedule, true_model: TrueModel, seed: int = 0):
        super().__init__(catalog, H, schedule, seed)
        self.true_model = true_model

    def plan(self, t, contexts, model, beta):
        probs = clamp_probs(self.true_model.probs(contexts))
        _, _, best = plan_batch(probs, self.catalog.rewards, self.H)
        return best.T.copy(), np.full(best.T.shape, GREEDY, dtype=object)


POLICIES = {
    "ucbbp": UCBBP,
    "aucbbp": AUCBBP,
    "greedy": Greedy,
    "epsilon-greedy": EpsilonGreedy,
    "oracle": Oracle,
}


def make_policy(name: str, catalog: ArmCatalog, H: int, schedule: ScheduleConfig, seed: int,
                true_model: Optional[TrueModel] = None) -> Policy:
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ConfigError(f"unknown algorithm {name!r}; choose from {sorted(POLICIES)}") from None
    if cls is Oracle:
        return cls(catalog, H, schedule, true_model, seed)
    return cls(catalog, H, schedule, seed)
