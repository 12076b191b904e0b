"""Multi-user cascading environment: contexts, logistic clicks, absorbing sessions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from mccb.errors import ConfigError, ContractError
from mccb.glm import joint_feature, sigmoid

SKIP = -1

# Stream tags for counter-based substreams. A draw is addressed by
# (root seed, tag, episode); cell (n, h) of the episode block belongs to
# user n at step h, so policies cannot perturb environment randomness.
TAG_THETA = 1
TAG_REWARDS = 2
TAG_CONTEXTS = 3
TAG_CLICKS = 4
TAG_EPSILON = 5


def substream(seed: int, tag: int, *keys: int) -> np.random.Generator:
    """Deterministic generator keyed by ``(seed, tag, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag), *map(int, keys)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ArmCatalog:
    rewards: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rewards, dtype=float)
        if r.ndim != 1 or r.size == 0:
            raise ConfigError("reward vector must be a non-empty 1-d array")
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise ConfigError(f"arm rewards must be finite and > 0, got {r}")
        object.__setattr__(self, "rewards", r)

    @property
    def K(self) -> int:
        return self.rewards.size

    @property
    def e_max(self) -> float:
        return float(self.rewards.max())


@dataclass(frozen=True)
class TrueModel:
    theta: np.ndarray
    d: int
    K: int

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        if th.shape != (self.d + self.K,):
            raise ConfigError(f"theta must have length d+K={self.d + self.K}, got {th.shape}")
        object.__setattr__(self, "theta", th)

    def probs(self, contexts: np.ndarray) -> np.ndarray:
        """Click probabilities for every (user, arm) pair, shape (N, K)."""
        contexts = np.atleast_2d(contexts)
        return sigmoid(contexts @ self.theta[: self.d][:, None] + self.theta[self.d :][None, :])


def click_probability(model: TrueModel, z: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    if z.shape != model.theta.shape:
        raise ValueError(f"joint feature has length {z.size}, expected {model.theta.size}")
    return sigmoid(float(z @ model.theta))


def sample_contexts(
    rng: np.random.Generator, N: int, d: int, clip_norm: Optional[float] = None
) -> np.ndarray:
    """N i.i.d. standard-normal contexts of dimension d, optionally norm-clipped."""
    if N < 1 or d < 1:
        raise ConfigError(f"need N >= 1 and d >= 1, got N={N}, d={d}")
    x = rng.standard_normal((N, d))
    if clip_norm is not None:
        norms = np.linalg.norm(x, axis=1)
        scale = np.minimum(1.0, clip_norm / np.maximum(norms, 1e-300))
        x = x * scale[:, None]
    return x


@dataclass
class SessionState:
    user_index: int
    step: int = 1
    absorbed: bool = False
    absorbing_step: Optional[int] = None


@dataclass(frozen=True)
class Observation:
    episode: int
    user: int
    step: int
    z: np.ndarray
    arm: int
    reward: float


def step_session(
    state: SessionState,
    arm: int,
    model: TrueModel,
    context: np.ndarray,
    catalog: ArmCatalog,
    u: float,
    H: int,
    episode: int = 0,
) -> tuple[Observation, SessionState]:
    """Advance one user by one display step.

    ``u`` is the uniform draw owned by this (episode, user, step) cell; a
    click happens iff ``u < sigma(z^T theta)``. Skips consume the step without
    using the draw. Arms are 0-based.
    """
    if state.absorbed:
        raise ContractError(f"user {state.user_index} is already absorbed")
    if state.step > H:
        raise ContractError(f"user {state.user_index} session already ended at step {state.step}")
    h = state.step
    if arm == SKIP:
        z = np.concatenate([np.asarray(context, float), np.zeros(catalog.K)])
        obs = Observation(episode, state.user_index, h, z, SKIP, 0.0)
        return obs, SessionState(state.user_index, h + 1, False, None)
    if not 0 <= arm < catalog.K:
        raise ContractError(f"unknown arm id {arm}")
    z = joint_feature(context, arm, catalog.K)
    if u < click_probability(model, z):
        reward = float(catalog.rewards[arm])
        return Observation(episode, state.user_index, h, z, arm, reward), SessionState(
            state.user_index, h, True, h
        )
    return Observation(episode, state.user_index, h, z, arm, 0.0), SessionState(
        state.user_index, h + 1, False, None
    )


@dataclass
class EpisodeLog:
    """Columnar record of one episode's pre-absorption observations."""

    episode: int
    K: int
    contexts: np.ndarray
    users: np.ndarray
    steps: np.ndarray
    arms: np.ndarray
    rewards: np.ndarray
    absorbing_step: np.ndarray  # per user; H when never absorbed
    absorbed: np.ndarray
    played: np.ndarray = field(repr=False)  # (N, H) realized arms, SKIP after absorption
    modes: np.ndarray = field(repr=False)  # (N, H) mode labels, "" after absorption

    def __len__(self) -> int:
        return self.users.size

    def joint_features(self) -> np.ndarray:
        K = self.K
        Z = np.zeros((len(self), self.contexts.shape[1] + K))
        Z[:, : self.contexts.shape[1]] = self.contexts[self.users]
        Z[np.arange(len(self)), self.contexts.shape[1] + self.arms] = 1.0
        return Z

    def observations(self) -> Iterator[Observation]:
        Z = self.joint_features()
        for i in range(len(self)):
            yield Observation(
                self.episode,
                int(self.users[i]),
                int(self.steps[i]) + 1,
                Z[i],
                int(self.arms[i]),
                float(self.rewards[i]),
            )


def run_episode(
    policy,
    contexts: np.ndarray,
    model: TrueModel,
    catalog: ArmCatalog,
    H: int,
    uniforms: np.ndarray,
    episode: int = 0,
) -> EpisodeLog:
    """Play one episode for all N users.

    ``policy.decide(h, users)`` returns arms and mode labels for the still-active
    users at 0-based step h. ``uniforms`` has shape (N, H). Click semantics are
    those of :func:`step_session`, vectorized across users.
    """
    N = contexts.shape[0]
    probs = model.probs(contexts)
    active = np.ones(N, dtype=bool)
    absorbing_step = np.full(N, H, dtype=int)
    played = np.full((N, H), SKIP, dtype=int)
    modes = np.full((N, H), "", dtype=object)
    users, steps, arms, rewards = [], [], [], []
    for h in range(H):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        k, m = policy.decide(h, idx)
        k = np.asarray(k, dtype=int)
        if np.any((k < 0) | (k >= catalog.K)):
            raise ContractError(f"policy emitted an arm outside [0, {catalog.K})")
        played[idx, h] = k
        modes[idx, h] = m
        click = uniforms[idx, h] < probs[idx, k]
        users.append(idx)
        steps.append(np.full(idx.size, h))
        arms.append(k)
        rewards.append(np.where(click, catalog.rewards[k], 0.0))
        hit = idx[click]
        active[hit] = False
        absorbing_step[hit] = h + 1
    return EpisodeLog(
        episode=episode,
        K=catalog.K,
        contexts=contexts,
        users=np.concatenate(users) if users else np.zeros(0, int),
        steps=np.concatenate(steps) if steps else np.zeros(0, int),
        arms=np.concatenate(arms) if arms else np.zeros(0, int),
        rewards=np.concatenate(rewards) if rewards else np.zeros(0),
        absorbing_step=absorbing_step,
        absorbed=~active,
        played=played,
        modes=modes,
    )
