"""Finite-horizon backward planning over display positions.

Arms and positions are 0-based throughout: ``q[h, k]`` is the value of showing
arm ``k`` at position ``h`` and continuing optimally; ``v[H] == 0``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from mccb.errors import ConfigError

P_CLAMP = 1e-9
BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class PlanResult:
    q: np.ndarray  # (H, K)
    v: np.ndarray  # (H + 1,)
    best_arm: np.ndarray  # (H,)


def clamp_probs(probs):
    return np.clip(probs, P_CLAMP, 1.0 - P_CLAMP)


def _check(probs, rewards, H):
    probs = np.asarray(probs, dtype=float)
    rewards = np.asarray(rewards, dtype=float)
    if H < 1:
        raise ConfigError(f"horizon must be >= 1, got {H}")
    if probs.shape[-1] != rewards.shape[-1]:
        raise ConfigError("probabilities and rewards disagree on K")
    if np.any(rewards <= 0):
        raise ConfigError("rewards must be > 0")
    return probs, rewards


def backward_plan(probs, rewards, H: int) -> PlanResult:
    """Backward value iteration for a single context; ties go to the lowest arm."""
    probs, rewards = _check(probs, rewards, H)
    if probs.ndim != 1:
        raise ConfigError("backward_plan takes one probability vector; use plan_batch")
    if np.any((probs <= 0) | (probs >= 1)):
        raise ConfigError(f"click probabilities must lie in (0, 1), got {probs}")
    q, v, best = plan_batch(probs[None, :], rewards, H)
    return PlanResult(q[:, 0, :], v[:, 0], best[:, 0])


def plan_batch(probs: np.ndarray, rewards: np.ndarray, H: int):
    """Vectorized planning for many contexts.

    probs has shape (N, K). Returns q (H, N, K), v (H+1, N), best (H, N).
    """
    N, K = probs.shape
    immediate = probs * rewards[None, :]
    miss = 1.0 - probs
    q = np.empty((H, N, K))
    v = np.zeros((H + 1, N))
    best = np.empty((H, N), dtype=int)
    for h in range(H - 1, -1, -1):
        q[h] = immediate + miss * v[h + 1][:, None]
        best[h] = np.argmax(q[h], axis=1)  # first maximum = lowest index
        v[h] = q[h][np.arange(N), best[h]]
    return q, v, best


def sequence_value(arms, probs, rewards) -> float:
    """Expected reward of showing ``arms`` in order until the first click."""
    probs = np.asarray(probs, float)
    rewards = np.asarray(rewards, float)
    arms = np.asarray(arms, dtype=int)
    f = probs[arms]
    survive = np.concatenate(([1.0], np.cumprod(1.0 - f)[:-1]))
    return float(np.sum(survive * f * rewards[arms]))


def oracle_policy_value(arm_sequence, probs, rewards) -> float:
    return sequence_value(arm_sequence, probs, rewards)


def sequence_values(arms: np.ndarray, probs: np.ndarray, rewards: np.ndarray) -> np.ndarray:
    """Row-wise :func:`sequence_value`; arms (N, H), probs (N, K)."""
    N = arms.shape[0]
    f = probs[np.arange(N)[:, None], arms]
    survive = np.ones_like(f)
    survive[:, 1:] = np.cumprod(1.0 - f, axis=1)[:, :-1]
    return np.sum(survive * f * rewards[arms], axis=1)


def brute_force_value(probs, rewards, H: int):
    """Enumerate all K**H arm sequences; returns (best value, best sequence)."""
    probs, rewards = _check(probs, rewards, H)
    K = probs.size
    if K**H > BRUTE_FORCE_LIMIT:
        raise ConfigError(f"K**H = {K**H} sequences exceeds {BRUTE_FORCE_LIMIT}; use a smaller instance")
    best_val, best_seq = -np.inf, None
    for seq in itertools.product(range(K), repeat=H):
        val = 0.0
        alive = 1.0
        for k in seq:
            val += alive * probs[k] * rewards[k]
            alive *= 1.0 - probs[k]
        if val > best_val:
            best_val, best_seq = val, seq
    return best_val, np.array(best_seq)
