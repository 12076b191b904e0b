"""Shared-parameter logistic estimator, UCB widths and the confidence radius."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from mccb.errors import ConfigError, ContractError

log = logging.getLogger(__name__)

W_FLOOR = 1e-12


def sigmoid(u):
    """Logistic function with overflow-safe branches; works on scalars and arrays."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out if out.ndim else float(out)


def joint_feature(x, k: int, K: int) -> np.ndarray:
    """Concatenate a context with the one-hot code of (0-based) arm ``k``."""
    if not 0 <= k < K:
        raise ConfigError(f"arm index {k} outside [0, {K})")
    x = np.asarray(x, dtype=float)
    z = np.zeros(x.size + K)
    z[: x.size] = x
    z[x.size + k] = 1.0
    return z


def joint_features_all(contexts: np.ndarray, K: int) -> np.ndarray:
    """All joint features, shape (N, K, d+K)."""
    N, d = contexts.shape
    Z = np.zeros((N, K, d + K))
    Z[:, :, :d] = contexts[:, None, :]
    Z[:, np.arange(K), d + np.arange(K)] = 1.0
    return Z


@dataclass
class ModelState:
    A: np.ndarray
    b: np.ndarray
    theta_hat: np.ndarray
    pulls: int = 0
    converged: bool = True
    _chol: Optional[tuple] = field(default=None, repr=False, compare=False)

    @classmethod
    def fresh(cls, dim: int, lam: float) -> "ModelState":
        if lam <= 0:
            raise ConfigError(f"ridge weight must be > 0, got {lam}")
        return cls(lam * np.eye(dim), np.zeros(dim), np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.b.size

    def factor(self):
        if self._chol is None:
            self._chol = cho_factor(self.A, lower=True, check_finite=False)
        return self._chol

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve(self.factor(), rhs, check_finite=False)

    def copy(self) -> "ModelState":
        return ModelState(self.A.copy(), self.b.copy(), self.theta_hat.copy(), self.pulls, self.converged)

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "A": self.A.ravel().tolist(),
                "b": self.b.tolist(),
                "theta_hat": self.theta_hat.tolist(),
                "pulls": self.pulls,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ModelState":
        doc = json.loads(text)
        p = int(doc["dim"])
        return cls(
            np.array(doc["A"], dtype=float).reshape(p, p),
            np.array(doc["b"], dtype=float),
            np.array(doc["theta_hat"], dtype=float),
            int(doc["pulls"]),
        )


def _as_batch(batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Accept a list of (z, r, e_k) tuples or a (Z, r, e) triple of arrays."""
    if isinstance(batch, tuple) and len(batch) == 3 and isinstance(batch[0], np.ndarray) and batch[0].ndim == 2:
        Z, r, e = batch
    else:
        items = list(batch)
        if not items:
            return np.zeros((0, 0)), np.zeros(0), np.ones(0)
        Z = np.array([it[0] for it in items], dtype=float)
        r = np.array([it[1] for it in items], dtype=float)
        e = np.array([it[2] for it in items], dtype=float)
    return np.asarray(Z, float), np.asarray(r, float), np.asarray(e, float)


def irls_update(state: ModelState, batch) -> ModelState:
    """One end-of-episode reweighted update.

    Every item is scored at the estimate entering the call, so the batch
    contributions commute. ``b`` accumulates raw residuals ``z (y - p)`` and the
    new estimate solves ``A theta = b``.
    """
    Z, r, e = _as_batch(batch)
    new = state.copy()
    if Z.shape[0] == 0:
        new.theta_hat = new.solve(new.b)
        return new
    if Z.shape[1] != state.dim:
        raise ValueError(f"joint features have length {Z.shape[1]}, expected {state.dim}")
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(r)) and np.all(np.isfinite(e))):
        raise ValueError("non-finite values in update batch")
    if np.any(e <= 0):
        raise ValueError("arm rewards must be > 0")
    y = r / e
    if np.any((y != 0.0) & (y != 1.0)):
        raise ValueError("rewards must be 0 or exactly the arm reward")
    p = sigmoid(Z @ state.theta_hat)
    w = np.maximum(p * (1.0 - p), W_FLOOR)
    new.A = state.A + (Z * w[:, None]).T @ Z
    new.A = 0.5 * (new.A + new.A.T)
    new.b = state.b + Z.T @ (y - p)
    new.pulls = state.pulls + Z.shape[0]
    try:
        new.theta_hat = new.solve(new.b)
    except np.linalg.LinAlgError as exc:  # A >= lambda I, so this is a fault
        raise ContractError("information matrix lost positive definiteness") from exc
    return new


def refit_mle(
    Z: np.ndarray,
    y: np.ndarray,
    lam: float,
    theta0: Optional[np.ndarray] = None,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> ModelState:
    """Ridge-regularized logistic MLE by damped Newton on normalized rewards ``y``.

    The returned state carries ``A = lam I + sum w z z^T`` at the final estimate
    and ``b = A theta_hat``. ``converged`` is False when the gradient tolerance
    was not met within ``max_iter`` iterations.
    """
    Z = np.asarray(Z, float)
    y = np.asarray(y, float)
    if Z.shape[0] == 0:
        raise ValueError("refit needs a non-empty history")
    p_dim = Z.shape[1]
    theta = np.zeros(p_dim) if theta0 is None else np.array(theta0, float)

    def objective(th):
        u = Z @ th
        return float(np.sum(np.logaddexp(0.0, u) - y * u) + 0.5 * lam * th @ th)

    converged = False
    f = objective(theta)
    for _ in range(max_iter):
        mu = sigmoid(Z @ theta)
        grad = Z.T @ (mu - y) + lam * theta
        if np.linalg.norm(grad) < tol:
            converged = True
            break
        w = np.maximum(mu * (1.0 - mu), W_FLOOR)
        hess = (Z * w[:, None]).T @ Z + lam * np.eye(p_dim)
        step = cho_solve(cho_factor(hess, lower=True), grad)
        decrement = float(grad @ step)
        if decrement < 1e-10 * (1.0 + abs(f)):
            # objective differences are below roundoff here; take the pure Newton step
            theta = theta - step
            f = objective(theta)
            continue
        t = 1.0
        while True:
            cand = theta - t * step
            fc = objective(cand)
            if fc <= f - 1e-4 * t * (grad @ step) or t < 1e-10:
                break
            t *= 0.5
        theta, f = cand, fc
    else:
        mu = sigmoid(Z @ theta)
        grad = Z.T @ (mu - y) + lam * theta
        converged = bool(np.linalg.norm(grad) < tol)
    if not converged:
        log.warning("logistic refit stopped after %d iterations", max_iter)
    mu = sigmoid(Z @ theta)
    w = np.maximum(mu * (1.0 - mu), W_FLOOR)
    A = lam * np.eye(p_dim) + (Z * w[:, None]).T @ Z
    A = 0.5 * (A + A.T)
    return ModelState(A, A @ theta, theta, Z.shape[0], converged)


def ucb_widths(Z: np.ndarray, state: ModelState) -> np.ndarray:
    """sqrt(z^T A^{-1} z) for each row of ``Z`` via a Cholesky solve."""
    Z = np.atleast_2d(np.asarray(Z, float))
    if Z.shape[-1] != state.dim:
        raise ValueError(f"joint features have length {Z.shape[-1]}, expected {state.dim}")
    flat = Z.reshape(-1, state.dim)
    Y = state.solve(flat.T)
    q = np.einsum("ij,ji->i", flat, Y)
    return np.sqrt(np.maximum(q, 0.0)).reshape(Z.shape[:-1])


def ucb_width(z, state: ModelState) -> float:
    z = np.asarray(z, float)
    if z.shape != (state.dim,):
        raise ValueError(f"joint feature has length {z.size}, expected {state.dim}")
    return float(ucb_widths(z[None, :], state)[0])


@dataclass(frozen=True)
class ConfidenceConfig:
    lam: float
    delta: float
    c_z: float
    e_max: float
    scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        for name in ("lam", "c_z", "e_max", "scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def kappa(self) -> float:
        return math.sqrt(3.0 + 2.0 * math.log(1.0 + self.c_z**2 / (8.0 * self.lam)))


def confidence_radius(pulls: int, d: int, K: int, cfg: ConfidenceConfig) -> float:
    """Theoretical radius scale*kappa*e_max*c_z*sqrt(2(d+K) log T log((d+K)/delta))."""
    if pulls < 1:
        raise ConfigError(f"radius needs at least one pull, got {pulls}")
    p = d + K
    return (
        cfg.scale
        * cfg.kappa
        * cfg.e_max
        * cfg.c_z
        * math.sqrt(2.0 * p * math.log(pulls) * math.log(p / cfg.delta))
    )


def check_state(state: ModelState, prev_eigs: Optional[np.ndarray] = None, lam: Optional[float] = None):
    """Return (violations, sorted eigenvalues) for the estimator invariants."""
    problems = []
    A = state.A
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > 1e-10 * scale:
        problems.append("A not symmetric")
    eigs = np.linalg.eigvalsh(A)
    if lam is not None and eigs[0] < lam * (1 - 1e-9):
        problems.append(f"min eigenvalue {eigs[0]:.3g} below lambda {lam}")
    if prev_eigs is not None and np.any(eigs < prev_eigs - 1e-9 * max(1.0, float(prev_eigs[-1]))):
        problems.append("sorted eigenvalues decreased")
    resid = np.abs(A @ state.theta_hat - state.b).max()
    if resid >= 1e-8 * (1.0 + np.abs(state.b).max()):
        problems.append(f"solve residual {resid:.3g}")
    return problems, eigs
