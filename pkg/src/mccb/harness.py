"""Experiment orchestration: episode loop, exact pseudo-regret, sweeps and CSV output."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from mccb.env import (
    TAG_CLICKS,
    TAG_CONTEXTS,
    TAG_REWARDS,
    TAG_THETA,
    ArmCatalog,
    TrueModel,
    run_episode,
    sample_contexts,
    substream,
)
from mccb.errors import ConfigError, InvariantError
from mccb.glm import ConfidenceConfig, ModelState, check_state, confidence_radius, irls_update, refit_mle
from mccb.planner import clamp_probs, plan_batch, sequence_values
from mccb.policies import AUCBBP, POLICIES, ScheduleConfig, make_policy

log = logging.getLogger(__name__)

ESTIMATORS = ("paper-irls", "mle-refit")
BETA_MODES = ("theory", "fixed")
CSV_HEADER = ["t", "episode_regret", "cum_regret", "time_avg_regret", "ctx_avg_regret", "M_t", "theta_err"]


@dataclass
class ExperimentConfig:
    d: int = 5
    K: int = 10
    N: int = 50
    H: int = 5
    T: int = 2000
    T0: int = 20
    lam: float = 1.0
    delta: float = 0.1
    seeds: list = field(default_factory=lambda: list(range(10)))
    algorithm: str = "ucbbp"
    estimator: str = "paper-irls"
    epsilon: float = 0.1
    rewards: Optional[list] = None
    reward_range: tuple = (0.5, 2.0)
    theta: Optional[list] = None
    theta_norm: float = 1.0
    clip: bool = False
    c_x: Optional[float] = None
    beta_mode: str = "fixed"
    beta_scale: float = 1.0
    beta_c: float = 1.0
    check_invariants: bool = True
    output: Optional[str] = None

    def __post_init__(self):
        self.seeds = [int(s) for s in self.seeds]
        self.reward_range = tuple(self.reward_range)
        self.validate()

    def validate(self) -> None:
        for name in ("d", "K", "N", "H", "T", "T0"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.T0 >= self.T:
            raise ConfigError(f"warm-up T0={self.T0} must be < T={self.T}")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if self.algorithm not in POLICIES:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {sorted(POLICIES)}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}; choose from {ESTIMATORS}")
        if self.beta_mode not in BETA_MODES:
            raise ConfigError(f"unknown beta_mode {self.beta_mode!r}; choose from {BETA_MODES}")
        if self.rewards is not None:
            if len(self.rewards) != self.K or min(self.rewards) <= 0:
                raise ConfigError("explicit rewards need K entries, all > 0")
        else:
            lo, hi = self.reward_range
            if not 0 < lo <= hi:
                raise ConfigError(f"reward_range must satisfy 0 < lo <= hi, got {self.reward_range}")
        if self.theta is not None and len(self.theta) != self.d + self.K:
            raise ConfigError(f"explicit theta needs d+K={self.d + self.K} entries")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        ConfidenceConfig(self.lam, self.delta, self.c_z, 1.0, self.beta_scale)

    @property
    def clip_bound(self) -> float:
        return self.c_x if self.c_x is not None else math.sqrt(self.d) + 3.0

    @property
    def c_z(self) -> float:
        return math.sqrt(self.clip_bound**2 + 1.0)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls.from_dict(doc)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def make_instance(cfg: ExperimentConfig, seed: int) -> tuple[TrueModel, ArmCatalog]:
    """True parameter and arm rewards for one seed."""
    if cfg.theta is not None:
        theta = np.asarray(cfg.theta, float)
    else:
        raw = substream(seed, TAG_THETA).standard_normal(cfg.d + cfg.K)
        theta = cfg.theta_norm * raw / np.linalg.norm(raw)
    if cfg.rewards is not None:
        rewards = np.asarray(cfg.rewards, float)
    else:
        lo, hi = cfg.reward_range
        rewards = substream(seed, TAG_REWARDS).uniform(lo, hi, cfg.K)
    return TrueModel(theta, cfg.d, cfg.K), ArmCatalog(rewards)


def compute_episode_regret(contexts, true_model: TrueModel, arm_plans: np.ndarray, catalog: ArmCatalog, H: int):
    """Exact per-user oracle and policy values.

    ``arm_plans`` holds each user's length-H sequence as played absent
    absorption. Returns (oracle values, policy values), each of shape (N,).
    """
    probs = true_model.probs(contexts)
    _, v, best = plan_batch(clamp_probs(probs), catalog.rewards, H)
    v_star = sequence_values(best.T, probs, catalog.rewards)
    if np.max(np.abs(v_star - v[0])) > 1e-9:
        raise InvariantError("oracle plan value disagrees with backward planning")
    v_pi = sequence_values(np.asarray(arm_plans, int), probs, catalog.rewards)
    return v_star, v_pi


@dataclass
class RunResult:
    algorithm: str
    seed: int
    t: np.ndarray
    oracle_value: np.ndarray
    policy_value: np.ndarray
    episode_regret: np.ndarray
    cum_regret: np.ndarray
    time_avg_regret: np.ndarray
    ctx_avg_regret: np.ndarray
    M_t: np.ndarray  # 0 where not applicable
    theta_err: np.ndarray
    invariant_checks: int = 0
    invariant_violations: list = field(default_factory=list)
    final_state: Optional[ModelState] = None

    def rows(self):
        for i in range(self.t.size):
            yield [
                int(self.t[i]),
                self.episode_regret[i],
                self.cum_regret[i],
                self.time_avg_regret[i],
                self.ctx_avg_regret[i],
                int(self.M_t[i]) if self.M_t[i] > 0 else "",
                self.theta_err[i],
            ]


class _History:
    """Growable (Z, y) store for the refit estimator."""

    def __init__(self, dim: int):
        self.Z = np.empty((1024, dim))
        self.y = np.empty(1024)
        self.n = 0

    def extend(self, Z, y):
        need = self.n + Z.shape[0]
        if need > self.Z.shape[0]:
            cap = max(need, 2 * self.Z.shape[0])
            self.Z = np.resize(self.Z, (cap, self.Z.shape[1]))
            self.y = np.resize(self.y, cap)
        self.Z[self.n : need] = Z
        self.y[self.n : need] = y
        self.n = need


def beta_for_episode(cfg: ExperimentConfig, t: int, pulls: int, e_max: float) -> float:
    if cfg.beta_mode == "fixed":
        return cfg.beta_c * math.sqrt(math.log(1.0 + t))
    if pulls < 1:
        return 0.0
    conf = ConfidenceConfig(cfg.lam, cfg.delta, cfg.c_z, e_max, cfg.beta_scale)
    return confidence_radius(pulls, cfg.d, cfg.K, conf)


def run_seed(
    cfg: ExperimentConfig,
    seed: int,
    on_episode: Optional[Callable] = None,
    episodes: Optional[int] = None,
) -> RunResult:
    """One seed of one algorithm.

    ``episodes`` stops the run early while the schedule still uses ``cfg.T``.

    ``on_episode(t, snapshot, contexts, arm_plans, v_star, v_pi)`` is called
    after scoring each episode, with the model state that was in force.
    """
    true_model, catalog = make_instance(cfg, seed)
    schedule = ScheduleConfig(cfg.T, cfg.T0, cfg.N, cfg.epsilon)
    policy = make_policy(cfg.algorithm, catalog, cfg.H, schedule, seed, true_model)
    dim = cfg.d + cfg.K
    state = ModelState.fresh(dim, cfg.lam)
    history = _History(dim) if cfg.estimator == "mle-refit" else None
    clip = cfg.clip_bound if cfg.clip else None

    T = cfg.T if episodes is None else min(int(episodes), cfg.T)
    out = {k: np.zeros(T) for k in ("oracle", "policy", "regret", "err")}
    m_t = np.zeros(T, dtype=int)
    violations: list = []
    checks = 0
    prev_eigs = np.full(dim, cfg.lam) if cfg.check_invariants else None

    for t in range(1, T + 1):
        contexts = sample_contexts(substream(seed, TAG_CONTEXTS, t), cfg.N, cfg.d, clip)
        beta = beta_for_episode(cfg, t, state.pulls, catalog.e_max)
        snapshot = state
        policy.begin_episode(t, contexts, snapshot, beta)
        uniforms = substream(seed, TAG_CLICKS, t).random((cfg.N, cfg.H))
        ep = run_episode(policy, contexts, true_model, catalog, cfg.H, uniforms, episode=t)
        plans = policy.counterfactual_arms(ep.played)
        v_star, v_pi = compute_episode_regret(contexts, true_model, plans, catalog, cfg.H)
        regret = float(np.sum(v_star - v_pi))
        if regret < -1e-9:
            raise InvariantError(f"seed {seed} episode {t}: negative regret {regret:.3g}")
        i = t - 1
        out["oracle"][i] = v_star.sum()
        out["policy"][i] = v_pi.sum()
        out["regret"][i] = regret
        out["err"][i] = np.linalg.norm(snapshot.theta_hat - true_model.theta)
        if isinstance(policy, AUCBBP) and not policy.in_warmup(t):
            m_t[i] = policy.M_t
        if on_episode is not None:
            on_episode(t, snapshot, contexts, plans, v_star, v_pi)

        Z = ep.joint_features()
        r = ep.rewards
        e = catalog.rewards[ep.arms]
        if history is None:
            state = irls_update(state, (Z, r, e))
        else:
            history.extend(Z, r / e)
            if history.n:
                state = refit_mle(history.Z[: history.n], history.y[: history.n], cfg.lam, theta0=state.theta_hat)
        if cfg.check_invariants:
            problems, eigs = check_state(
                state, prev_eigs if history is None else None, cfg.lam
            )
            checks += 1
            prev_eigs = eigs
            if problems:
                violations.append((t, problems))
                raise InvariantError(f"seed {seed} episode {t}: estimator invariant breach: {problems}")

    t_axis = np.arange(1, T + 1)
    cum = np.cumsum(out["regret"])
    return RunResult(
        algorithm=cfg.algorithm,
        seed=seed,
        t=t_axis,
        oracle_value=out["oracle"],
        policy_value=out["policy"],
        episode_regret=out["regret"],
        cum_regret=cum,
        time_avg_regret=cum / t_axis,
        ctx_avg_regret=cum / cfg.N,
        M_t=m_t,
        theta_err=out["err"],
        invariant_checks=checks,
        invariant_violations=violations,
        final_state=state,
    )


@dataclass
class ResultSet:
    config: ExperimentConfig
    runs: list
    tag: Optional[str] = None

    def stack(self, metric: str) -> np.ndarray:
        return np.vstack([getattr(r, metric) for r in self.runs])

    def mean(self, metric: str) -> np.ndarray:
        return self.stack(metric).mean(axis=0)

    def std(self, metric: str) -> np.ndarray:
        data = self.stack(metric)
        return data.std(axis=0, ddof=1) if data.shape[0] > 1 else np.zeros(data.shape[1])

    def write(self, out_dir) -> list[Path]:
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            paths = []
            for run in self.runs:
                path = out_dir / f"{run.algorithm}_seed{run.seed}.csv"
                with path.open("w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(CSV_HEADER)
                    for row in run.rows():
                        w.writerow([_fmt(v) for v in row])
                paths.append(path)
            paths.append(self._write_aggregate(out_dir))
        except OSError as exc:
            raise OSError(f"failed writing results under {out_dir}: {exc}") from exc
        return paths

    def _write_aggregate(self, out_dir: Path) -> Path:
        metrics = ["episode_regret", "cum_regret", "time_avg_regret", "ctx_avg_regret", "theta_err"]
        header = ["t"]
        for m in metrics:
            header += [f"{m}_mean", f"{m}_std"]
        header.append("M_t")
        cols = [self.runs[0].t] + [f(m) for m in metrics for f in (self.mean, self.std)]
        m_t = self.runs[0].M_t
        path = out_dir / f"{self.config.algorithm}_aggregate.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(cols[0].size):
                row = [int(cols[0][i])] + [_fmt(c[i]) for c in cols[1:]]
                row.append(int(m_t[i]) if m_t[i] > 0 else "")
                w.writerow(row)
        return path


def _fmt(v):
    if isinstance(v, (int, np.integer)) or v == "":
        return v
    return f"{float(v):.12g}"


def _run_seed_job(args):
    cfg, seed, episodes = args
    return run_seed(cfg, seed, episodes=episodes)


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int = 1, episodes: Optional[int] = None) -> ResultSet:
    """All seeds of one config; writes CSVs when an output directory is given."""
    jobs = [(cfg, s, episodes) for s in cfg.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_seed_job, jobs))
    else:
        runs = [_run_seed_job(j) for j in jobs]
    result = ResultSet(cfg, runs)
    target = out_dir if out_dir is not None else cfg.output
    if target is not None:
        result.write(target)
    return result


def parse_axis(spec: str) -> tuple[str, list]:
    """Parse ``name=v1,v2,...`` into a field name and typed values."""
    if "=" not in spec:
        raise ConfigError(f"axis must look like name=v1,v2,..., got {spec!r}")
    name, raw = spec.split("=", 1)
    name = name.strip()
    values = [v.strip() for v in raw.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep axis is empty")
    known = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    if name not in known:
        raise ConfigError(f"unknown sweep axis {name!r}")
    if name in ("algorithm", "estimator", "beta_mode"):
        return name, values
    if name in ("lam", "delta", "epsilon", "beta_scale", "beta_c", "theta_norm"):
        return name, [float(v) for v in values]
    return name, [int(v) for v in values]


def run_sweep(cfg: ExperimentConfig, axis: str, values: Sequence, out_dir=None, workers: int = 1) -> list[ResultSet]:
    """Run one experiment per axis value; results are tagged ``axis=value``."""
    if not values:
        raise ConfigError("sweep axis is empty")
    base = out_dir if out_dir is not None else cfg.output
    results = []
    for v in values:
        point = cfg.replace(**{axis: v, "output": None})
        tag = f"{axis}={v}"
        sub = Path(base) / tag if base is not None else None
        res = run_experiment(point, sub, workers)
        res.tag = tag
        results.append(res)
    return results
