"""Multi-user contextual cascading bandits: environment, UCBBP/AUCBBP, exact regret."""

from mccb.env import ArmCatalog, TrueModel, run_episode, sample_contexts, step_session
from mccb.glm import ConfidenceConfig, ModelState, confidence_radius, irls_update, refit_mle, ucb_width
from mccb.harness import ExperimentConfig, run_experiment, run_seed, run_sweep
from mccb.planner import backward_plan, brute_force_value, oracle_policy_value
from mccb.policies import compute_Mt, make_policy

__all__ = [
    "ArmCatalog",
    "ConfidenceConfig",
    "ExperimentConfig",
    "ModelState",
    "TrueModel",
    "backward_plan",
    "brute_force_value",
    "compute_Mt",
    "confidence_radius",
    "irls_update",
    "make_policy",
    "oracle_policy_value",
    "refit_mle",
    "run_episode",
    "run_experiment",
    "run_seed",
    "run_sweep",
    "sample_contexts",
    "step_session",
    "ucb_width",
]
