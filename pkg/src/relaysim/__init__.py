"""Spatially controlled relay beamforming: channel field simulation,
conditional-Gaussian prediction, optimal AF beamforming, predictive relay
repositioning policies and the Monte-Carlo experiment engine."""

__version__ = "0.1.0"

from .beamform import GainSnapshot, optimal_weights, sinr_of_weights, v_second_stage, v_second_stage_eig
from .channel import (GridField, build_grid_prior, build_joint_cov, eval_F, field_to_gain,
                      mpath_cov, pathloss_db, sample_grid_field, shadow_cov)
from .gaussian import History, Posterior2, cond_moment, history_append, history_empty, predict, sqrt2x2
from .params import ChannelParams, ConfigError, NumericalError, RadioParams, Workspace
from .policy import FeasibleSet, GhRule, PolicyKind, decide, gh_build, obj_gh, obj_h1, obj_h2
from .sim import Aggregate, FailureSpec, SimConfig, TrialResult, run_experiment, run_slot, run_trial, run_trials

__all__ = [
    "__version__",
    "Aggregate", "ChannelParams", "ConfigError", "FailureSpec", "FeasibleSet",
    "GainSnapshot", "GhRule", "GridField", "History", "NumericalError",
    "PolicyKind", "Posterior2", "RadioParams", "SimConfig", "TrialResult",
    "Workspace", "build_grid_prior", "build_joint_cov", "cond_moment", "decide",
    "eval_F", "field_to_gain", "gh_build", "history_append", "history_empty",
    "mpath_cov", "obj_gh", "obj_h1", "obj_h2", "optimal_weights", "pathloss_db",
    "predict", "run_experiment", "run_slot", "run_trial", "run_trials",
    "sample_grid_field", "shadow_cov", "sinr_of_weights", "sqrt2x2",
    "v_second_stage", "v_second_stage_eig",
]
