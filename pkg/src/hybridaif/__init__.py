"""Hybrid active inference for hierarchical kinematic control.

A continuous hierarchy of intrinsic/extrinsic kinematic beliefs tracks
three entity pathways (the agent's arm, a graspable tool, a moving ball);
discrete hidden causes select among intention-shaped trajectory priors via
accumulated model evidence; and a small POMDP planner drives the causes
top-down. The environment module provides the 2D world the agent acts in,
and the harness runs trials and experiments over it.
"""

from .beliefs import (
    GeneralizedBelief,
    NumericsError,
    PROB_FLOOR,
    Precision,
    PredictionError,
    integrate_belief,
    log_stable,
    softmax,
    weighted_error,
)
from .kinematics import forward_chain, jac_intrinsic, jac_parent, roto_translate
from .bmr import (
    EntityMixTrajectory,
    HiddenCauses,
    HybridUnit,
    PotentialTrajectory,
    accumulate_log_evidence,
    bma_jacobian_T_apply,
    bma_trajectory,
    evidence_increments,
    posterior_causes,
    reduced_posterior,
)
from .planner import (
    ACTIONS,
    DiscreteModel,
    N_STATES,
    build_default_model,
    expected_free_energy,
    infer_states,
    plan_and_predict,
    state_index,
)
from .environment import (
    CONDITIONS,
    EnvConfig,
    Observation,
    TrialSpec,
    WorldState,
    arm_poses,
    end_effector,
    env_step,
    normalize_condition,
    observe,
    sample_trial,
    tool_tip,
)
from .hierarchy import Hierarchy, LevelTopology, SweepInfo
from .agent import (
    Agent,
    AgentConfig,
    Intention,
    REACH_BALL,
    REACH_TOOL,
    STAY,
    TASK_INTENTIONS,
    build_task_model,
    initialize_beliefs,
    inverse_proprio_map,
    step,
)
from .config import Config, load_config, validate_config
from .harness import TrialResult, run_experiment, run_trial, trace_trial

__version__ = "0.1.0"

__all__ = [
    "ACTIONS",
    "Agent",
    "AgentConfig",
    "CONDITIONS",
    "Config",
    "DiscreteModel",
    "EntityMixTrajectory",
    "EnvConfig",
    "GeneralizedBelief",
    "HiddenCauses",
    "Hierarchy",
    "HybridUnit",
    "Intention",
    "LevelTopology",
    "N_STATES",
    "NumericsError",
    "Observation",
    "PROB_FLOOR",
    "PotentialTrajectory",
    "Precision",
    "PredictionError",
    "REACH_BALL",
    "REACH_TOOL",
    "STAY",
    "SweepInfo",
    "TASK_INTENTIONS",
    "TrialResult",
    "TrialSpec",
    "WorldState",
    "accumulate_log_evidence",
    "arm_poses",
    "bma_jacobian_T_apply",
    "bma_trajectory",
    "build_default_model",
    "build_task_model",
    "end_effector",
    "env_step",
    "evidence_increments",
    "expected_free_energy",
    "forward_chain",
    "infer_states",
    "initialize_beliefs",
    "integrate_belief",
    "inverse_proprio_map",
    "jac_intrinsic",
    "jac_parent",
    "load_config",
    "log_stable",
    "normalize_condition",
    "observe",
    "plan_and_predict",
    "posterior_causes",
    "reduced_posterior",
    "roto_translate",
    "run_experiment",
    "run_trial",
    "sample_trial",
    "softmax",
    "state_index",
    "step",
    "tool_tip",
    "trace_trial",
    "validate_config",
    "weighted_error",
]
