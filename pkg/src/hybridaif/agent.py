"""Tool-use agent: a 5-level kinematic hierarchy with three entity pathways.

The agent maintains three parallel kinematic configurations through one
arm-shaped chain of four levels plus a virtual level that extends the hand
by one more segment:

* the actual pathway tracks the agent's own body (proprioception + vision
  of the limb endpoints);
* the tool pathway is a hypothetical arm whose hand level sits at the tool
  handle and whose virtual segment ends at the tool tip (both observed);
* the ball pathway is a hypothetical arm+tool whose virtual extremity sits
  at the ball (the only observation it gets), so its hand-level pose is an
  inferred "where my hand should be for the extremity to touch the ball".

Intentions are entity mixes over these pathways: reaching the tool sets
the actual pathway's attractor to the tool pathway's state; reaching the
ball sets every pathway's attractor to the ball pathway's state, at the
hand and virtual levels simultaneously. Hidden causes weigh the intentions
into a trajectory prior, accumulate evidence bottom-up, and are driven
top-down by a discrete 6-state planner replanned every few steps.

Internally the agent works in normalized units (positions divided by the
position scale); observations are normalized on the way in and actions are
joint velocities (radians per step), so nothing has to be scaled back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bmr import EntityMixTrajectory, HiddenCauses, HybridUnit
from .environment import EnvConfig, Observation
from .hierarchy import LENGTH, THETA, Hierarchy
from .kinematics import wrap_angle
from .planner import build_default_model, infer_states, plan_and_predict

ENTITY_NAMES = ("actual", "tool", "ball")
ACTUAL, TOOL, BALL = 0, 1, 2
N_LEVELS = 5
HAND_LEVEL = 3            # chain index of the end-effector level
VIRTUAL_LEVEL = 4         # chain index of the tool-extension level

# Destination (level, entity) of each visual observation row: the four limb
# endpoints feed the actual pathway level by level; the tool handle is the
# tool pathway's hand-level pose; tool tip and ball live at the virtual
# level. The ball is deliberately observed nowhere else: its pathway's
# lower levels are left to inference.
VISUAL_WIRING = ((0, ACTUAL), (1, ACTUAL), (2, ACTUAL), (3, ACTUAL),
                 (HAND_LEVEL, TOOL), (VIRTUAL_LEVEL, TOOL),
                 (VIRTUAL_LEVEL, BALL))


@dataclass(frozen=True)
class Intention:
    """A desired state expressed as an entity re-wiring of a level's belief.

    ``sources[e]`` names the entity slot whose current state entity e is
    attracted to; the induced dynamics f(x) = i(x) - x vanish identically
    wherever sources[e] == e (in particular everywhere for "stay").
    """

    id: str
    sources: tuple            # length 3, indexed by global entity slot
    levels: tuple             # level indices where the intention applies

    def mix_matrix(self, slots=(ACTUAL, TOOL, BALL)) -> np.ndarray:
        """Attractor matrix K (i(x) = K x) over the given present slots."""
        col = {s: j for j, s in enumerate(slots)}
        K = np.zeros((len(slots), len(slots)))
        for j, s in enumerate(slots):
            K[j, col[self.sources[s]]] = 1.0
        return K

    def target_fn(self, x, slots=(ACTUAL, TOOL, BALL)) -> np.ndarray:
        """The intentional state i(x) for a (slots, components) belief."""
        return self.mix_matrix(slots) @ np.asarray(x, dtype=float)


STAY = Intention("stay", (ACTUAL, TOOL, BALL), (HAND_LEVEL, VIRTUAL_LEVEL))
REACH_TOOL = Intention("reach_tool", (TOOL, TOOL, BALL), (HAND_LEVEL,))
REACH_BALL = Intention("reach_ball", (BALL, BALL, BALL),
                       (HAND_LEVEL, VIRTUAL_LEVEL))
TASK_INTENTIONS = (STAY, REACH_TOOL, REACH_BALL)


@dataclass(frozen=True)
class AgentConfig:
    """Everything the agent model needs that the world does not dictate.

    Precisions are in normalized units (positions divided by
    position_scale), which keeps their useful magnitudes O(1). The scale
    is chosen near one limb length: in the consistency likelihood a
    link's position rows scale with its normalized length while the
    orientation row is scale-free, so nondimensionalizing by the segment
    length keeps the positional pull on each joint from being drowned by
    the orientation channel. Geometry fields left at None are taken from
    the environment config at build time; virtual_length_init falls back
    to the last limb length, so the agent starts out misjudging the tool
    and corrects it by inference.
    """

    dt: float = 0.3
    replanning_period: int = 10
    position_scale: float = 162.0
    pi_proprio: float = 0.5
    pi_visual_arm: float = 0.3
    pi_visual_tool: float = 1.0
    pi_visual_ball: float = 1.0
    pi_extrinsic: float = 1.0
    pi_extrinsic_phi: float = None    # orientation row; None -> pi_extrinsic
    pi_dynamics_ext: float = 1.0
    pi_dynamics_int: float = 0.2
    pi_length: float = 30.0
    pi_tool_axis: float = 0.3     # tool-link angle tracks the seen axis
    pi_posture: float = 0.2       # ball-pathway joints track the tool's
    intention_phi_weight: float = 0.2  # orientation pull of attractors
    reach_ball_gain: float = 0.4  # attractor rate of the ball reach
    action_clamp: float = 0.05
    min_length_px: float = 0.0    # 0 = signed lengths (no floor)
    intrinsic_intentions: bool = True
    enable_planner: bool = True
    soft_likelihood_mix: float = 0.05
    tactile_certainty: float = 0.99
    goal_preference: float = 0.9
    policy_length: int = 2
    init_mode: str = "observed"
    goal_prior: tuple = None          # 6 weights over discrete states (C)
    initial_state_prior: tuple = None  # 6 weights over discrete states (D)
    limb_lengths: tuple = None        # px; None -> environment geometry
    virtual_length_init: float = None  # px; None -> last limb length
    grasp_threshold: float = None     # px; None -> environment value

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.replanning_period < 1:
            raise ValueError("replanning_period must be >= 1")
        if self.policy_length < 1:
            raise ValueError("policy_length must be >= 1")
        if self.position_scale <= 0 or self.action_clamp <= 0:
            raise ValueError("position_scale and action_clamp must be positive")
        for name in ("pi_proprio", "pi_visual_arm", "pi_visual_tool",
                     "pi_visual_ball", "pi_extrinsic", "pi_dynamics_ext",
                     "pi_dynamics_int", "pi_length", "pi_tool_axis",
                     "pi_posture", "intention_phi_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.pi_extrinsic_phi is not None and self.pi_extrinsic_phi < 0:
            raise ValueError("pi_extrinsic_phi must be >= 0")
        if self.init_mode != "observed":
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        if not 0.0 <= self.soft_likelihood_mix < 1.0:
            raise ValueError("soft_likelihood_mix must be in [0, 1)")
        for name in ("goal_prior", "initial_state_prior"):
            weights = getattr(self, name)
            if weights is None:
                continue
            weights = tuple(float(w) for w in weights)
            if len(weights) != 6 or min(weights) < 0 or sum(weights) <= 0:
                raise ValueError(
                    f"{name} must be 6 nonnegative weights with positive sum")
            object.__setattr__(self, name, weights)


class Agent:
    """Mutable runtime state of the assembled model."""

    def __init__(self, config: AgentConfig, env_config: EnvConfig,
                 hierarchy: Hierarchy, model, causes4: HiddenCauses,
                 causes5: HiddenCauses):
        self.config = config
        self.env_config = env_config
        self.hierarchy = hierarchy
        self.model = model
        self.causes4 = causes4
        self.causes5 = causes5
        self.action = np.zeros(hierarchy.n_proprio)
        self.step_count = 0
        self.last_sweep = None


def build_task_model(config) -> Agent:
    """Assemble the full agent from a config.

    config may be an AgentConfig or any bundle exposing .agent (AgentConfig)
    and .env (EnvConfig); with a bare AgentConfig the default environment
    geometry is assumed.
    """
    cfg: AgentConfig = getattr(config, "agent", config)
    env: EnvConfig = getattr(config, "env", None) or EnvConfig()
    scale = cfg.position_scale
    limb_px = np.asarray(cfg.limb_lengths
                         if cfg.limb_lengths is not None
                         else env.limb_lengths, dtype=float)
    if limb_px.shape != (4,):
        raise ValueError("limb_lengths must have 4 entries")
    virtual_init_px = (cfg.virtual_length_init
                       if cfg.virtual_length_init is not None
                       else limb_px[-1])

    L, E = N_LEVELS, len(ENTITY_NAMES)
    entity_mask = np.ones((L, E), dtype=bool)
    entity_mask[VIRTUAL_LEVEL, ACTUAL] = False

    pi_proprio = np.array([cfg.pi_proprio] * 4 + [0.0])
    pi_visual = np.zeros((L, E))
    for lvl, ent in VISUAL_WIRING:
        pi_visual[lvl, ent] = (cfg.pi_visual_arm if ent == ACTUAL else
                               cfg.pi_visual_tool if ent == TOOL else
                               cfg.pi_visual_ball)
    pe_phi = (cfg.pi_extrinsic if cfg.pi_extrinsic_phi is None
              else cfg.pi_extrinsic_phi)
    pi_extrinsic = np.tile([cfg.pi_extrinsic, cfg.pi_extrinsic, pe_phi],
                           (L, 1))
    pi_dyn_ext = np.full(L, cfg.pi_dynamics_ext)
    pi_dyn_int = np.full(L, cfg.pi_dynamics_int)
    # Segment-geometry priors. All pathways share the body schema on the
    # arm levels: the tool and ball chains are ghost arms whose relaxed
    # configurations answer "where would my hand be if this chain ended on
    # that object". The virtual level differs per slot: the tool's link is
    # inferred from vision (free), while the ball's virtual link -- angle
    # and length both -- is slaved to the inferred tool link (targets
    # refreshed every step), so the ball's hand-level parent pose is a
    # hand pose from which the instrument in use actually reaches the
    # ball.
    pi_length = np.tile([cfg.pi_length] * 4 + [0.0], (E, 1)).T
    pi_length[VIRTUAL_LEVEL, BALL] = cfg.pi_length
    length_target = np.tile(np.append(limb_px, virtual_init_px) / scale,
                            (E, 1)).T
    # Angle tracking priors (targets refreshed every step): the tool-link
    # angle follows the observed tool axis relative to the believed hand
    # orientation -- the orientation gauge that two point observations
    # leave free is pinned to the feasible value reality suggests -- and
    # the ball pathway's joints follow the tool pathway's, so the two
    # ghost arms stay one coherent plan (grasp posture that extends into
    # the ball reach) instead of drifting to unrelated inverse-kinematics
    # branches.
    pi_theta = np.zeros((L, E))
    pi_theta[VIRTUAL_LEVEL, BALL] = cfg.pi_length
    pi_theta[VIRTUAL_LEVEL, TOOL] = cfg.pi_tool_axis
    pi_theta[:HAND_LEVEL + 1, BALL] = cfg.pi_posture
    theta_target = np.zeros((L, E))

    # Discrete model and the shared cause beliefs it drives.
    model = build_default_model(soft_mix=cfg.soft_likelihood_mix,
                                tactile_certainty=cfg.tactile_certainty,
                                goal_preference=cfg.goal_preference,
                                policy_length=cfg.policy_length)
    if cfg.goal_prior is not None:
        goal = np.asarray(cfg.goal_prior, dtype=float)
        model.C = goal / goal.sum()
    if cfg.initial_state_prior is not None:
        start = np.asarray(cfg.initial_state_prior, dtype=float)
        model.D = start / start.sum()
        model.s = model.D.copy()
    causes4 = HiddenCauses(prior=model.A_e4 @ model.D)
    causes5 = HiddenCauses(prior=model.A_e5 @ model.D)

    # Hybrid units at every extrinsic level: their trajectory sets are the
    # task intentions restricted to the level's present slots, so each arm
    # level is pulled directly toward the matching level of the pathway
    # being reached for, rather than waiting for torques to propagate down
    # the chain from the hand. Attraction is dominated by the position
    # rows; the orientation row gets a small weight that steers the
    # approach without injecting joint torques strong enough to fight the
    # positional reach.
    hand_slots = (ACTUAL, TOOL, BALL)
    virt_slots = (TOOL, BALL)
    comp_w = (1.0, 1.0, cfg.intention_phi_weight)

    def intent_mix(intention, slots):
        # K -> I + g (K - I) slows the attractor flow toward the same
        # fixed point; the ball reach gets its own rate so the tool phase
        # and the transported-reach phase can be paced independently.
        K = intention.mix_matrix(slots)
        if intention.id == "reach_ball":
            eye = np.eye(len(slots))
            K = eye + cfg.reach_ball_gain * (K - eye)
        return K

    traj4 = tuple(EntityMixTrajectory(i.id, intent_mix(i, hand_slots),
                                      component_weights=comp_w)
                  for i in TASK_INTENTIONS if HAND_LEVEL in i.levels)
    traj5 = tuple(EntityMixTrajectory(i.id, intent_mix(i, virt_slots),
                                      component_weights=comp_w)
                  for i in TASK_INTENTIONS if VIRTUAL_LEVEL in i.levels)

    # Laplace posterior precision of the first-order beliefs: the dynamics
    # prior plus every likelihood term reading the level's state, with
    # identity-diagonal Jacobian contributions.
    pe_row = np.array([cfg.pi_extrinsic, cfg.pi_extrinsic, pe_phi])
    P4 = cfg.pi_dynamics_ext + np.tile(pe_row, (3, 1))
    P4[(TOOL, BALL), :] += pe_row                    # virtual-level backward
    P4[ACTUAL, :2] += cfg.pi_visual_arm
    P4[TOOL, :2] += cfg.pi_visual_tool
    P5 = cfg.pi_dynamics_ext + np.tile(pe_row, (2, 1))
    P5[0, :2] += cfg.pi_visual_tool
    P5[1, :2] += cfg.pi_visual_ball

    unit4 = HybridUnit(name="extrinsic hand level", trajectories=traj4,
                       causes=causes4, prior_precision=cfg.pi_dynamics_ext,
                       post_precision=P4)
    unit5 = HybridUnit(name="extrinsic virtual level", trajectories=traj5,
                       causes=causes5, prior_precision=cfg.pi_dynamics_ext,
                       post_precision=P5)
    model.attached_units = (unit4, unit5)

    # The sub-hand arm levels carry the same intention set, riding the
    # hand-level causes; they are not evidence levels, so only their
    # forward (attractor) direction matters.
    ext_units = {HAND_LEVEL: unit4, VIRTUAL_LEVEL: unit5}
    for lvl in range(HAND_LEVEL):
        ext_units[lvl] = HybridUnit(
            name=f"extrinsic level {lvl + 1}", trajectories=traj4,
            causes=causes4, prior_precision=cfg.pi_dynamics_ext,
            post_precision=cfg.pi_dynamics_ext)

    int_units = {}
    if cfg.intrinsic_intentions:
        # Joint-space intentions mirroring the extrinsic ones on the arm
        # levels, riding the same hand-level causes (no separate evidence).
        # They mix joint angles only: segment lengths differ between
        # pathways and must not be dragged toward each other.
        traj_int = tuple(EntityMixTrajectory(i.id, intent_mix(i, hand_slots),
                                             components=(0,))
                         for i in TASK_INTENTIONS if HAND_LEVEL in i.levels)
        for lvl in range(4):
            int_units[lvl] = HybridUnit(
                name=f"intrinsic level {lvl + 1}", trajectories=traj_int,
                causes=causes4, prior_precision=cfg.pi_dynamics_int,
                post_precision=cfg.pi_dynamics_int)

    hierarchy = Hierarchy(
        base_pose=np.array([*env.base_xy, 0.0]) / np.array([scale, scale, 1.0]),
        entity_mask=entity_mask, pi_proprio=pi_proprio, pi_visual=pi_visual,
        pi_extrinsic=pi_extrinsic, pi_dyn_ext=pi_dyn_ext,
        pi_dyn_int=pi_dyn_int, pi_length=pi_length,
        length_target=length_target, pi_theta=pi_theta,
        theta_target=theta_target,
        ext_units=ext_units,
        int_units=int_units, evidence_levels=(HAND_LEVEL, VIRTUAL_LEVEL),
        min_length=cfg.min_length_px / scale,
        theta_limit=env.joint_limit)

    return Agent(config=cfg, env_config=env, hierarchy=hierarchy,
                 model=model, causes4=causes4, causes5=causes5)


def observation_grids(agent: Agent, obs: Observation):
    """Normalize an observation onto the hierarchy's (level, entity) grids."""
    vis = np.zeros((agent.hierarchy.n_levels, agent.hierarchy.n_entities, 2))
    y_v = np.asarray(obs.y_v, dtype=float) / agent.config.position_scale
    for row, (lvl, ent) in enumerate(VISUAL_WIRING):
        vis[lvl, ent] = y_v[row]
    return np.asarray(obs.y_p, dtype=float), vis


def initialize_beliefs(agent: Agent, obs: Observation) -> None:
    """Start every pathway from the observed arm configuration.

    The tool and ball pathways are copies of the actual one; inference
    pulls them toward their objects from there. The virtual level starts
    with a zero joint angle and the last limb's length.
    """
    cfg = agent.config
    scale = cfg.position_scale
    h = agent.hierarchy
    theta = np.zeros((h.n_levels, h.n_entities))
    theta[:4] = np.asarray(obs.y_p, dtype=float)[:, None]
    h.init_from_intrinsic(theta, h.length_target)
    agent.action = np.zeros(h.n_proprio)
    agent.step_count = 0
    agent.last_sweep = None


def inverse_proprio_map(agent: Agent) -> np.ndarray:
    """Jacobian of proprioceptive observations w.r.t. the action.

    Actions are joint-velocity commands read out directly, so the map is
    the identity.
    """
    return np.eye(agent.hierarchy.n_proprio)


def step(agent: Agent, obs: Observation) -> np.ndarray:
    """One full cycle: replan if due, sweep the hierarchy, update the action.

    Returns the joint-velocity command (radians/step), clamped to the
    configured magnitude.
    """
    cfg = agent.config
    if cfg.enable_planner and agent.step_count % cfg.replanning_period == 0:
        infer_states(agent.model, agent.causes4.posterior,
                     agent.causes5.posterior, obs.o_t)
        plan_and_predict(agent.model)

    # Refresh the tracking-prior targets (one-way couplings between the
    # pathways; see build_task_model). The ball's virtual link tracks the
    # tool link inferred so far -- a reach with the ball pathway is a
    # reach with the instrument in hand -- and its joints track the tool
    # pathway's joints. The tool-link angle tracks the observed tool axis
    # expressed relative to the believed hand orientation.
    hh = agent.hierarchy
    hh.length_target[VIRTUAL_LEVEL, BALL] = hh.mu_i[VIRTUAL_LEVEL, TOOL,
                                                    LENGTH]
    hh.theta_target[VIRTUAL_LEVEL, BALL] = hh.mu_i[VIRTUAL_LEVEL, TOOL,
                                                   THETA]
    hh.theta_target[:HAND_LEVEL + 1, BALL] = hh.mu_i[:HAND_LEVEL + 1, TOOL,
                                                     THETA]
    handle, tip = np.asarray(obs.y_v[4], float), np.asarray(obs.y_v[5], float)
    axis_vec = tip - handle
    if np.linalg.norm(axis_vec) > 1e-6:
        axis = np.arctan2(axis_vec[1], axis_vec[0])
        hand_phi = hh.mu_e[HAND_LEVEL, ACTUAL, 2]
        hh.theta_target[VIRTUAL_LEVEL, TOOL] = wrap_angle(axis - hand_phi)

    y_p, vis = observation_grids(agent, obs)
    info = hh.sweep(y_p, vis, cfg.dt)
    agent.last_sweep = info

    # Identity inverse map: the weighted proprioceptive errors are the
    # action gradient themselves.
    a_dot = -(inverse_proprio_map(agent).T
              @ (cfg.pi_proprio * info.eps_p))
    agent.action = np.clip(agent.action + cfg.dt * a_dot,
                           -cfg.action_clamp, cfg.action_clamp)
    agent.step_count += 1
    return agent.action.copy()
