"""Deterministic 2D world: planar arm, drifting tool and ball, sticky grasp.

Ground truth lives in pixels on a square arena. The arm is a 4-segment
planar chain anchored at the arena center; the tool is a rigid segment with
a graspable handle (its origin) and a tip; the ball is a point. Tool and
ball move in straight lines at constant speed and reflect off the arena
boundary. When the end effector first comes within the grasp threshold of
the tool handle the tool sticks to the hand for the rest of the trial,
preserving the relative orientation it had at contact.

Everything here is agent-free plumbing: stepping is pure kinematics (no
mass or contact forces), and observations are synthesized from ground
truth, optionally with additive Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import forward_chain

CONDITIONS = ("static", "tool", "ball", "both")
_CONDITION_ALIASES = {"moving_tool": "tool", "moving_ball": "ball"}


def normalize_condition(name: str) -> str:
    """Map accepted condition spellings onto the canonical four names."""
    out = _CONDITION_ALIASES.get(str(name), str(name))
    if out not in CONDITIONS:
        raise ValueError(
            f"unknown condition {name!r}; expected one of {CONDITIONS}")
    return out


@dataclass(frozen=True)
class EnvConfig:
    """Geometry and mechanics of the world.

    The default arena is 1300x1300 px with the arm anchored at the center;
    limb lengths plus the tool length sum to half the arena side, so sampled
    objects spend long stretches out of reach. Spawn radii keep the tool
    within arm reach and the ball within arm+tool reach (with ~10% margin),
    measured from the base anchor.
    """

    arena_size: float = 1300.0
    base_xy: tuple = (650.0, 650.0)
    limb_lengths: tuple = (150.0, 130.0, 120.0, 100.0)
    tool_length: float = 150.0
    grasp_threshold: float = 15.0
    joint_limit: float = float(np.pi)
    initial_joints: tuple = (0.6, 0.4, 0.2, 0.1)
    spawn_clearance: float = 100.0
    tool_spawn_radius: float = 450.0
    ball_spawn_radius: float = 585.0
    visual_noise_sigma: float = 0.0

    def __post_init__(self):
        if len(self.limb_lengths) != 4:
            raise ValueError("limb_lengths must have 4 entries")
        if min(self.limb_lengths) <= 0 or self.tool_length <= 0:
            raise ValueError("segment lengths must be positive")
        if not (0 < self.spawn_clearance < self.tool_spawn_radius
                <= self.ball_spawn_radius):
            raise ValueError("spawn radii must satisfy "
                             "0 < clearance < tool radius <= ball radius")


@dataclass(frozen=True)
class TrialSpec:
    """One trial: what moves, how fast, and under which seed."""

    condition: str
    speed: float
    seed: int
    max_steps: int = 3000

    def __post_init__(self):
        object.__setattr__(self, "condition", normalize_condition(self.condition))
        if not 0.0 <= self.speed <= 8.0:
            raise ValueError(f"speed {self.speed} outside [0, 8]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class WorldState:
    """Mutable ground truth, advanced in place by env_step."""

    config: EnvConfig
    joint_angles: np.ndarray          # (4,) radians
    tool_origin: np.ndarray           # (2,) px
    tool_velocity: np.ndarray         # (2,) px/step
    tool_angle: float                 # radians, absolute
    ball_pos: np.ndarray              # (2,) px
    ball_velocity: np.ndarray         # (2,) px/step
    grasped: bool = False
    step_count: int = 0
    grasp_offset: float = 0.0         # tool_angle - hand orientation, latched

    def __post_init__(self):
        self.joint_angles = np.asarray(self.joint_angles, dtype=float).copy()
        self.tool_origin = np.asarray(self.tool_origin, dtype=float).copy()
        self.tool_velocity = np.asarray(self.tool_velocity, dtype=float).copy()
        self.ball_pos = np.asarray(self.ball_pos, dtype=float).copy()
        self.ball_velocity = np.asarray(self.ball_velocity, dtype=float).copy()
        self.tool_angle = float(self.tool_angle)


@dataclass(frozen=True)
class Observation:
    """What the agent senses each step.

    y_v rows: the four limb endpoints, then tool handle, tool tip, ball.
    o_t is a one-hot over {ungrasped, grasped}.
    """

    y_p: np.ndarray                   # (4,) joint angles
    y_v: np.ndarray                   # (7, 2) positions, px
    o_t: np.ndarray                   # (2,) one-hot


def arm_poses(world: WorldState) -> np.ndarray:
    """Pose [x, y, phi] after each arm segment, shape (4, 3)."""
    base = np.array([*world.config.base_xy, 0.0])
    return forward_chain(world.joint_angles,
                         np.asarray(world.config.limb_lengths, dtype=float),
                         base)


def end_effector(world: WorldState) -> np.ndarray:
    return arm_poses(world)[-1]


def tool_tip(world: WorldState) -> np.ndarray:
    a = world.tool_angle
    return world.tool_origin + world.config.tool_length * np.array(
        [np.cos(a), np.sin(a)])


def _reflect(pos: np.ndarray, vel: np.ndarray, size: float) -> None:
    """Advance pos by vel with mirror reflection at [0, size], in place."""
    pos += vel
    for k in range(pos.shape[0]):
        # A fast object may need more than one fold near a corner.
        while pos[k] < 0.0 or pos[k] > size:
            if pos[k] < 0.0:
                pos[k] = -pos[k]
            else:
                pos[k] = 2.0 * size - pos[k]
            vel[k] = -vel[k]


def _attach_tool(world: WorldState) -> None:
    ee = end_effector(world)
    world.tool_origin = ee[:2].copy()
    world.tool_angle = ee[2] + world.grasp_offset


def env_step(world: WorldState, action: np.ndarray) -> WorldState:
    """Advance one step: joints by action, objects by velocity, grasp check.

    action is a joint-velocity command in rad/step; joints clamp to the
    configured limits. Free objects reflect off the arena walls; a grasped
    tool is rigidly carried by the hand instead.
    """
    action = np.asarray(action, dtype=float)
    if not np.all(np.isfinite(action)):
        raise ValueError("action must be finite")
    cfg = world.config
    world.joint_angles = np.clip(world.joint_angles + action,
                                 -cfg.joint_limit, cfg.joint_limit)
    if world.grasped:
        _attach_tool(world)
    else:
        _reflect(world.tool_origin, world.tool_velocity, cfg.arena_size)
    _reflect(world.ball_pos, world.ball_velocity, cfg.arena_size)
    if not world.grasped:
        ee = end_effector(world)
        if np.hypot(*(world.tool_origin - ee[:2])) < cfg.grasp_threshold:
            world.grasped = True
            world.grasp_offset = world.tool_angle - ee[2]
            world.tool_velocity = np.zeros(2)
            _attach_tool(world)
    world.step_count += 1
    return world


def observe(world: WorldState, rng: np.random.Generator = None) -> Observation:
    """Synthesize proprioceptive, visual, and tactile observations.

    Visual positions get zero-mean Gaussian noise when the config sets a
    positive sigma and an rng is supplied; otherwise they are exact.
    """
    poses = arm_poses(world)
    y_v = np.empty((7, 2))
    y_v[:4] = poses[:, :2]
    y_v[4] = world.tool_origin
    y_v[5] = tool_tip(world)
    y_v[6] = world.ball_pos
    sigma = world.config.visual_noise_sigma
    if sigma > 0.0 and rng is not None:
        y_v = y_v + rng.normal(0.0, sigma, size=y_v.shape)
    o_t = np.array([0.0, 1.0]) if world.grasped else np.array([1.0, 0.0])
    return Observation(y_p=world.joint_angles.copy(), y_v=y_v, o_t=o_t)


def _sample_annulus(rng: np.random.Generator, center: np.ndarray,
                    r_min: float, r_max: float) -> np.ndarray:
    """Uniform-by-area point in the annulus r_min <= r <= r_max."""
    r = np.sqrt(rng.uniform(r_min ** 2, r_max ** 2))
    ang = rng.uniform(-np.pi, np.pi)
    return center + r * np.array([np.cos(ang), np.sin(ang)])


def sample_trial(spec: TrialSpec, rng: np.random.Generator,
                 config: EnvConfig = None) -> WorldState:
    """Draw the initial world for a trial.

    Object positions are uniform by area over annuli around the arm base
    (clearance to spawn radius); velocity directions are uniform on the
    circle with magnitude spec.speed, applied to whichever objects the
    condition declares as moving.
    """
    cfg = EnvConfig() if config is None else config
    base = np.asarray(cfg.base_xy, dtype=float)
    tool_origin = _sample_annulus(rng, base, cfg.spawn_clearance,
                                  cfg.tool_spawn_radius)
    tool_angle = rng.uniform(-np.pi, np.pi)
    ball_pos = _sample_annulus(rng, base, cfg.spawn_clearance,
                               cfg.ball_spawn_radius)

    def _velocity(moving: bool) -> np.ndarray:
        ang = rng.uniform(-np.pi, np.pi)
        if not moving or spec.speed == 0.0:
            return np.zeros(2)
        return spec.speed * np.array([np.cos(ang), np.sin(ang)])

    tool_velocity = _velocity(spec.condition in ("tool", "both"))
    ball_velocity = _velocity(spec.condition in ("ball", "both"))
    return WorldState(config=cfg,
                      joint_angles=np.asarray(cfg.initial_joints, dtype=float),
                      tool_origin=tool_origin,
                      tool_velocity=tool_velocity,
                      tool_angle=tool_angle,
                      ball_pos=ball_pos,
                      ball_velocity=ball_velocity)
