"""Plain-text configuration for the agent, environment, and planner.

The file format is INI-style sections of ``key = value`` pairs::

    [env]
    limb_lengths = 150 130 120 100
    tool_length = 150

    [agent]
    pi_visual_arm = 0.5

    [planner]
    replanning_period = 10
    goal_prior = 0.02 0.02 0.02 0.02 0.02 0.9

Every key is optional and defaults to the built-in value; unknown keys and
sections are rejected. Vector values are whitespace- (or comma-) separated
numbers. ``default_config_text()`` renders the complete schema with the
defaults filled in, ready to edit.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from .agent import AgentConfig
from .environment import EnvConfig


class ConfigError(ValueError):
    """A config file could not be parsed or validated."""


@dataclass(frozen=True)
class Config:
    """The full parameter bundle a run needs."""

    env: EnvConfig = EnvConfig()
    agent: AgentConfig = AgentConfig()


# (section, key) -> (target constructor kwargs, value kind, doc line).
# Kinds: float / int / bool / str / tuple:N, each optionally "opt_" for
# fields whose None default means "derived elsewhere".
_SCHEMA = {
    ("env", "arena_size"): ("env", "float", "side of the square arena, px"),
    ("env", "base_xy"): ("env", "tuple:2", "arm anchor position, px"),
    ("env", "limb_lengths"): ("env", "tuple:4", "arm segment lengths, px"),
    ("env", "tool_length"): ("env", "float", "stick length, px"),
    ("env", "grasp_threshold"): (
        "env", "float", "hand-to-handle distance that latches the tool, px"),
    ("env", "joint_limit"): ("env", "float", "max |joint angle|, rad"),
    ("env", "initial_joints"): ("env", "tuple:4", "starting joint angles, rad"),
    ("env", "spawn_clearance"): (
        "env", "float", "min spawn distance from the arm base, px"),
    ("env", "tool_spawn_radius"): (
        "env", "float", "max spawn distance of the tool handle, px"),
    ("env", "ball_spawn_radius"): (
        "env", "float", "max spawn distance of the ball, px"),
    ("env", "visual_noise_sigma"): (
        "env", "float", "stddev of visual observation noise, px (0 = exact)"),
    ("agent", "dt"): ("agent", "float", "integration step size"),
    ("agent", "position_scale"): (
        "agent", "float", "px per internal position unit"),
    ("agent", "pi_proprio"): ("agent", "float", "joint-angle precision"),
    ("agent", "pi_visual_arm"): (
        "agent", "float", "limb endpoint position precision"),
    ("agent", "pi_visual_tool"): (
        "agent", "float", "tool handle/tip position precision"),
    ("agent", "pi_visual_ball"): ("agent", "float", "ball position precision"),
    ("agent", "pi_extrinsic"): (
        "agent", "float", "kinematic-consistency precision"),
    ("agent", "pi_extrinsic_phi"): (
        "agent", "opt_float",
        "consistency precision of the orientation row (default: pi_extrinsic)"),
    ("agent", "pi_dynamics_ext"): (
        "agent", "float", "extrinsic trajectory-prior precision"),
    ("agent", "pi_dynamics_int"): (
        "agent", "float", "intrinsic trajectory-prior precision"),
    ("agent", "pi_length"): ("agent", "float", "limb-length prior precision"),
    ("agent", "pi_tool_axis"): (
        "agent", "float", "tool-link angle tracking precision"),
    ("agent", "pi_posture"): (
        "agent", "float", "ball-pathway joint tracking precision"),
    ("agent", "intention_phi_weight"): (
        "agent", "float", "orientation weight of intention attractors"),
    ("agent", "reach_ball_gain"): (
        "agent", "float", "attractor rate of the ball reach"),
    ("agent", "action_clamp"): ("agent", "float", "max |joint velocity|, rad"),
    ("agent", "min_length_px"): (
        "agent", "float", "lower clamp on believed segment lengths, px"),
    ("agent", "intrinsic_intentions"): (
        "agent", "bool", "also run intention priors in joint space"),
    ("agent", "init_mode"): (
        "agent", "str", "belief initialization scheme (observed)"),
    ("agent", "limb_lengths"): (
        "agent", "opt_tuple:4", "believed limb lengths, px (default: env)"),
    ("agent", "virtual_length_init"): (
        "agent", "opt_float",
        "initial believed tool length, px (default: last limb)"),
    ("agent", "grasp_threshold"): (
        "agent", "opt_float", "believed grasp distance, px (default: env)"),
    ("planner", "enable_planner"): (
        "agent", "bool", "drive hidden causes from the discrete model"),
    ("planner", "replanning_period"): (
        "agent", "int", "continuous steps between discrete updates"),
    ("planner", "policy_length"): ("agent", "int", "planning horizon, actions"),
    ("planner", "soft_likelihood_mix"): (
        "agent", "float", "off-diagonal mass of the cause likelihoods"),
    ("planner", "tactile_certainty"): (
        "agent", "float", "P(correct grasp reading)"),
    ("planner", "goal_preference"): (
        "agent", "float", "preference mass on the goal state"),
    ("planner", "goal_prior"): (
        "agent", "opt_tuple:6", "full preference vector over the 6 states"),
    ("planner", "initial_state_prior"): (
        "agent", "opt_tuple:6", "initial belief over the 6 states"),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_value(raw: str, kind: str, where: str):
    kind = kind.removeprefix("opt_")
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            value = int(raw)
            return value
        if kind == "bool":
            low = raw.strip().lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "str":
            return raw.strip()
        if kind.startswith("tuple:"):
            n = int(kind.split(":")[1])
            parts = raw.replace(",", " ").split()
            if len(parts) != n:
                raise ValueError(f"expected {n} numbers, got {len(parts)}")
            return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise AssertionError(f"unhandled kind {kind}")


def _collect(text: str):
    """Parse config text into (env_kwargs, agent_kwargs, problems)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                       interpolation=None)
    problems = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        return {}, {}, [str(exc)]

    kwargs = {"env": {}, "agent": {}}
    for section in parser.sections():
        if section not in {"env", "agent", "planner"}:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            spec = _SCHEMA.get((section, key))
            if spec is None:
                problems.append(f"unknown key {key!r} in [{section}]")
                continue
            target, kind, _doc = spec
            try:
                kwargs[target][key] = _parse_value(raw, kind,
                                                   f"[{section}] {key}")
            except ConfigError as exc:
                problems.append(str(exc))
    return kwargs["env"], kwargs["agent"], problems


def parse_config(text: str) -> Config:
    """Build a Config from file contents, raising ConfigError on problems."""
    env_kw, agent_kw, problems = _collect(text)
    if problems:
        raise ConfigError("; ".join(problems))
    try:
        return Config(env=EnvConfig(**env_kw), agent=AgentConfig(**agent_kw))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> Config:
    """Read and validate a config file; defaults apply to anything omitted."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text)


def validate_config(path) -> list:
    """All problems with a config file; an empty list means it is valid."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        return [f"cannot read {path}: {exc}"]
    env_kw, agent_kw, problems = _collect(text)
    if problems:
        return problems
    try:
        Config(env=EnvConfig(**env_kw), agent=AgentConfig(**agent_kw))
    except ValueError as exc:
        return [str(exc)]
    return []


def _format_default(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return " ".join(_format_default(v) for v in value)
    if isinstance(value, float):
        return format(value, "g")
    return str(value)


def default_config_text() -> str:
    """The full schema as an editable config file with default values."""
    defaults = {"env": EnvConfig(), "agent": AgentConfig()}
    lines = ["# All keys are optional; these are the defaults."]
    current = None
    for (section, key), (target, _kind, doc) in _SCHEMA.items():
        if section != current:
            lines.append("")
            lines.append(f"[{section}]")
            current = section
        value = getattr(defaults[target], key)
        if value is None:
            lines.append(f"# {key} =   # {doc}")
        else:
            lines.append(f"{key} = {_format_default(value)}   # {doc}")
    lines.append("")
    return "\n".join(lines)
