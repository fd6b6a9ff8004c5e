"""Trial runner, experiment sweeps, and single-trial tracing.

A trial is 3000 perception-action steps in a freshly sampled world; its
score is whether the tool was grasped and how close the tool tip tracked
the ball over the last 300 steps (mean distance < 100 px counts as
success). Experiments sweep trial speeds across 9 bins and aggregate
accuracy, completion time, and final error with normal-approximation 95%
confidence intervals; trials run in a worker pool and are gathered by
index, so results are independent of scheduling order.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .agent import build_task_model, initialize_beliefs
from .agent import step as agent_step
from .beliefs import NumericsError
from .config import Config
from .environment import (TrialSpec, env_step, normalize_condition, observe,
                          sample_trial, tool_tip)
from .svgplot import line_chart, render_frame

SUCCESS_DISTANCE = 100.0      # px, mean tip-ball distance that counts
FINAL_WINDOW = 300            # steps over which the final error is averaged

SUMMARY_COLUMNS = ("condition", "speed_bin", "accuracy", "time_mean",
                   "time_ci", "error_mean", "error_ci")
TRIAL_COLUMNS = ("condition", "speed_bin", "speed", "seed", "success",
                 "grasp_time", "completion_time", "final_error", "aborted",
                 "abort_reason")


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one trial.

    completion_time is the first step at which the tool had been grasped
    and the tip-ball distance was below the success threshold; final_error
    is the mean tip-ball distance over the last 300 steps. Numerical
    failures abort the trial and are recorded, never raised.
    """

    success: bool
    completion_time: int | None
    final_error: float
    grasp_time: int | None
    seed: int
    condition: str
    speed: float
    aborted: bool = False
    abort_reason: str = ""
    max_ball_cause_pre_grasp: float = 0.0


def _as_config(config) -> Config:
    if config is None:
        return Config()
    if isinstance(config, Config):
        return config
    # Accept a bare AgentConfig for convenience.
    return Config(agent=config)


def run_trial(spec: TrialSpec, config=None, observer=None) -> TrialResult:
    """Run one full trial and score it.

    observer, if given, is called as observer(t, world, agent) after every
    environment step; the agent's last_sweep holds that step's diagnostics.
    """
    cfg = _as_config(config)
    rng = np.random.default_rng(spec.seed)
    world = sample_trial(spec, rng, cfg.env)
    agent = build_task_model(cfg)
    noise_rng = rng if cfg.env.visual_noise_sigma > 0 else None

    initialize_beliefs(agent, observe(world, noise_rng))
    dists = np.zeros(spec.max_steps)
    steps_done = 0
    grasp_time = None
    completion_time = None
    max_ball_cause = 0.0
    aborted = False
    abort_reason = ""

    for t in range(spec.max_steps):
        obs = observe(world, noise_rng)
        try:
            action = agent_step(agent, obs)
        except NumericsError as exc:
            aborted = True
            abort_reason = str(exc)
            break
        env_step(world, action)
        dist = float(np.hypot(*(tool_tip(world) - world.ball_pos)))
        dists[t] = dist
        steps_done = t + 1
        if obs.o_t[0] == 1.0:  # no grasp had been felt at this step
            max_ball_cause = max(max_ball_cause,
                                 float(agent.causes4.posterior[2]))
        if world.grasped and grasp_time is None:
            grasp_time = world.step_count
        if (completion_time is None and world.grasped
                and dist < SUCCESS_DISTANCE):
            completion_time = world.step_count
        if observer is not None:
            observer(t, world, agent)

    if steps_done:
        final_error = float(dists[max(0, steps_done - FINAL_WINDOW):
                                  steps_done].mean())
    else:
        final_error = float(np.hypot(*(tool_tip(world) - world.ball_pos)))
    success = (not aborted) and world.grasped and final_error < SUCCESS_DISTANCE
    return TrialResult(success=success, completion_time=completion_time,
                       final_error=final_error, grasp_time=grasp_time,
                       seed=spec.seed, condition=spec.condition,
                       speed=spec.speed, aborted=aborted,
                       abort_reason=abort_reason,
                       max_ball_cause_pre_grasp=max_ball_cause)


def trial_seeds(seed: int, n_trials: int) -> list:
    """Per-trial integer seeds derived reproducibly from one root seed."""
    if n_trials == 0:
        return []
    root = np.random.SeedSequence(seed)
    return [int(s) for s in root.generate_state(n_trials, dtype=np.uint64)]


def _run_pool(specs, cfg: Config, workers) -> list:
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(specs) <= 1:
        return [run_trial(s, cfg) for s in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_trial(s, cfg), specs))


def _ci95(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float("nan")
    return float(1.96 * values.std(ddof=1) / np.sqrt(values.size))


def aggregate_results(results, bins, speed_values, condition) -> list:
    """Per-bin summary rows (dicts keyed by SUMMARY_COLUMNS)."""
    rows = []
    for b in range(len(speed_values)):
        group = [r for r, rb in zip(results, bins) if rb == b]
        if not group:
            continue
        times = [r.completion_time for r in group if r.success]
        errors = [r.final_error for r in group]
        rows.append({
            "condition": condition,
            "speed_bin": b,
            "accuracy": float(np.mean([r.success for r in group])),
            "time_mean": float(np.mean(times)) if times else float("nan"),
            "time_ci": _ci95(times),
            "error_mean": float(np.mean(errors)),
            "error_ci": _ci95(errors),
        })
    return rows


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def run_experiment(condition, n_trials: int = 150, *, speed_min: float = 0.0,
                   speed_max: float = 8.0, seed: int = 0, config=None,
                   out_dir=None, workers=None, max_steps: int = 3000) -> list:
    """Sweep one condition across speed bins; return the summary rows.

    Trials cycle through the speed bins (trial i gets bin i mod n_bins), so
    every bin sees an equal share of the seed stream. With out_dir set,
    writes summary.csv, trials.csv, and the three summary charts.
    """
    condition = normalize_condition(condition)
    cfg = _as_config(config)
    n_bins = 9 if speed_max > speed_min else 1
    speed_values = np.linspace(speed_min, speed_max, n_bins)
    seeds = trial_seeds(seed, n_trials)
    bins = [i % n_bins for i in range(n_trials)]
    specs = [TrialSpec(condition=condition, speed=float(speed_values[b]),
                       seed=s, max_steps=max_steps)
             for b, s in zip(bins, seeds)]
    results = _run_pool(specs, cfg, workers)
    rows = aggregate_results(results, bins, speed_values, condition)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_COLUMNS, rows)
        trial_rows = [{
            "condition": r.condition, "speed_bin": b, "speed": r.speed,
            "seed": r.seed, "success": int(r.success),
            "grasp_time": "" if r.grasp_time is None else r.grasp_time,
            "completion_time": ("" if r.completion_time is None
                                else r.completion_time),
            "final_error": r.final_error, "aborted": int(r.aborted),
            "abort_reason": r.abort_reason,
        } for r, b in zip(results, bins)]
        _write_csv(os.path.join(out_dir, "trials.csv"), TRIAL_COLUMNS,
                   trial_rows)
        _write_charts(out_dir, rows, condition)
    return rows


def _write_charts(out_dir, rows, condition) -> None:
    if not rows:
        return
    x = [row["speed_bin"] for row in rows]
    charts = (
        ("accuracy.svg", "accuracy", None, "fraction successful", (0, 1.05)),
        ("time.svg", "time_mean", "time_ci", "steps to completion", None),
        ("error.svg", "error_mean", "error_ci", "final error (px)", None),
    )
    for fname, key, ci_key, ylabel, yrange in charts:
        y = [row[key] for row in rows]
        ci = [row[ci_key] for row in rows] if ci_key else None
        kwargs = {}
        if yrange is not None:
            kwargs = {"y_min": yrange[0], "y_max": yrange[1]}
        svg = line_chart(x, {condition: (y, ci)}, title=f"{condition}: {key}",
                         xlabel="speed bin", ylabel=ylabel, **kwargs)
        with open(os.path.join(out_dir, fname), "w", encoding="utf-8") as fh:
            fh.write(svg)


class _TraceRecorder:
    """Collects per-step diagnostics and renders frames during one trial."""

    ENTITIES = ("actual", "tool", "ball")
    COMPONENTS = ("x", "y", "phi")
    FORCES = ("drift", "own_error", "child", "visual", "dynamics", "total")

    def __init__(self, out_dir, position_scale, frame_stride):
        self.out_dir = out_dir
        self.scale = position_scale
        self.frame_stride = frame_stride
        self.rows = []
        self.force_rows = []
        os.makedirs(os.path.join(out_dir, "frames"), exist_ok=True)

    def __call__(self, t, world, agent) -> None:
        info = agent.last_sweep
        h = agent.hierarchy
        row = {"step": t + 1,
               "distance": float(np.hypot(*(tool_tip(world)
                                            - world.ball_pos))),
               "grasped": int(world.grasped)}
        for name, value in zip(("stay", "reach_tool", "reach_ball"),
                               agent.causes4.log_evidence):
            row[f"l4_{name}"] = float(value)
        for name, value in zip(("stay", "reach_ball"),
                               agent.causes5.log_evidence):
            row[f"l5_{name}"] = float(value)
        for name, value in zip(("stay", "reach_tool", "reach_ball"),
                               agent.causes4.posterior):
            row[f"v4_{name}"] = float(value)
        for name, value in zip(("stay", "reach_ball"),
                               agent.causes5.posterior):
            row[f"v5_{name}"] = float(value)
        for idx, value in enumerate(agent.model.s):
            row[f"s_{idx}"] = float(value)
        for lvl in range(h.n_levels):
            row[f"f_norm_{lvl + 1}"] = float(np.linalg.norm(info.eta_e[lvl]))
            row[f"mu_p_norm_{lvl + 1}"] = float(
                np.linalg.norm(h.mu_e_p[lvl]))
        self.rows.append(row)

        frow = {"step": t + 1}
        terms = dict(info.forces_e)
        terms["total"] = info.d_mu_e
        for lvl in range(h.n_levels):
            for e, ent in enumerate(self.ENTITIES):
                if not h.entity_mask[lvl, e]:
                    continue
                for c, comp in enumerate(self.COMPONENTS):
                    for force in self.FORCES:
                        frow[f"L{lvl + 1}_{ent}_{comp}_{force}"] = float(
                            terms[force][lvl, e, c])
        self.force_rows.append(frow)

        if (t + 1) % self.frame_stride == 0 or t == 0:
            svg = render_frame(world, h, self.scale, label=f"step {t + 1}")
            fname = os.path.join(self.out_dir, "frames",
                                 f"frame_{t + 1:06d}.svg")
            with open(fname, "w", encoding="utf-8") as fh:
                fh.write(svg)

    def flush(self) -> None:
        if self.rows:
            _write_csv(os.path.join(self.out_dir, "trace.csv"),
                       list(self.rows[0].keys()), self.rows)
        if self.force_rows:
            _write_csv(os.path.join(self.out_dir, "forces.csv"),
                       list(self.force_rows[0].keys()), self.force_rows)
        if not self.rows:
            return
        steps = [row["step"] for row in self.rows]
        causes = {name: ([row[f"v4_{name}"] for row in self.rows], None)
                  for name in ("stay", "reach_tool", "reach_ball")}
        causes["reach_ball (virtual)"] = (
            [row["v5_reach_ball"] for row in self.rows], None)
        with open(os.path.join(self.out_dir, "causes.svg"), "w",
                  encoding="utf-8") as fh:
            fh.write(line_chart(steps, causes, title="hidden cause posteriors",
                                xlabel="step", ylabel="probability",
                                y_min=0.0, y_max=1.05))
        dist = {"tip-ball distance": ([row["distance"] for row in self.rows],
                                      None)}
        with open(os.path.join(self.out_dir, "distance.svg"), "w",
                  encoding="utf-8") as fh:
            fh.write(line_chart(steps, dist, title="tool tip to ball",
                                xlabel="step", ylabel="px", y_min=0.0))


def trace_trial(spec: TrialSpec, config=None, out_dir="trace",
                frame_stride: int = 50) -> TrialResult:
    """Run one trial while writing per-step diagnostics and SVG frames.

    Produces trace.csv (evidences, cause/state posteriors, dynamics norms),
    forces.csv (the five extrinsic force terms and their sum per level,
    entity, and component), frames/, and two overview charts.
    """
    cfg = _as_config(config)
    os.makedirs(out_dir, exist_ok=True)
    recorder = _TraceRecorder(out_dir, cfg.agent.position_scale, frame_stride)
    result = run_trial(spec, cfg, observer=recorder)
    recorder.flush()
    return result
