"""Discrete task-level model: categorical inference and free-energy planning.

The task is abstracted into 6 process states, the product of a position
factor {start, at_tool, at_ball} and a grasp factor {ungrasped, grasped},
with 4 actions {stay, reach_tool, reach_ball, grasp}. The model fuses three
observation streams at every replanning boundary — the cause posteriors of
the two dynamics-bearing continuous levels plus the tactile flag — scores
fixed-length policies by expected free energy, and broadcasts a
policy-averaged state prediction back down as the next window's cause
priors.

Matrix conventions follow the usual categorical generative-model layout:
columns index the conditioning state, so every column of every likelihood
matrix and every transition slice is a distribution. Soft observation
vectors enter state inference as expected log-likelihoods, (ln A)^T v,
which reduces to the familiar ln(A^T o) for one-hot o. Structural zeros in
B are preserved exactly in every linear operation; flooring happens only
inside logs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .beliefs import log_stable, softmax

# State factor layout: index = position * 2 + grasp.
POSITIONS = ("start", "at_tool", "at_ball")
GRASP = ("ungrasped", "grasped")
N_STATES = 6
ACTIONS = ("stay", "reach_tool", "reach_ball", "grasp")
STAY, REACH_TOOL, REACH_BALL, GRASP_ACT = range(4)


def state_index(position: int, grasped: int) -> int:
    return position * 2 + grasped


@dataclass
class DiscreteModel:
    """Categorical model plus the bookkeeping the planning cycle needs.

    attached_units lists the hybrid units whose cause priors this model
    drives; plan_and_predict resets their evidence windows in place.
    """

    A_e4: np.ndarray            # (3 causes, 6 states)
    A_e5: np.ndarray            # (2 causes, 6 states)
    A_t: np.ndarray             # (2 tactile, 6 states)
    B: np.ndarray               # (4 actions, 6, 6), columns = from-state
    C: np.ndarray               # (6,) state preferences
    D: np.ndarray               # (6,) current state prior
    policies: tuple             # tuple of action tuples, each length N_p
    s: np.ndarray = None        # (6,) state posterior
    G: np.ndarray = None        # (n_policies,) last EFE
    attached_units: tuple = ()

    def __post_init__(self):
        for name in ("A_e4", "A_e5", "A_t", "C", "D"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.B = np.asarray(self.B, dtype=float)
        self.policies = tuple(tuple(p) for p in self.policies)
        if self.s is None:
            self.s = self.D.copy()
        for name in ("A_e4", "A_e5", "A_t"):
            cols = getattr(self, name).sum(axis=0)
            if not np.allclose(cols, 1.0, atol=1e-10):
                raise ValueError(f"{name} columns must sum to 1")
        if not np.allclose(self.B.sum(axis=1), 1.0, atol=1e-10):
            raise ValueError("B slices must be column-stochastic")


def build_default_model(soft_mix: float = 0.05, tactile_certainty: float = 0.99,
                        goal_preference: float = 0.9, policy_length: int = 2,
                        attached_units: tuple = ()) -> DiscreteModel:
    """The 6-state tool-use model with its standard matrices.

    Cause likelihoods map the position factor to the matching movement
    hypothesis (start -> stay, at_tool -> reach_tool, at_ball -> reach_ball;
    the virtual level has no tool-reaching hypothesis, so at_tool also maps
    to stay there), softened by mixing with a uniform at ``soft_mix``.
    Transitions encode the task logic; in particular reach_ball is a no-op
    while ungrasped, which is the structural zero that gates ball-directed
    behavior on having picked the tool.
    """
    pos_of = [0, 0, 1, 1, 2, 2]
    grasp_of = [0, 1, 0, 1, 0, 1]

    A_e4 = np.zeros((3, N_STATES))
    for s_idx in range(N_STATES):
        A_e4[pos_of[s_idx], s_idx] = 1.0
    A_e4 = (1 - soft_mix) * A_e4 + soft_mix / 3.0

    A_e5 = np.zeros((2, N_STATES))
    for s_idx in range(N_STATES):
        A_e5[1 if pos_of[s_idx] == 2 else 0, s_idx] = 1.0
    A_e5 = (1 - soft_mix) * A_e5 + soft_mix / 2.0

    A_t = np.empty((2, N_STATES))
    for s_idx in range(N_STATES):
        A_t[:, s_idx] = (1 - tactile_certainty, tactile_certainty) \
            if grasp_of[s_idx] else (tactile_certainty, 1 - tactile_certainty)

    B = np.zeros((len(ACTIONS), N_STATES, N_STATES))
    for s_idx in range(N_STATES):
        pos, grasp = pos_of[s_idx], grasp_of[s_idx]
        B[STAY, s_idx, s_idx] = 1.0
        # Reaching the tool ends with it in hand: the low-level controller
        # closes the grasp reflexively on contact, so the one-step
        # abstraction of that movement lands in the grasped state.
        B[REACH_TOOL, state_index(1, 1), s_idx] = 1.0
        # Reaching the ball moves the tool tip there, possible only in hand.
        B[REACH_BALL, state_index(2, 1) if grasp else s_idx, s_idx] = 1.0
        # Grasping works at the tool, is a no-op elsewhere.
        B[GRASP_ACT, state_index(pos, 1) if pos == 1 else s_idx, s_idx] = 1.0

    C = np.full(N_STATES, (1.0 - goal_preference) / (N_STATES - 1))
    C[state_index(2, 1)] = goal_preference

    D = np.zeros(N_STATES)
    D[state_index(0, 0)] = 1.0

    policies = tuple(itertools.product(range(len(ACTIONS)), repeat=policy_length))
    return DiscreteModel(A_e4, A_e5, A_t, B, C, D, policies,
                         attached_units=tuple(attached_units))


def expected_free_energy(model: DiscreteModel) -> np.ndarray:
    """Score each policy by rolling the state posterior through B.

    G_pi = sum_tau s_tau . (ln s_tau - ln C), one transition per policy
    action, starting from the current posterior. Lower is better.
    """
    ln_C = log_stable(model.C)
    G = np.empty(len(model.policies))
    for k, policy in enumerate(model.policies):
        s = model.s
        g = 0.0
        for action in policy:
            s = model.B[action] @ s
            g += float(s @ (log_stable(s) - ln_C))
        G[k] = g
    model.G = G
    return G


def infer_states(model: DiscreteModel, v4, v5, o_t) -> np.ndarray:
    """Fuse the state prior with cause and tactile messages.

    s = softmax( ln D + (ln A_e4)^T v4 + (ln A_e5)^T v5 + (ln A_t)^T o_t ).
    Stores and returns the posterior.
    """
    logits = (log_stable(model.D)
              + log_stable(model.A_e4).T @ np.asarray(v4, dtype=float)
              + log_stable(model.A_e5).T @ np.asarray(v5, dtype=float)
              + log_stable(model.A_t).T @ np.asarray(o_t, dtype=float))
    model.s = softmax(logits)
    return model.s


def plan_and_predict(model: DiscreteModel):
    """Plan, predict one step ahead, and broadcast fresh cause priors.

    Computes G, the policy posterior softmax(-G), and the policy-averaged
    one-step state prediction D = sum_pi pi_pi B[first action] s. Returns
    (A_e4 D, A_e5 D) and opens a new evidence window on every attached
    hybrid unit with those priors.
    """
    G = expected_free_energy(model)
    pi = softmax(-G)
    D = np.zeros(N_STATES)
    for weight, policy in zip(pi, model.policies):
        D += weight * (model.B[policy[0]] @ model.s)
    model.D = D
    v4_prior = model.A_e4 @ D
    v5_prior = model.A_e5 @ D
    priors = {3: v4_prior, 2: v5_prior}
    for unit in model.attached_units:
        unit.causes.reset_window(priors[unit.M])
    return v4_prior, v5_prior
