"""Hierarchical kinematic beliefs: intrinsic/extrinsic units over entity pathways.

The agent's continuous model is a chain of kinematic levels. Each level
holds, per entity pathway, an intrinsic belief [theta, length] (a joint
angle and a segment length) and an extrinsic belief [x, y, phi] (segment
endpoint position and absolute orientation), both in generalized
coordinates up to first order. Levels chain through the roto-translation
likelihood: the extrinsic state of a level is predicted from its own
intrinsic state applied to the parent level's extrinsic state.

Entity pathways (actual body, tool, ball) run in parallel through the same
chain and never mix inside likelihoods; they interact only through the
dynamics functions of hybrid units, which attract one pathway's state
toward another's. Any level may carry a hybrid unit whose trajectory
mixture supplies the first-order dynamics prior and whose hidden causes
accumulate log evidence (levels without a unit have pure "stay" dynamics,
i.e. a zero first-order prior).

All updates follow a synchronous (Jacobi) discipline: every force of a
step is computed from the step's opening snapshot, then all beliefs
integrate at once. The fused `sweep` does this for the whole grid in
vectorized form; `update_intrinsic` / `update_extrinsic` expose the same
mathematics level by level and match the fused path exactly when driven
in the two-phase order (all intrinsic updates, then all extrinsic ones).

Positions here are in the agent's normalized units (arena pixels divided
by the configured position scale); angles are radians in both frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beliefs import NumericsError, PredictionError
from .bmr import (HybridUnit, accumulate_log_evidence, bma_jacobian_T_apply,
                  bma_trajectory, posterior_causes)
from .kinematics import jac_intrinsic, jac_parent, roto_translate, wrap_angle

# Component indices of the two belief kinds.
THETA, LENGTH = 0, 1
PX, PY, PHI = 0, 1, 2


@dataclass(frozen=True)
class LevelTopology:
    """Where a level sits in the chain and which entity slots it carries."""

    level_index: int
    parent: int | None            # parent level index; None at the root
    children: tuple               # child level indices (chain: at most one)
    entities: tuple               # entity slot indices present at this level


@dataclass
class SweepInfo:
    """Everything one synchronous step computed, for diagnostics and traces.

    The five extrinsic force terms are reported separately (drift, own
    likelihood error, child errors mapped backward, visual error, dynamics
    backward error); their sum is the integrated d_mu_e exactly.
    """

    eps_p: np.ndarray             # (n_proprio,) proprioceptive errors
    eps_e: np.ndarray             # (L, E, 3) extrinsic consistency errors
    eps_v: np.ndarray             # (L, E, 2) visual errors
    eps_x_e: np.ndarray           # (L, E, 3) extrinsic dynamics errors
    eps_x_i: np.ndarray           # (L, E, 2) intrinsic dynamics errors
    eta_e: np.ndarray             # (L, E, 3) extrinsic first-order priors
    forces_e: dict                # name -> (L, E, 3), the five terms
    d_mu_e: np.ndarray            # (L, E, 3) integrated extrinsic velocity
    d_mu_e_p: np.ndarray
    d_mu_i: np.ndarray            # (L, E, 2)
    d_mu_i_p: np.ndarray


class ChildExtrinsicError(PredictionError):
    """A level's extrinsic error plus its backward force on the parent.

    The backward force (the child transform's parent-Jacobian transpose
    applied to the weighted error) is evaluated on the step's opening
    snapshot by update_intrinsic, so that a later update_extrinsic call on
    the parent can integrate it without re-reading already-updated beliefs.
    """

    def __init__(self, value, precision, parent_force):
        super().__init__(value=value, precision=precision)
        self.parent_force = np.asarray(parent_force, dtype=float)


class Hierarchy:
    """The full (levels x entities) belief grid and its update kernels.

    Parameters
    ----------
    base_pose : (3,) array
        Extrinsic pose [x, y, phi] the root level hangs from (normalized).
    entity_mask : (L, E) bool array
        Which entity slots exist at each level.
    pi_proprio : (L,) array
        Precision of the joint-angle observation per level (0 = none).
        Levels with positive entries, in order, consume the entries of the
        proprioceptive observation vector.
    pi_visual : (L, E) array
        Precision of the position observation per level and entity
        (0 = unobserved).
    pi_extrinsic : (L,) or (L, 3) array
        Precision of the roto-translation consistency likelihood. A (L, 3)
        array gives each pose component (x, y, orientation) its own
        precision; a flat (L,) array applies one value to all three.
    pi_dyn_ext, pi_dyn_int : (L,) arrays
        Precisions of the extrinsic/intrinsic dynamics priors.
    pi_length, length_target : (L,) or (L, E) arrays
        Precision and mean of a Gaussian prior pinning segment lengths
        (0 precision = free length, as on a slot whose geometry must be
        inferred). A flat (L,) array applies one value to every entity of
        the level; (L, E) arrays pin each slot separately. The target may
        be rewritten between steps, which turns the prior into a tracking
        link: one belief's inferred length can serve as another slot's
        prior mean without any backward coupling.
    pi_theta, theta_target : (L,) or (L, E) arrays, optional
        The same kind of prior on segment angles (default: no prior
        anywhere). Used to slave an unobservable link's direction to an
        inferred one, e.g. so a goal pathway assumes the geometry of the
        instrument actually in hand.
    ext_units : dict level -> HybridUnit
        Hybrid units supplying extrinsic dynamics. Units listed in
        evidence_levels also accumulate log evidence and refresh their
        cause posterior every step.
    int_units : dict level -> HybridUnit
        Optional intrinsic-dynamics units (joint-space intentions).
    min_length : float
        Lower clamp applied to length beliefs after every step. Zero (the
        default) disables it, making lengths signed: a link whose believed
        direction is wrong can shrink through zero and regrow the other
        way. A positive floor creates a trap there instead -- at zero
        length the angle has no lever arm, so a link pinned against the
        floor while its error points backward can neither rotate nor
        grow.
    theta_limit : float, optional
        Actuator range of the controllable chain. Joint-angle beliefs of
        entity slot 0 on proprioceptive levels are clamped to
        [-theta_limit, theta_limit] after every step, mirroring the
        plant's own limits so inverse kinematics cannot settle on
        configurations the arm cannot adopt.
    """

    def __init__(self, *, base_pose, entity_mask, pi_proprio, pi_visual,
                 pi_extrinsic, pi_dyn_ext, pi_dyn_int, pi_length,
                 length_target, pi_theta=None, theta_target=None,
                 ext_units=None, int_units=None,
                 evidence_levels=(), min_length=0.0, theta_limit=None):
        self.base_pose = np.asarray(base_pose, dtype=float)
        self.entity_mask = np.asarray(entity_mask, dtype=bool)
        self.n_levels, self.n_entities = self.entity_mask.shape
        L, E = self.n_levels, self.n_entities
        self.pi_proprio = np.asarray(pi_proprio, dtype=float)
        self.pi_visual = np.asarray(pi_visual, dtype=float)
        self.pi_extrinsic = np.asarray(pi_extrinsic, dtype=float)
        self.pi_dyn_ext = np.asarray(pi_dyn_ext, dtype=float)
        self.pi_dyn_int = np.asarray(pi_dyn_int, dtype=float)
        self.pi_length = np.asarray(pi_length, dtype=float)
        self.length_target = np.asarray(length_target, dtype=float)
        self.pi_theta = np.zeros(L) if pi_theta is None else \
            np.asarray(pi_theta, dtype=float)
        self.theta_target = np.zeros(L) if theta_target is None else \
            np.asarray(theta_target, dtype=float)
        self.ext_units = dict(ext_units or {})
        self.int_units = dict(int_units or {})
        self.evidence_levels = tuple(evidence_levels)
        self.min_length = float(min_length)
        self.theta_limit = None if theta_limit is None else float(theta_limit)

        for name in ("pi_proprio", "pi_dyn_ext", "pi_dyn_int"):
            if getattr(self, name).shape != (L,):
                raise ValueError(f"{name} must have shape ({L},)")
        for name in ("pi_length", "length_target", "pi_theta",
                     "theta_target"):
            arr = getattr(self, name)
            if arr.shape == (L,):
                setattr(self, name, np.repeat(arr[:, None], E, axis=1))
            elif arr.shape != (L, E):
                raise ValueError(f"{name} must have shape ({L},) "
                                 f"or ({L}, {E})")
        if self.pi_extrinsic.shape == (L,):
            self.pi_extrinsic = np.repeat(self.pi_extrinsic[:, None], 3,
                                          axis=1)
        if self.pi_extrinsic.shape != (L, 3):
            raise ValueError(f"pi_extrinsic must have shape ({L},) "
                             f"or ({L}, 3)")
        if self.pi_visual.shape != (L, E):
            raise ValueError(f"pi_visual must have shape ({L}, {E})")
        missing = set(self.evidence_levels) - set(self.ext_units)
        if missing:
            raise ValueError(f"evidence levels {sorted(missing)} have no unit")

        # Precomputed masks/slices used by every step.
        self._mask2 = self.entity_mask[..., None].astype(float)      # (L,E,1)
        self._prop_levels = np.flatnonzero(self.pi_proprio > 0)
        self._vis_mask = self.pi_visual > 0
        # Entity-slot slice per level (units operate on present slots only).
        self._eslice = tuple(
            slice(int(np.flatnonzero(row)[0]), int(np.flatnonzero(row)[-1]) + 1)
            for row in self.entity_mask)
        for lvl, row in enumerate(self.entity_mask):
            if row[self._eslice[lvl]].sum() != row.sum():
                raise ValueError(f"level {lvl}: present entities must be contiguous")

        self.topology = tuple(
            LevelTopology(level_index=lvl,
                          parent=lvl - 1 if lvl > 0 else None,
                          children=(lvl + 1,) if lvl + 1 < L else (),
                          entities=tuple(np.flatnonzero(self.entity_mask[lvl])))
            for lvl in range(L))

        self.mu_i = np.zeros((L, E, 2))
        self.mu_i_p = np.zeros((L, E, 2))
        self.mu_e = np.zeros((L, E, 3))
        self.mu_e_p = np.zeros((L, E, 3))

        # Per-level likelihood errors computed by update_intrinsic and
        # consumed by update_extrinsic within the same two-phase step, so
        # phase 2 sees the step's opening snapshot even though phase 1 has
        # already moved the intrinsic beliefs.
        self._pending_eps_e = {}

    # ------------------------------------------------------------------
    # chain plumbing

    @property
    def n_proprio(self) -> int:
        return int(self._prop_levels.size)

    def parent_extrinsic(self, level: int = None) -> np.ndarray:
        """Extrinsic pose(s) each level hangs from: (E, 3) or (L, E, 3)."""
        if level is not None:
            if level == 0:
                return np.broadcast_to(self.base_pose,
                                       (self.n_entities, 3)).copy()
            return self.mu_e[level - 1]
        out = np.empty_like(self.mu_e)
        out[0] = self.base_pose
        out[1:] = self.mu_e[:-1]
        return out

    def init_from_intrinsic(self, theta, lengths) -> None:
        """Reset the grid: intrinsic beliefs set, extrinsic chained by the map.

        theta, lengths: (L, E) arrays (broadcastable). First-order beliefs
        reset to zero; absent slots to zero.
        """
        L, E = self.n_levels, self.n_entities
        self.mu_i[..., THETA] = np.broadcast_to(theta, (L, E))
        self.mu_i[..., LENGTH] = np.broadcast_to(lengths, (L, E))
        self.mu_i_p[:] = 0.0
        self.mu_e_p[:] = 0.0
        parent = np.broadcast_to(self.base_pose, (E, 3))
        for lvl in range(L):
            self.mu_e[lvl] = roto_translate(self.mu_i[lvl], parent)
            parent = self.mu_e[lvl]
        self.mu_i *= self._mask2
        self.mu_e *= self._mask2

    # ------------------------------------------------------------------
    # likelihoods (pure functions of the current beliefs)

    def extrinsic_likelihood(self, level: int) -> np.ndarray:
        """Predicted extrinsic poses at a level, (E, 3); absent slots zero."""
        g = roto_translate(self.mu_i[level], self.parent_extrinsic(level))
        return g * self._mask2[level]

    def proprio_likelihood(self, level: int) -> float:
        """Predicted joint angle at a level (the actual pathway's theta)."""
        if self.pi_proprio[level] <= 0:
            raise ValueError(f"level {level} emits no proprioceptive prediction")
        return float(self.mu_i[level, 0, THETA])

    def visual_likelihood(self, level: int) -> np.ndarray:
        """Predicted positions of the level's present entities, (2, n)."""
        sl = self._eslice[level]
        return self.mu_e[level, sl, :2].T.copy()

    # ------------------------------------------------------------------
    # shared per-step kernels (everything reads snapshot arrays)

    def _dynamics_prior_ext(self, level: int, accumulate: bool, dt: float):
        """Evidence + cause posterior + model-average prior for one level.

        Returns the (E, 3) first-order prior (zeros where no unit/slot).
        """
        eta = np.zeros((self.n_entities, 3))
        unit = self.ext_units.get(level)
        if unit is None:
            return eta
        sl = self._eslice[level]
        unit.mu = self.mu_e[level, sl]
        if accumulate and level in self.evidence_levels and dt > 0.0:
            accumulate_log_evidence(unit, self.mu_e_p[level, sl], dt)
            posterior_causes(unit)
        eta[sl] = bma_trajectory(unit.causes, unit.trajectories, unit.mu)
        return eta

    def _dynamics_prior_int(self, level: int):
        eta = np.zeros((self.n_entities, 2))
        unit = self.int_units.get(level)
        if unit is None:
            return eta
        sl = self._eslice[level]
        unit.mu = self.mu_i[level, sl]
        eta[sl] = bma_trajectory(unit.causes, unit.trajectories, unit.mu)
        return eta

    def _dyn_backward(self, units: dict, level: int, w_eps_x: np.ndarray,
                      mu: np.ndarray) -> np.ndarray:
        """(d eta / d mu)^T applied to the weighted dynamics error."""
        out = np.zeros_like(w_eps_x)
        unit = units.get(level)
        if unit is not None:
            sl = self._eslice[level]
            out[sl] = bma_jacobian_T_apply(unit.causes, unit.trajectories,
                                           mu[sl], w_eps_x[sl])
        return out

    def _relax_intrinsic_priors(self, dt: float, level=None) -> None:
        """Pull intrinsic beliefs toward their prior means, integrated exactly.

        These linear restoring priors (segment lengths, tracked link
        angles) can be far stiffer than every other term -- the arm's own
        segment lengths are nearly certain -- so they are applied as their
        exact exponential relaxation instead of inside the Euler step,
        which would go unstable at a precision above 2 / dt.

        At joint levels (those with proprioceptive input) the angle
        relaxation acts on the wrapped difference, so a belief is pulled
        toward its target through the shorter rotation. Top-level link
        angles relax linearly: their targets can sit near the +-pi branch
        cut, where wrapping would make the pull flip sides.
        """
        sel = slice(None) if level is None else level
        mask = self._mask2[sel, :, 0]

        decay = np.exp(-self.pi_theta[sel] * dt)
        tgt = self.theta_target[sel]
        delta = self.mu_i[sel, :, THETA] - tgt
        if level is None:
            joints = self.pi_proprio > 0
            delta[joints] = wrap_angle(delta[joints])
        elif self.pi_proprio[level] > 0:
            delta = wrap_angle(delta)
        self.mu_i[sel, :, THETA] = (tgt + delta * decay) * mask

        decay = np.exp(-self.pi_length[sel] * dt)
        tgt = self.length_target[sel]
        self.mu_i[sel, :, LENGTH] = (tgt + (self.mu_i[sel, :, LENGTH] - tgt)
                                     * decay) * mask

    def _clamp_thetas(self, level=None) -> None:
        """Keep joint-angle beliefs inside the actuator's reachable set.

        Slot 0 is the pathway the actuator follows, so its joint beliefs
        are clipped to the physical range. The other pathways are inferred
        arm configurations with no actuator attached; their joint beliefs
        live on the circle and are wrapped into (-pi, pi] instead, which
        lets an inferred solution cross the branch cut and re-enter from
        the other side rather than pile up against a wall it never feels.
        """
        if self.theta_limit is None:
            return
        lim = self.theta_limit
        if level is None:
            sel = self._prop_levels
            self.mu_i[sel, 0, THETA] = np.clip(self.mu_i[sel, 0, THETA],
                                               -lim, lim)
            self.mu_i[sel, 1:, THETA] = wrap_angle(self.mu_i[sel, 1:, THETA])
        elif self.pi_proprio[level] > 0:
            self.mu_i[level, 0, THETA] = min(
                max(self.mu_i[level, 0, THETA], -lim), lim)
            self.mu_i[level, 1:, THETA] = wrap_angle(
                self.mu_i[level, 1:, THETA])

    def _check_finite(self, what: str, arr: np.ndarray) -> None:
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))
            raise NumericsError(
                what, f"non-finite at (level, entity, component) "
                f"{tuple(bad[0])}")

    # ------------------------------------------------------------------
    # fused synchronous step

    def sweep(self, y_p, vis_obs, dt: float, accumulate: bool = True) -> SweepInfo:
        """One synchronous belief-update step over the whole grid.

        y_p : (n_proprio,) observed joint angles for the proprioceptive
            levels, in chain order.
        vis_obs : (L, E, 2) observed positions; entries where pi_visual is
            zero are ignored.
        """
        L, E = self.n_levels, self.n_entities
        y_p = np.asarray(y_p, dtype=float)
        vis_obs = np.asarray(vis_obs, dtype=float)
        mu_i, mu_i_p = self.mu_i, self.mu_i_p
        mu_e, mu_e_p = self.mu_e, self.mu_e_p
        mask = self._mask2

        # --- likelihood predictions and errors (snapshot) ---------------
        parent = self.parent_extrinsic()
        g_e = roto_translate(mu_i, parent)
        eps_e = (mu_e - g_e) * mask
        w_eps_e = self.pi_extrinsic[:, None, :] * eps_e

        eps_p = y_p - mu_i[self._prop_levels, 0, THETA]
        w_eps_p = self.pi_proprio[self._prop_levels] * eps_p

        eps_v = np.where(self._vis_mask[..., None],
                         vis_obs - mu_e[..., :2], 0.0)
        w_eps_v = self.pi_visual[..., None] * eps_v

        # --- dynamics priors (evidence accumulation happens here) -------
        eta_e = np.empty((L, E, 3))
        for lvl in range(L):
            eta_e[lvl] = self._dynamics_prior_ext(lvl, accumulate, dt)
        eps_x_e = (mu_e_p - eta_e) * mask
        w_eps_x_e = self.pi_dyn_ext[:, None, None] * eps_x_e

        eta_i = np.empty((L, E, 2))
        for lvl in range(L):
            eta_i[lvl] = self._dynamics_prior_int(lvl)
        eps_x_i = (mu_i_p - eta_i) * mask
        w_eps_x_i = self.pi_dyn_int[:, None, None] * eps_x_i

        # --- extrinsic forces -------------------------------------------
        J_par = jac_parent(mu_i, parent)
        child_force = np.zeros_like(mu_e)
        child_force[:-1] = np.einsum('leij,lei->lej', J_par[1:], w_eps_e[1:])

        vis_force = np.zeros_like(mu_e)
        vis_force[..., :2] = w_eps_v

        dyn_back_e = np.empty_like(mu_e)
        for lvl in range(L):
            dyn_back_e[lvl] = self._dyn_backward(self.ext_units, lvl,
                                                 w_eps_x_e[lvl], mu_e[lvl])

        forces_e = {"drift": mu_e_p * mask, "own_error": -w_eps_e,
                    "child": child_force, "visual": vis_force,
                    "dynamics": dyn_back_e}
        d_mu_e = (mu_e_p - w_eps_e + child_force + vis_force + dyn_back_e) * mask
        d_mu_e_p = -w_eps_x_e

        # --- intrinsic forces -------------------------------------------
        J_int = jac_intrinsic(mu_i, parent)
        kin_force = np.einsum('leij,lei->lej', J_int, w_eps_e)
        prop_force = np.zeros_like(mu_i)
        prop_force[self._prop_levels, 0, THETA] = w_eps_p
        dyn_back_i = np.empty_like(mu_i)
        for lvl in range(L):
            dyn_back_i[lvl] = self._dyn_backward(self.int_units, lvl,
                                                 w_eps_x_i[lvl], mu_i[lvl])

        d_mu_i = (mu_i_p + prop_force + kin_force + dyn_back_i) * mask
        d_mu_i_p = -w_eps_x_i

        # --- synchronous integration ------------------------------------
        self.mu_e = mu_e + dt * d_mu_e
        self.mu_e_p = mu_e_p + dt * d_mu_e_p
        self.mu_i = mu_i + dt * d_mu_i
        self.mu_i_p = mu_i_p + dt * d_mu_i_p
        self._relax_intrinsic_priors(dt)
        if self.min_length > 0.0:
            np.maximum(self.mu_i[..., LENGTH], self.min_length,
                       out=self.mu_i[..., LENGTH])
        self._clamp_thetas()
        self._check_finite("intrinsic beliefs", self.mu_i)
        self._check_finite("extrinsic beliefs", self.mu_e)
        self._check_finite("intrinsic velocity beliefs", self.mu_i_p)
        self._check_finite("extrinsic velocity beliefs", self.mu_e_p)

        return SweepInfo(eps_p=eps_p, eps_e=eps_e, eps_v=eps_v,
                         eps_x_e=eps_x_e, eps_x_i=eps_x_i, eta_e=eta_e,
                         forces_e=forces_e, d_mu_e=d_mu_e, d_mu_e_p=d_mu_e_p,
                         d_mu_i=d_mu_i, d_mu_i_p=d_mu_i_p)

    # ------------------------------------------------------------------
    # per-level operations (same math, one level at a time)
    #
    # Protocol for a full synchronous step: call update_intrinsic on every
    # level first (collecting the returned extrinsic errors), then
    # update_extrinsic on every level, passing each level the errors of its
    # children. Driven that way, the result matches `sweep` exactly.

    def update_intrinsic(self, level: int, proprio_obs, dt: float):
        """Update one level's intrinsic beliefs; return its likelihood errors.

        proprio_obs is the observed joint angle (None on levels without a
        proprioceptive stream). Returns (proprio PredictionError or None,
        extrinsic ChildExtrinsicError); the latter is what the parent
        level's update_extrinsic expects in child_errors.
        """
        mask = self._mask2[level]
        parent = self.parent_extrinsic(level)
        g = roto_translate(self.mu_i[level], parent)
        eps_e = (self.mu_e[level] - g) * mask
        w_eps_e = self.pi_extrinsic[level] * eps_e
        parent_force = np.einsum('eij,ei->ej',
                                 jac_parent(self.mu_i[level], parent), w_eps_e)
        ext_err = ChildExtrinsicError(value=eps_e,
                                      precision=self.pi_extrinsic[level],
                                      parent_force=parent_force)
        self._pending_eps_e[level] = w_eps_e

        prop_err = None
        prop_force = np.zeros((self.n_entities, 2))
        if self.pi_proprio[level] > 0 and proprio_obs is not None:
            e = float(proprio_obs) - self.mu_i[level, 0, THETA]
            prop_err = PredictionError(value=e,
                                       precision=self.pi_proprio[level])
            prop_force[0, THETA] = self.pi_proprio[level] * e

        eta_i = self._dynamics_prior_int(level)
        eps_x_i = (self.mu_i_p[level] - eta_i) * mask
        w_eps_x_i = self.pi_dyn_int[level] * eps_x_i

        kin_force = np.einsum('eij,ei->ej',
                              jac_intrinsic(self.mu_i[level], parent), w_eps_e)
        dyn_back = self._dyn_backward(self.int_units, level, w_eps_x_i,
                                      self.mu_i[level])

        d_mu = (self.mu_i_p[level] + prop_force + kin_force + dyn_back) * mask
        self.mu_i[level] = self.mu_i[level] + dt * d_mu
        self.mu_i_p[level] = self.mu_i_p[level] - dt * w_eps_x_i
        self._relax_intrinsic_priors(dt, level)
        if self.min_length > 0.0:
            np.maximum(self.mu_i[level, :, LENGTH], self.min_length,
                       out=self.mu_i[level, :, LENGTH])
        self._clamp_thetas(level)
        self._check_finite(f"intrinsic level {level}", self.mu_i[level])
        return prop_err, ext_err

    def update_extrinsic(self, level: int, visual_obs, child_errors,
                         dt: float) -> None:
        """Update one level's extrinsic beliefs from its five forces.

        visual_obs is the (E, 2) observed-position grid for this level
        (entries without a positive visual precision are ignored; None
        means no visual stream at all). child_errors is the list of
        ChildExtrinsicError values returned by the children's
        update_intrinsic calls this step.
        """
        mask = self._mask2[level]
        w_eps_e = self._pending_eps_e.pop(level, None)
        if w_eps_e is None:
            # Standalone use (no preceding update_intrinsic this step).
            own = roto_translate(self.mu_i[level], self.parent_extrinsic(level))
            w_eps_e = self.pi_extrinsic[level] * (self.mu_e[level] - own) * mask

        child_force = np.zeros((self.n_entities, 3))
        for err in child_errors:
            child_force += err.parent_force

        vis_force = np.zeros((self.n_entities, 3))
        if visual_obs is not None:
            eps_v = np.where(self._vis_mask[level][:, None],
                             np.asarray(visual_obs, float) - self.mu_e[level, :, :2],
                             0.0)
            vis_force[:, :2] = self.pi_visual[level][:, None] * eps_v

        eta_e = self._dynamics_prior_ext(level, accumulate=True, dt=dt)
        eps_x_e = (self.mu_e_p[level] - eta_e) * mask
        w_eps_x_e = self.pi_dyn_ext[level] * eps_x_e
        dyn_back = self._dyn_backward(self.ext_units, level, w_eps_x_e,
                                      self.mu_e[level])

        d_mu = (self.mu_e_p[level] - w_eps_e + child_force + vis_force
                + dyn_back) * mask
        self.mu_e[level] = self.mu_e[level] + dt * d_mu
        self.mu_e_p[level] = self.mu_e_p[level] - dt * w_eps_x_e
        self._check_finite(f"extrinsic level {level}", self.mu_e[level])
