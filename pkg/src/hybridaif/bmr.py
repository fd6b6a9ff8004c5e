"""Hybrid units: discrete hypotheses over continuous trajectories.

A hybrid unit holds a continuous belief together with M *potential
trajectories* — hypothetical dynamics f_m the state might be following —
and a categorical distribution over them (the hidden causes). The coupling
runs both ways:

* top-down, the causes mix the trajectories into a single first-order
  prior (Bayesian model average): eta' = sum_m v_m f_m(mu);
* bottom-up, each trajectory is scored against the current first-order
  belief by Bayesian model reduction under a Laplace assumption, and the
  resulting log evidence accumulates into the causes.

Reduction treats each f_m(mu) as the mean of a *reduced* prior over the
state's motion and compares it, in closed form, against the full model
whose prior mean is the current mixture. With diagonal precisions the
whole computation is elementwise.

Conventions used throughout:

* ``mu`` is the 0th-order belief the trajectories are evaluated at;
* ``mu_prime`` plays the role of the full posterior mean over the motion;
* ``post_precision`` (P) is the Laplace posterior precision of the motion,
  constructed by the owner as the dynamics prior precision plus the
  precisions of whatever observation terms act on that belief;
* all arrays may have any shape; evidence sums run over every component,
  optionally restricted by a mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .beliefs import Precision, log_stable, softmax


@dataclass
class PotentialTrajectory:
    """One hypothesized evolution of a continuous state.

    ``dynamics_fn`` maps the 0th-order belief to a first-order prediction of
    identical shape. ``reduced_prior_precision`` is the precision of the
    reduced prior this trajectory defines (defaults to the owner's full
    prior precision when None, which makes identity reductions exact).
    """

    id: str
    dynamics_fn: Callable[[np.ndarray], np.ndarray]
    reduced_prior_precision: Precision | float | None = None

    def __call__(self, mu: np.ndarray) -> np.ndarray:
        out = np.asarray(self.dynamics_fn(mu), dtype=float)
        if out.shape != np.shape(mu):
            raise ValueError(
                f"trajectory '{self.id}' returned shape {out.shape}, "
                f"expected {np.shape(mu)}"
            )
        return out

    def jacobian_T_apply(self, mu: np.ndarray, vec: np.ndarray) -> np.ndarray:
        """Return (df/dmu)^T vec. Subclasses with structure override this."""
        raise NotImplementedError(
            f"trajectory '{self.id}' has no Jacobian; use a structured subclass"
        )


class EntityMixTrajectory(PotentialTrajectory):
    """Linear trajectory f(x) = (K - I) x acting on the entity axis.

    States are laid out (entities, components); K is an (entities, entities)
    selection/mixing matrix defining the attractor i(x) = K x, and the
    dynamics point from the current state to the attractor.

    The backward force uses only the diagonal of K - I: each slot's
    dynamics error stabilizes that slot's own belief and nothing else.
    The off-diagonal (full-Jacobian) terms would drag the attractor's
    target belief toward whatever is being attracted -- an arm reaching
    for a tool would pull its tool belief back toward the hand, letting
    the network settle with the believed target displaced toward the
    body and the real one never reached. Target beliefs should answer
    to their own observations and chain constraints alone, so the
    cross-couplings are deliberately dropped from the gradient.

    ``components`` restricts the attractor to a subset of the component
    axis (e.g. position only, leaving orientation to follow the
    kinematics); unlisted components get zero dynamics.
    ``component_weights`` instead scales each component's dynamics by a
    factor, for attractors that should pull softly on some components
    (a small orientation weight steers the approach without fighting
    the position pull); it is mutually exclusive with ``components``.
    """

    def __init__(self, id: str, mix: np.ndarray,
                 reduced_prior_precision=None, components=None,
                 component_weights=None):
        self.mix = np.asarray(mix, dtype=float)
        if self.mix.ndim != 2 or self.mix.shape[0] != self.mix.shape[1]:
            raise ValueError("mix must be a square entity matrix")
        if components is not None and component_weights is not None:
            raise ValueError("pass components or component_weights, not both")
        kmi = self.mix - np.eye(self.mix.shape[0])
        self.components = None if components is None else tuple(components)
        self.component_weights = (None if component_weights is None
                                  else np.asarray(component_weights, float))

        def dynamics(x, _K=kmi):
            out = _K @ np.asarray(x, dtype=float)
            return out * self._component_mask(out.shape[-1])

        super().__init__(id=id, dynamics_fn=dynamics,
                         reduced_prior_precision=reduced_prior_precision)
        self._kmi = kmi
        self._kmi_diag = np.diag(kmi).copy()

    @property
    def is_stay(self) -> bool:
        return not np.any(self._kmi)

    def _component_mask(self, n_comp: int) -> np.ndarray:
        keep = np.ones(n_comp)
        if self.components is not None:
            keep[:] = 0.0
            keep[list(self.components)] = 1.0
        elif self.component_weights is not None:
            keep[:] = self.component_weights[:n_comp]
        return keep

    def jacobian_T_apply(self, mu: np.ndarray, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        keep = self._component_mask(vec.shape[-1])
        return self._kmi_diag[:, None] * (vec * keep)

    def jacobian_dense(self, mu: np.ndarray) -> np.ndarray:
        """The (dim, dim) backward-force map of the flattened state.

        This is the diagonal of the analytic Jacobian (see the class
        docstring for why the cross-entity terms are dropped), exposed
        densely for verification.
        """
        n_comp = int(np.asarray(mu).shape[-1])
        return np.kron(np.diag(self._kmi_diag),
                       np.diag(self._component_mask(n_comp)))


@dataclass
class HiddenCauses:
    """Categorical belief over a unit's potential trajectories.

    ``prior`` is the top-down prediction for the current window, ``posterior``
    the working distribution (prior re-weighted by accumulated evidence), and
    ``log_evidence`` the per-trajectory accumulator that is reset to zero at
    every replanning boundary.
    """

    prior: np.ndarray
    posterior: np.ndarray = None
    log_evidence: np.ndarray = None

    def __post_init__(self):
        self.prior = np.asarray(self.prior, dtype=float)
        if self.posterior is None:
            self.posterior = self.prior.copy()
        else:
            self.posterior = np.asarray(self.posterior, dtype=float)
        if self.log_evidence is None:
            self.log_evidence = np.zeros_like(self.prior)
        else:
            self.log_evidence = np.asarray(self.log_evidence, dtype=float)
        for name in ("prior", "posterior"):
            p = getattr(self, name)
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-8:
                raise ValueError(f"{name} must be a probability vector, got {p}")

    @property
    def M(self) -> int:
        return self.prior.size

    def reset_window(self, prior: np.ndarray):
        """Start a new accumulation window from a fresh top-down prior."""
        prior = np.asarray(prior, dtype=float)
        self.prior = prior
        self.posterior = prior.copy()
        self.log_evidence = np.zeros_like(prior)


@dataclass
class HybridUnit:
    """State needed to run both directions of the discrete/continuous coupling.

    ``mu`` is a reference to the unit's current 0th-order belief, refreshed by
    the owner before evidence accumulation. ``mask`` (same shape as the state,
    or None) restricts evidence sums to the components that actually exist,
    which matters when states are stored in padded arrays.
    """

    name: str
    trajectories: Sequence[PotentialTrajectory]
    causes: HiddenCauses
    prior_precision: np.ndarray | float      # Pi_x of the full dynamics prior
    post_precision: np.ndarray | float       # P, Laplace posterior precision
    mu: np.ndarray = None
    mask: np.ndarray = None

    def __post_init__(self):
        if len(self.trajectories) != self.causes.M:
            raise ValueError(
                f"unit '{self.name}': {len(self.trajectories)} trajectories "
                f"but {self.causes.M} causes"
            )

    @property
    def M(self) -> int:
        return self.causes.M


def bma_trajectory(causes: HiddenCauses,
                   trajectories: Sequence[PotentialTrajectory],
                   mu: np.ndarray) -> np.ndarray:
    """Bayesian model average of the trajectories: sum_m v_m f_m(mu).

    Uses the causes' posterior, so within a window the mixture tracks the
    evidence accumulated so far. Linear in the cause vector.
    """
    v = causes.posterior
    if len(trajectories) != v.size:
        raise ValueError("trajectory count does not match cause dimension")
    out = np.zeros_like(np.asarray(mu, dtype=float))
    for vm, f in zip(v, trajectories):
        if vm != 0.0:
            out += vm * f(mu)
    return out


def bma_jacobian_T_apply(causes: HiddenCauses,
                         trajectories: Sequence[PotentialTrajectory],
                         mu: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """(d/dmu of the model average)^T applied to vec: sum_m v_m J_m^T vec."""
    v = causes.posterior
    out = np.zeros_like(np.asarray(vec, dtype=float))
    for vm, f in zip(v, trajectories):
        if vm != 0.0:
            out += vm * f.jacobian_T_apply(mu, vec)
    return out


def reduced_posterior(full_post_mean, full_post_prec, full_prior_mean,
                      full_prior_prec, reduced_prior_mean, reduced_prior_prec):
    """Closed-form posterior of a reduced model under the Laplace assumption.

    P_m = P - Pi + Pi_m;  mu_m = (P mu - Pi eta + Pi_m eta_m) / P_m.
    All precisions diagonal, so the algebra is elementwise. Raises on a
    nonpositive reduced precision, which signals an inconsistent precision
    configuration rather than a numerical accident.
    """
    mu = np.asarray(full_post_mean, dtype=float)
    P = np.asarray(full_post_prec, dtype=float)
    eta = np.asarray(full_prior_mean, dtype=float)
    Pi = np.asarray(full_prior_prec, dtype=float)
    eta_m = np.asarray(reduced_prior_mean, dtype=float)
    Pi_m = np.asarray(reduced_prior_prec, dtype=float)

    P_m = P - Pi + Pi_m
    if np.any(P_m <= 0):
        raise ValueError("degenerate reduced precision")
    mu_m = (P * mu - Pi * eta + Pi_m * eta_m) / P_m
    return mu_m, P_m


def evidence_increments(unit: HybridUnit, mu_prime, dt: float) -> np.ndarray:
    """Per-trajectory log-evidence increments for one continuous step.

    For each trajectory m, the reduced prior mean is eta_m = f_m(mu)
    re-evaluated at the current belief, the full prior mean is the current
    model average, and the increment is

        dt * 1/2 * ( mu_m^T P_m mu_m - eta_m^T Pi_m eta_m
                     - mu'^T P mu' + eta^T Pi eta )

    summed over the unit's (masked) components.
    """
    mu = np.asarray(unit.mu, dtype=float)
    mup = np.asarray(mu_prime, dtype=float)
    P = np.broadcast_to(np.asarray(unit.post_precision, dtype=float), mu.shape)
    Pi = np.broadcast_to(np.asarray(unit.prior_precision, dtype=float), mu.shape)
    mask = None if unit.mask is None else np.asarray(unit.mask, dtype=float)

    eta = bma_trajectory(unit.causes, unit.trajectories, mu)

    def _sum(x):
        return float((x if mask is None else x * mask).sum())

    base = -_sum(mup * P * mup) + _sum(eta * Pi * eta)
    inc = np.empty(unit.M)
    for m, f in enumerate(unit.trajectories):
        Pi_m = f.reduced_prior_precision
        Pi_m = Pi if Pi_m is None else np.broadcast_to(np.asarray(Pi_m, float), mu.shape)
        eta_m = f(mu)
        mu_m, P_m = reduced_posterior(mup, P, eta, Pi, eta_m, Pi_m)
        inc[m] = 0.5 * dt * (_sum(mu_m * P_m * mu_m) - _sum(eta_m * Pi_m * eta_m) + base)
    return inc


def accumulate_log_evidence(unit: HybridUnit, mu_prime, dt: float) -> np.ndarray:
    """Add one step's evidence increments to the unit's causes.

    Returns the updated log-evidence vector. dt = 0 leaves it unchanged.
    """
    if dt != 0.0:
        unit.causes.log_evidence = unit.causes.log_evidence + evidence_increments(unit, mu_prime, dt)
    return unit.causes.log_evidence


def posterior_causes(unit: HybridUnit) -> np.ndarray:
    """Re-weight the cause prior by accumulated evidence: v = softmax(ln H + l).

    Stores and returns the posterior. Zero prior entries are floored before
    the log so structurally impossible causes stay effectively impossible
    without producing -inf.
    """
    post = softmax(log_stable(unit.causes.prior) + unit.causes.log_evidence)
    unit.causes.posterior = post
    return post
