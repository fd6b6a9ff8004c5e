"""Shared numerical substrate for continuous belief updating.

Beliefs are kept in generalized coordinates limited to two temporal orders:
a value ``mu`` and its rate of change ``mu_prime``. Every unit in the
hierarchy updates them by Euler-integrating precision-weighted prediction
errors, so this module provides exactly three things: the belief container,
the error container, and the small set of operations (softmax, integration,
error construction) everything else is built from.

Precisions are diagonal throughout: a scalar or a vector of inverse
variances broadcastable against the error it weights. No full covariance
matrices are propagated anywhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Floor applied to categorical probabilities before any log. Transition and
# likelihood matrices contain structural zeros that must survive untouched in
# linear operations; the floor exists only to keep logs finite.
PROB_FLOOR = 1e-16


class NumericsError(RuntimeError):
    """A belief update produced non-finite values.

    Carries the name of the offending unit so a trial abort can say which
    part of the hierarchy blew up.
    """

    def __init__(self, unit: str, detail: str = ""):
        self.unit = unit
        msg = f"non-finite update in unit '{unit}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


def softmax(logits) -> np.ndarray:
    """Stable softmax over the last axis.

    Computed with max-subtraction so that accumulated log evidences of any
    magnitude normalize without overflow. Invariant to adding a constant to
    all logits.
    """
    x = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"softmax requires finite logits, got {x!r}")
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_stable(p) -> np.ndarray:
    """Elementwise log with the probability floor applied first."""
    return np.log(np.maximum(np.asarray(p, dtype=float), PROB_FLOOR))


@dataclass
class Precision:
    """Diagonal precision (inverse variance), scalar or per-component.

    ``values`` must broadcast against whatever error it weights.
    """

    values: np.ndarray | float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0):
            raise ValueError("precision entries must be >= 0")
        self.values = v if v.ndim else float(v)

    def __array__(self, dtype=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass
class GeneralizedBelief:
    """A continuous hidden-state estimate and its first-order motion.

    ``mu`` and ``mu_prime`` always share a shape; units depend on the frame
    the belief lives in (radians and normalized lengths for joint-space
    beliefs, normalized planar coordinates for pose beliefs).
    """

    mu: np.ndarray
    mu_prime: np.ndarray = None

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if self.mu_prime is None:
            self.mu_prime = np.zeros_like(self.mu)
        else:
            self.mu_prime = np.asarray(self.mu_prime, dtype=float)
        if self.mu.shape != self.mu_prime.shape:
            raise ValueError(
                f"mu shape {self.mu.shape} != mu_prime shape {self.mu_prime.shape}"
            )

    @property
    def dim(self) -> int:
        return self.mu.size

    def copy(self) -> "GeneralizedBelief":
        return GeneralizedBelief(self.mu.copy(), self.mu_prime.copy())


@dataclass
class PredictionError:
    """A raw prediction error together with the precision that weights it."""

    value: np.ndarray
    precision: Precision

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=float)
        if not isinstance(self.precision, Precision):
            self.precision = Precision(self.precision)
        # Broadcast compatibility check; raises on mismatch.
        np.broadcast_shapes(self.value.shape, np.shape(self.precision.values))

    @property
    def weighted(self) -> np.ndarray:
        """Precision-weighted error, the quantity every update force uses."""
        return np.asarray(self.precision) * self.value


def weighted_error(observed, predicted, precision) -> PredictionError:
    """Build a PredictionError value = observed - predicted."""
    o = np.asarray(observed, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if o.shape != p.shape:
        raise ValueError(f"shape mismatch: observed {o.shape}, predicted {p.shape}")
    return PredictionError(o - p, precision if isinstance(precision, Precision) else Precision(precision))


def integrate_belief(b: GeneralizedBelief, dmu, dmu_prime, dt: float,
                     unit: str = "belief") -> GeneralizedBelief:
    """One Euler step: mu += dt*dmu, mu_prime += dt*dmu_prime.

    Returns a new belief; raises NumericsError naming ``unit`` if the result
    is not finite, so callers can abort a trial with a usable diagnostic.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    mu = b.mu + dt * np.asarray(dmu, dtype=float)
    mu_prime = b.mu_prime + dt * np.asarray(dmu_prime, dtype=float)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(mu_prime))):
        raise NumericsError(unit, f"after dt={dt} step")
    return GeneralizedBelief(mu, mu_prime)
