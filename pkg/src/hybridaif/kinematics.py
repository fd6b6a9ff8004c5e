"""Planar chain geometry: roto-translation and its Jacobians.

A kinematic level is described intrinsically by a joint angle and a segment
length, x_i = [theta, l], and extrinsically by the segment endpoint's pose,
x_e = [p_x, p_y, phi] with phi the absolute orientation. Chaining levels is
a single roto-translation

    T(x_i, x_e_parent) = [ p_x + l cos(theta + phi),
                           p_y + l sin(theta + phi),
                           phi + theta ]

applied independently per entity. Everything here is unit-agnostic pure
geometry, vectorized over arbitrary leading axes (the last axis holds
[theta, l] or [p_x, p_y, phi]), and the Jacobians are hand-derived
trigonometric forms used directly by the belief-update forces.
"""

from __future__ import annotations

import numpy as np


def wrap_angle(theta):
    """Map angles to the principal branch [-pi, pi)."""
    return (np.asarray(theta, dtype=float) + np.pi) % (2.0 * np.pi) - np.pi


def roto_translate(x_i, x_e_parent) -> np.ndarray:
    """Endpoint pose of a segment attached to a parent pose.

    x_i: (..., 2) [theta, length]; x_e_parent: (..., 3) [p_x, p_y, phi].
    Returns (..., 3).
    """
    x_i = np.asarray(x_i, dtype=float)
    x_e = np.asarray(x_e_parent, dtype=float)
    theta, length = x_i[..., 0], x_i[..., 1]
    ang = theta + x_e[..., 2]
    out = np.empty(np.broadcast_shapes(x_i.shape[:-1], x_e.shape[:-1]) + (3,))
    out[..., 0] = x_e[..., 0] + length * np.cos(ang)
    out[..., 1] = x_e[..., 1] + length * np.sin(ang)
    out[..., 2] = ang
    return out


def jac_intrinsic(x_i, x_e_parent) -> np.ndarray:
    """d roto_translate / d [theta, l], shape (..., 3, 2)."""
    x_i = np.asarray(x_i, dtype=float)
    x_e = np.asarray(x_e_parent, dtype=float)
    theta, length = x_i[..., 0], x_i[..., 1]
    ang = theta + x_e[..., 2]
    c, s = np.cos(ang), np.sin(ang)
    J = np.zeros(np.broadcast_shapes(x_i.shape[:-1], x_e.shape[:-1]) + (3, 2))
    J[..., 0, 0] = -length * s
    J[..., 0, 1] = c
    J[..., 1, 0] = length * c
    J[..., 1, 1] = s
    J[..., 2, 0] = 1.0
    return J


def jac_parent(x_i, x_e_parent) -> np.ndarray:
    """d roto_translate / d [p_x, p_y, phi], shape (..., 3, 3)."""
    x_i = np.asarray(x_i, dtype=float)
    x_e = np.asarray(x_e_parent, dtype=float)
    theta, length = x_i[..., 0], x_i[..., 1]
    ang = theta + x_e[..., 2]
    shape = np.broadcast_shapes(x_i.shape[:-1], x_e.shape[:-1])
    J = np.zeros(shape + (3, 3))
    J[..., 0, 0] = 1.0
    J[..., 1, 1] = 1.0
    J[..., 2, 2] = 1.0
    J[..., 0, 2] = -length * np.sin(ang)
    J[..., 1, 2] = length * np.cos(ang)
    return J


def forward_chain(thetas, lengths, base_pose) -> np.ndarray:
    """Compose roto-translations down a chain.

    thetas, lengths: (..., N); base_pose: (..., 3).
    Returns (..., N, 3): the pose after each segment.
    """
    thetas = np.asarray(thetas, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    pose = np.asarray(base_pose, dtype=float)
    n = thetas.shape[-1]
    out = np.empty(thetas.shape[:-1] + (n, 3))
    for k in range(n):
        pose = roto_translate(
            np.stack([thetas[..., k], lengths[..., k]], axis=-1), pose)
        out[..., k, :] = pose
    return out
