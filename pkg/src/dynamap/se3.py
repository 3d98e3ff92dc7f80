"""SO(3)/SE(3) primitives on plain numpy arrays.

Twist ordering is (rho, phi): translation components first, rotation last.
Rotations are 3x3 orthonormal matrices, angles in radians. Closed forms
switch to Taylor expansions below ``SMALL_ANGLE`` and the rotation log
refuses angles within ``PI_MARGIN`` of pi, where the axis is ambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AngleSingularityError

SMALL_ANGLE = 1e-8
PI_MARGIN = 1e-6


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix such that hat(a) @ b == cross(a, b)."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat` for a skew-symmetric matrix."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def so3_exp(phi: np.ndarray) -> np.ndarray:
    """Rodrigues formula."""
    angle = float(np.linalg.norm(phi))
    s = hat(phi)
    if angle < SMALL_ANGLE:
        return np.eye(3) + s + 0.5 * (s @ s)
    a = np.sin(angle) / angle
    b = (1.0 - np.cos(angle)) / (angle * angle)
    return np.eye(3) + a * s + b * (s @ s)


def so3_log(rot: np.ndarray) -> np.ndarray:
    """Rotation vector of ``rot``; rejects angles within PI_MARGIN of pi."""
    cos_angle = np.clip((np.trace(rot) - 1.0) * 0.5, -1.0, 1.0)
    w = vee(rot - rot.T) * 0.5
    sin_angle = float(np.linalg.norm(w))
    # atan2 form stays well-conditioned right up to the rejection margin
    angle = float(np.arctan2(sin_angle, cos_angle))
    if angle >= np.pi - PI_MARGIN:
        raise AngleSingularityError(f"rotation angle {angle:.9f} too close to pi")
    if sin_angle < SMALL_ANGLE:
        # w = sin(angle) * axis; first order is exact to O(angle^3)
        return w
    return w * (angle / sin_angle)


def so3_left_jacobian(phi: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(phi))
    s = hat(phi)
    if angle < SMALL_ANGLE:
        return np.eye(3) + 0.5 * s + (s @ s) / 6.0
    a2 = angle * angle
    b = (1.0 - np.cos(angle)) / a2
    c = (angle - np.sin(angle)) / (a2 * angle)
    return np.eye(3) + b * s + c * (s @ s)


def so3_left_jacobian_inv(phi: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(phi))
    s = hat(phi)
    if angle < SMALL_ANGLE:
        return np.eye(3) - 0.5 * s + (s @ s) / 12.0
    half = 0.5 * angle
    cot = half / np.tan(half)
    coeff = (1.0 - cot) / (angle * angle)
    return np.eye(3) - 0.5 * s + coeff * (s @ s)


@dataclass
class Pose:
    """Rigid transform: ``apply(p) = rotation @ p + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def compose(self, other: "Pose") -> "Pose":
        """Matrix product self * other: ``other`` acts first on points."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (N, 3) array of points."""
        pts = np.asarray(points)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        return Pose(np.array(m[:3, :3]), np.array(m[:3, 3]))

    def copy(self) -> "Pose":
        return Pose(self.rotation.copy(), self.translation.copy())


@dataclass
class Twist:
    """Body twist, split into translational ``rho`` and rotational ``phi``."""

    rho: np.ndarray
    phi: np.ndarray

    @staticmethod
    def zero() -> "Twist":
        return Twist(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_vector(xi: np.ndarray) -> "Twist":
        xi = np.asarray(xi, dtype=float)
        return Twist(xi[:3].copy(), xi[3:].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.rho, self.phi])

    def scaled(self, factor: float) -> "Twist":
        return Twist(self.rho * factor, self.phi * factor)


def se3_exp(xi: np.ndarray) -> Pose:
    """Exponential map of a (rho, phi) twist vector."""
    xi = np.asarray(xi, dtype=float)
    rho, phi = xi[:3], xi[3:]
    rot = so3_exp(phi)
    return Pose(rot, so3_left_jacobian(phi) @ rho)


def se3_log(pose: Pose) -> np.ndarray:
    """Inverse of :func:`se3_exp`; raises near the pi rotation singularity."""
    phi = so3_log(pose.rotation)
    rho = so3_left_jacobian_inv(phi) @ pose.translation
    return np.concatenate([rho, phi])


def se3_adjoint(pose: Pose) -> np.ndarray:
    """6x6 adjoint in (rho, phi) ordering: Ad(T) xi = (R rho + t x R phi, R phi)."""
    ad = np.zeros((6, 6))
    ad[:3, :3] = pose.rotation
    ad[3:, 3:] = pose.rotation
    ad[:3, 3:] = hat(pose.translation) @ pose.rotation
    return ad


def se3_ad_small(xi: np.ndarray) -> np.ndarray:
    """Algebra adjoint ad(xi) with ad(xi) eta = [xi, eta]."""
    rho, phi = xi[:3], xi[3:]
    ad = np.zeros((6, 6))
    ad[:3, :3] = hat(phi)
    ad[:3, 3:] = hat(rho)
    ad[3:, 3:] = hat(phi)
    return ad


def se3_left_jacobian(xi: np.ndarray) -> np.ndarray:
    """Left Jacobian via the convergent series sum ad^n / (n+1)!.

    Series form avoids a separate closed-form coupling block; for the
    twist magnitudes seen here (< pi + a few meters) it reaches machine
    precision within a few dozen terms.
    """
    ad = se3_ad_small(np.asarray(xi, dtype=float))
    acc = np.eye(6)
    term = np.eye(6)
    for n in range(1, 40):
        term = term @ ad / (n + 1.0)
        acc += term
        if np.max(np.abs(term)) < 1e-18:
            break
    return acc


def se3_right_jacobian(xi: np.ndarray) -> np.ndarray:
    return se3_left_jacobian(-np.asarray(xi, dtype=float))


def rotation_angle(rot: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, in radians."""
    return float(np.arccos(np.clip((np.trace(rot) - 1.0) * 0.5, -1.0, 1.0)))


def yaw_rotation(yaw: float) -> np.ndarray:
    """Rotation about +z by ``yaw`` radians."""
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
