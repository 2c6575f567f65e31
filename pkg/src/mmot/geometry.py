"""Frame geometry and log-odds/probability conversions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_ORTHO_TOL = 1e-9


class GeometryError(ValueError):
    """Raised for non-finite or otherwise invalid geometric input."""


def as_point(p, name: str = "point") -> np.ndarray:
    """Return ``p`` as a finite float64 array of shape (3,)."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (3,):
        raise GeometryError(f"{name} must have 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} has non-finite components: {arr.tolist()}")
    return arr


def as_rotation(r) -> np.ndarray:
    """Validate a 3x3 rotation matrix (orthonormal, det +1 within 1e-9)."""
    arr = np.asarray(r, dtype=np.float64)
    if arr.shape != (3, 3):
        raise GeometryError(f"rotation must be 3x3, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("rotation has non-finite entries")
    if np.max(np.abs(arr.T @ arr - np.eye(3))) > _ORTHO_TOL:
        raise GeometryError("rotation is not orthonormal")
    if abs(np.linalg.det(arr) - 1.0) > _ORTHO_TOL:
        raise GeometryError("rotation determinant is not +1")
    return arr


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Fixed-axis roll/pitch/yaw (radians), applied x then y then z."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def rotation_with_z_axis(z_axis, x_hint) -> np.ndarray:
    """Right-handed frame whose z column is ``z_axis``.

    The x column is ``x_hint`` with its z component removed; ``x_hint`` must
    not be parallel to ``z_axis``.
    """
    z = np.asarray(z_axis, dtype=np.float64)
    z = z / np.linalg.norm(z)
    x = np.asarray(x_hint, dtype=np.float64)
    x = x - np.dot(x, z) * z
    n = np.linalg.norm(x)
    if n < 1e-12:
        raise GeometryError("x_hint is parallel to z_axis")
    x = x / n
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def look_at(position, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera rotation with z forward toward ``target``, x right, y down."""
    fwd = np.asarray(target, dtype=np.float64) - np.asarray(position, dtype=np.float64)
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-12:
        raise GeometryError("camera forward direction is parallel to up")
    return rotation_with_z_axis(fwd, right)


def rotate(rotation, points) -> np.ndarray:
    """``rotation @ p`` for every row of ``points`` (..., 3).

    Spelled out elementwise so results do not depend on the BLAS build.
    """
    p = np.asarray(points, dtype=np.float64)
    r = np.asarray(rotation, dtype=np.float64)
    return p[..., 0:1] * r[:, 0] + p[..., 1:2] * r[:, 1] + p[..., 2:3] * r[:, 2]


def norms(points) -> np.ndarray:
    """Euclidean length of each row of ``points`` (..., 3), evaluated as sqrt(x*x + y*y + z*z)."""
    p = np.asarray(points, dtype=np.float64)
    return np.sqrt(p[..., 0] * p[..., 0] + p[..., 1] * p[..., 1] + p[..., 2] * p[..., 2])


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform from a local frame into the world frame."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        t = as_point(self.translation, "translation").copy()
        r = as_rotation(self.rotation).copy()
        t.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.translation, other.translation) and np.array_equal(
            self.rotation, other.rotation
        )

    def __hash__(self):
        return hash((self.translation.tobytes(), self.rotation.tobytes()))

    def __repr__(self):
        return f"Pose(translation={self.translation.tolist()}, rotation={self.rotation.tolist()})"

    def transform(self, points) -> np.ndarray:
        """Map local-frame points (..., 3) into the world frame."""
        return rotate(self.rotation, points) + self.translation

    def compose(self, local: "Pose") -> "Pose":
        """World pose of a frame given relative to this one."""
        return Pose(
            self.translation + rotate(self.rotation, local.translation),
            self.rotation @ local.rotation,
        )


def proximity_object_position(sensor_pose: Pose, distance: float) -> np.ndarray:
    """World position of an object seen at ``distance`` along the sensor z-axis."""
    d = float(distance)
    if not math.isfinite(d) or d < 0.0:
        raise GeometryError(f"distance must be finite and >= 0, got {distance!r}")
    return sensor_pose.translation + rotate(sensor_pose.rotation, (0.0, 0.0, d))


def depth_object_position(camera_pose: Pose, point_in_camera) -> np.ndarray:
    """World position of a camera-frame depth return."""
    p = as_point(point_in_camera, "point_in_camera")
    return camera_pose.translation + rotate(camera_pose.rotation, p)


def logodds_from_prob(p):
    """Natural-log odds of probability ``p`` (scalar or array) in (0, 1)."""
    arr = np.asarray(p, dtype=np.float64)
    if np.any(~(arr > 0.0) | ~(arr < 1.0)):
        raise GeometryError("probability must lie strictly between 0 and 1")
    out = np.log(arr / (1.0 - arr))
    return float(out) if out.ndim == 0 else out


def prob_from_logodds(l):
    """Occupancy probability ``1 - 1/(1 + exp(l))`` for scalar or array ``l``."""
    arr = np.asarray(l, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise GeometryError("log-odds must be finite")
    out = 1.0 - 1.0 / (1.0 + np.exp(arr))
    return float(out) if out.ndim == 0 else out
