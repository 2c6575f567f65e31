"""Range-dependent hit/miss log-odds models and reading-to-beam conversion."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryError, Pose, norms, proximity_object_position, rotate


class SensorKind(str, enum.Enum):
    PROXIMITY = "proximity"
    DEPTH_CAMERA = "depth_camera"


class RangeError(ValueError):
    """Distance outside a sensor's valid domain."""


@dataclass(frozen=True)
class SensorClass:
    """Per-class hit/miss model.

    Hits at ``d < min_range`` contribute 0 (dead zone); from ``min_range`` up to
    ``max_range`` the hit update is ``hit_slope * d + hit_intercept``.
    """

    kind: SensorKind
    min_range: float
    max_range: float
    hit_slope: float
    hit_intercept: float
    miss_logodds: float = -0.4

    def __post_init__(self):
        object.__setattr__(self, "kind", SensorKind(self.kind))
        if not 0.0 <= self.min_range < self.max_range:
            raise ValueError(f"{self.kind.value}: need 0 <= min_range < max_range")
        if not self.miss_logodds < 0.0:
            raise ValueError(f"{self.kind.value}: miss log-odds must be negative")
        if not self.hit_slope * self.max_range + self.hit_intercept > 0.0:
            raise ValueError(f"{self.kind.value}: hit log-odds must stay positive up to max_range")
        if self.hit_slope * self.min_range + self.hit_intercept <= 0.0:
            raise ValueError(f"{self.kind.value}: hit log-odds must be positive at min_range")

    def hit_logodds(self, d):
        """Hit update for range ``d`` (scalar or array, meters)."""
        arr = np.asarray(d, dtype=np.float64)
        if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
            raise RangeError(f"{self.kind.value}: range must be finite and >= 0")
        if np.any(arr > self.max_range):
            raise RangeError(
                f"{self.kind.value}: range exceeds max_range {self.max_range}; convert to MISS first"
            )
        out = np.where(arr < self.min_range, 0.0, self.hit_slope * arr + self.hit_intercept)
        return float(out) if out.ndim == 0 else out


def default_proximity() -> SensorClass:
    return SensorClass(SensorKind.PROXIMITY, 0.04, 4.0, -0.07, 1.0, -0.4)


def default_depth_camera() -> SensorClass:
    return SensorClass(SensorKind.DEPTH_CAMERA, 0.5, 4.0, -0.1, 1.0, -0.4)


def default_models() -> dict[SensorKind, SensorClass]:
    return {SensorKind.PROXIMITY: default_proximity(), SensorKind.DEPTH_CAMERA: default_depth_camera()}


_PROX = default_proximity()
_DEPTH = default_depth_camera()


def proximity_hit_logodds(d: float, model: SensorClass = _PROX) -> float:
    return model.hit_logodds(d)


def depth_hit_logodds(d: float, model: SensorClass = _DEPTH) -> float:
    return model.hit_logodds(d)


def miss_logodds(model: SensorClass) -> float:
    return model.miss_logodds


@dataclass(frozen=True)
class ProximityReading:
    """One proximity sample; ``distance is None`` marks a MISS."""

    sensor_id: int
    sensor_pose: Pose
    distance: float | None

    def __post_init__(self):
        if self.distance is not None:
            d = float(self.distance)
            if not math.isfinite(d) or d < 0.0:
                raise GeometryError(f"sensor {self.sensor_id}: invalid distance {self.distance!r}")


@dataclass(frozen=True, eq=False)
class DepthFrame:
    """Camera-frame returns.

    ``points`` is (N, 3). Rows where ``hit`` is False are MISS rays and hold
    the unit ray direction instead of a return.
    """

    camera_pose: Pose
    points: np.ndarray
    hit: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        hit = np.ones(len(pts), dtype=bool) if self.hit is None else np.asarray(self.hit, dtype=bool)
        if hit.shape != (len(pts),):
            raise GeometryError("hit mask length must match the number of rays")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("depth returns must be finite")
        if np.any(pts[hit, 2] <= 0.0):
            raise GeometryError("depth returns must lie in front of the camera (p_z > 0)")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "hit", hit)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, DepthFrame):
            return NotImplemented
        return (
            self.camera_pose == other.camera_pose
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.hit, other.hit)
        )


@dataclass(frozen=True, eq=False)
class BeamMeasurement:
    """A single ray; ``hit`` is False for a max-range MISS beam."""

    origin: np.ndarray
    endpoint: np.ndarray
    range: float
    kind: SensorKind
    sensor_id: int
    hit: bool = True

    def __eq__(self, other):
        if not isinstance(other, BeamMeasurement):
            return NotImplemented
        return (
            np.array_equal(self.origin, other.origin)
            and np.array_equal(self.endpoint, other.endpoint)
            and self.range == other.range
            and self.kind == other.kind
            and self.sensor_id == other.sensor_id
            and self.hit == other.hit
        )

    def __repr__(self):
        tag = "hit" if self.hit else "MISS"
        return (
            f"BeamMeasurement({self.kind.value}#{self.sensor_id} {tag} "
            f"{self.origin.tolist()} -> {self.endpoint.tolist()}, range={self.range})"
        )


@dataclass(frozen=True, eq=False)
class BeamBatch:
    """Array form of many beams from one source sensor."""

    kind: SensorKind
    sensor_ids: np.ndarray
    origins: np.ndarray
    endpoints: np.ndarray
    ranges: np.ndarray
    hit: np.ndarray

    def __len__(self):
        return len(self.ranges)

    def beams(self) -> list[BeamMeasurement]:
        return [
            BeamMeasurement(
                self.origins[n], self.endpoints[n], float(self.ranges[n]),
                self.kind, int(self.sensor_ids[n]), bool(self.hit[n]),
            )
            for n in range(len(self))
        ]


def beams_from_proximity(reading: ProximityReading, model: SensorClass = _PROX) -> BeamMeasurement:
    origin = reading.sensor_pose.translation.copy()
    if reading.distance is None:
        end = proximity_object_position(reading.sensor_pose, model.max_range)
        return BeamMeasurement(origin, end, model.max_range, SensorKind.PROXIMITY, reading.sensor_id, False)
    end = proximity_object_position(reading.sensor_pose, reading.distance)
    return BeamMeasurement(
        origin, end, float(reading.distance), SensorKind.PROXIMITY, reading.sensor_id, True
    )


def proximity_beam_batch(readings, model: SensorClass = _PROX) -> BeamBatch:
    beams = [beams_from_proximity(r, model) for r in readings]
    return BeamBatch(
        SensorKind.PROXIMITY,
        np.array([b.sensor_id for b in beams], dtype=np.int64),
        np.array([b.origin for b in beams], dtype=np.float64).reshape(-1, 3),
        np.array([b.endpoint for b in beams], dtype=np.float64).reshape(-1, 3),
        np.array([b.range for b in beams], dtype=np.float64),
        np.array([b.hit for b in beams], dtype=bool),
    )


def depth_beam_batch(frame: DepthFrame, model: SensorClass = _DEPTH, sensor_id: int = 0) -> BeamBatch:
    pts = frame.points
    ranges = norms(pts)
    local = pts.copy()
    miss = ~frame.hit
    if np.any(miss):
        local[miss] = pts[miss] / ranges[miss, None] * model.max_range
        ranges = np.where(miss, model.max_range, ranges)
    pose = frame.camera_pose
    endpoints = rotate(pose.rotation, local) + pose.translation
    origins = np.broadcast_to(pose.translation, endpoints.shape).copy()
    return BeamBatch(
        SensorKind.DEPTH_CAMERA,
        np.full(len(pts), sensor_id, dtype=np.int64),
        origins, endpoints, ranges, frame.hit.copy(),
    )


def beams_from_depth(frame: DepthFrame, model: SensorClass = _DEPTH) -> list[BeamMeasurement]:
    return depth_beam_batch(frame, model).beams()


__all__ = [
    "BeamBatch", "BeamMeasurement", "DepthFrame", "ProximityReading", "RangeError",
    "SensorClass", "SensorKind", "beams_from_depth", "beams_from_proximity",
    "default_depth_camera", "default_models", "default_proximity", "depth_beam_batch",
    "depth_hit_logodds", "miss_logodds", "proximity_beam_batch",
    "proximity_hit_logodds",
]
