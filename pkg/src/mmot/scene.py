"""Analytic scene, moving sensor rig and seeded measurement synthesis.

Primitives are axis-aligned: boxes are given by center and size, cylinders
and cones by base center with their axis along world +z (a cone's apex is
above its base), and a plane slab is a horizontal layer of infinite lateral
extent.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .fusion import ScanBatch
from .geometry import GeometryError, Pose, look_at, rotate, rotation_from_rpy, rotation_with_z_axis
from .sensors import DepthFrame, ProximityReading, SensorClass, SensorKind, default_models

_EPS_T = 1e-12
_SNAP = 1e-9


class Shape(str, enum.Enum):
    BOX = "box"
    CYLINDER = "cylinder"
    CONE = "cone"
    SLAB = "plane-slab"


_DIMS = {Shape.BOX: 3, Shape.CYLINDER: 2, Shape.CONE: 2, Shape.SLAB: 1}


def _snap(x: np.ndarray) -> np.ndarray:
    r = np.round(x)
    return np.where(np.abs(x - r) < _SNAP, r, x)


def _nearest(cands) -> np.ndarray:
    best = None
    for t, ok in cands:
        t = np.where(ok & (t > _EPS_T), t, np.inf)
        best = t if best is None else np.minimum(best, t)
    return best


def _quadratic_roots(a, b, c):
    """Real roots of a t^2 + b t + c, robust to a -> 0 (linear case)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - 4.0 * a * c
        real = disc >= 0.0
        sq = np.sqrt(np.where(real, disc, 0.0))
        q = -0.5 * (b + np.where(b >= 0.0, sq, -sq))
        quad = np.abs(a) > 1e-14
        r1 = np.where(quad, q / a, -c / b)
        r2 = np.where(quad, c / q, np.inf)
        ok1 = real & np.isfinite(r1)
        ok2 = real & quad & np.isfinite(r2)
    return (np.nan_to_num(r1, nan=np.inf), ok1), (np.nan_to_num(r2, nan=np.inf), ok2)


@dataclass(frozen=True)
class Primitive:
    """Solid scene object.

    ``position`` is the box center, the cylinder/cone base center, or any point
    on the slab's bottom plane. ``dimensions`` are (size_x, size_y, size_z) for
    a box, (radius, height) for a cylinder or cone, and (thickness,) for a slab.
    """

    shape: Shape
    position: tuple[float, float, float]
    dimensions: tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        pos = tuple(float(v) for v in self.position)
        dims = tuple(float(v) for v in self.dimensions)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise GeometryError(f"primitive {self.label!r}: position must be 3 finite values")
        if len(dims) != _DIMS[self.shape]:
            raise GeometryError(
                f"primitive {self.label!r}: {self.shape.value} takes {_DIMS[self.shape]} dimensions"
            )
        if not all(math.isfinite(v) and v > 0 for v in dims):
            raise GeometryError(f"primitive {self.label!r}: dimensions must be positive")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "dimensions", dims)

    @property
    def pose(self) -> Pose:
        return Pose(np.array(self.position), np.eye(3))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box; a slab is unbounded in x and y."""
        p = np.array(self.position)
        if self.shape is Shape.BOX:
            h = np.array(self.dimensions) / 2
            return p - h, p + h
        if self.shape is Shape.SLAB:
            return (np.array([-np.inf, -np.inf, p[2]]), np.array([np.inf, np.inf, p[2] + self.dimensions[0]]))
        r, h = self.dimensions
        return p - [r, r, 0.0], p + [r, r, h]

    def contains(self, points) -> np.ndarray:
        """Closed-solid membership of (N, 3) points."""
        q = np.asarray(points, dtype=np.float64) - self.position
        x, y, z = q[..., 0], q[..., 1], q[..., 2]
        if self.shape is Shape.BOX:
            h = np.array(self.dimensions) / 2
            return np.all(np.abs(q) <= h, axis=-1)
        if self.shape is Shape.SLAB:
            return (z >= 0.0) & (z <= self.dimensions[0])
        r, h = self.dimensions
        rho2 = x * x + y * y
        inz = (z >= 0.0) & (z <= h)
        if self.shape is Shape.CYLINDER:
            return inz & (rho2 <= r * r)
        rz = r * (1.0 - z / h)
        return inz & (rz >= 0.0) & (rho2 <= rz * rz)

    def intersect(self, origins, directions) -> np.ndarray:
        """Nearest positive surface distance per ray (inf when missed)."""
        o = np.asarray(origins, dtype=np.float64) - self.position
        d = np.asarray(directions, dtype=np.float64)
        ox, oy, oz = o[:, 0], o[:, 1], o[:, 2]
        dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.shape is Shape.BOX:
                h = np.array(self.dimensions) / 2
                t1 = (-h - o) / d
                t2 = (h - o) / d
                par = d == 0.0
                inside = np.abs(o) <= h
                tmin = np.where(par, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
                tmax = np.where(par, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
                t_in = tmin.max(axis=1)
                t_out = tmax.min(axis=1)
                ok = t_in <= t_out
                return _nearest([(t_in, ok), (t_out, ok)])
            if self.shape is Shape.SLAB:
                th = self.dimensions[0]
                return _nearest([(-oz / dz, dz != 0.0), ((th - oz) / dz, dz != 0.0)])
            r, h = self.dimensions
            cands = []
            tb = -oz / dz
            xb, yb = ox + dx * tb, oy + dy * tb
            cands.append((tb, (dz != 0.0) & (xb * xb + yb * yb <= r * r)))
            if self.shape is Shape.CYLINDER:
                tt = (h - oz) / dz
                xt, yt = ox + dx * tt, oy + dy * tt
                cands.append((tt, (dz != 0.0) & (xt * xt + yt * yt <= r * r)))
                a = dx * dx + dy * dy
                b = 2.0 * (ox * dx + oy * dy)
                c = ox * ox + oy * oy - r * r
            else:
                k2 = (r / h) ** 2
                w0 = h - oz
                a = dx * dx + dy * dy - k2 * dz * dz
                b = 2.0 * (ox * dx + oy * dy + k2 * w0 * dz)
                c = ox * ox + oy * oy - k2 * w0 * w0
            for t, ok in _quadratic_roots(a, b, c):
                zt = oz + dz * np.where(ok, t, 0.0)
                cands.append((t, ok & (zt >= 0.0) & (zt <= h)))
            return _nearest(cands)

    def classify_voxels(self, lo, resolution: float):
        """Voxel/solid relation for unit voxels whose min corners are ``lo`` (grid units).

        Returns ``(touches, inside)``: the open voxel meets the closed solid,
        and the closed voxel lies in the solid's open interior. The voxel holds
        part of the surface exactly when ``touches & ~inside``.
        """
        lo = np.asarray(lo, dtype=np.float64)
        hi = lo + 1.0
        p = _snap(np.array(self.position) / resolution)
        dims = _snap(np.array(self.dimensions) / resolution)
        if self.shape is Shape.BOX:
            bl, bh = _snap(p - dims / 2), _snap(p + dims / 2)
            touches = np.all((lo < bh) & (hi > bl), axis=1)
            inside = np.all((lo > bl) & (hi < bh), axis=1)
            return touches, inside
        z0 = p[2]
        if self.shape is Shape.SLAB:
            z1 = _snap(np.array(z0 + dims[0]))
            return (lo[:, 2] < z1) & (hi[:, 2] > z0), (lo[:, 2] > z0) & (hi[:, 2] < z1)
        r, h = dims
        z1 = _snap(np.array(z0 + h))
        cx, cy = p[0], p[1]
        # squared distance from the axis to the closest point of the xy rectangle
        ddx = np.maximum(np.maximum(lo[:, 0] - cx, cx - hi[:, 0]), 0.0)
        ddy = np.maximum(np.maximum(lo[:, 1] - cy, cy - hi[:, 1]), 0.0)
        near2 = ddx * ddx + ddy * ddy
        fx = np.maximum(np.abs(lo[:, 0] - cx), np.abs(hi[:, 0] - cx))
        fy = np.maximum(np.abs(lo[:, 1] - cy), np.abs(hi[:, 1] - cy))
        far2 = fx * fx + fy * fy
        zover = (lo[:, 2] < z1) & (hi[:, 2] > z0)
        zin = (lo[:, 2] > z0) & (hi[:, 2] < z1)
        if self.shape is Shape.CYLINDER:
            return zover & (near2 < r * r), zin & (far2 < r * r)
        # cone radius shrinks with height: widest admissible slice is the lowest one
        r_low = r * (1.0 - (np.maximum(lo[:, 2], z0) - z0) / h)
        r_high = r * (1.0 - (hi[:, 2] - z0) / h)
        touches = zover & (near2 < r_low * r_low)
        inside = zin & (r_high > 0.0) & (far2 < r_high * r_high)
        return touches, inside


@dataclass(frozen=True)
class Scene:
    primitives: tuple[Primitive, ...] = ()
    workspace_min: tuple[float, float, float] = (-0.6, -0.8, -0.04)
    workspace_max: tuple[float, float, float] = (1.2, 0.8, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        lo = np.array(self.workspace_min, dtype=np.float64)
        hi = np.array(self.workspace_max, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,) or not np.all(lo < hi):
            raise GeometryError("workspace bounds must satisfy min < max on every axis")
        for prim in self.primitives:
            bl, bh = prim.bounds()
            if prim.shape is Shape.SLAB:
                if bh[2] <= lo[2] or bl[2] >= hi[2]:
                    raise GeometryError(f"slab {prim.label!r} does not cross the workspace")
            elif np.any(bl < lo - 1e-12) or np.any(bh > hi + 1e-12):
                raise GeometryError(f"primitive {prim.label!r} extends outside the workspace")

    def primitive(self, label: str) -> Primitive:
        for p in self.primitives:
            if p.label == label:
                return p
        raise KeyError(label)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        out = np.zeros(len(pts), dtype=bool)
        for p in self.primitives:
            out |= p.contains(pts)
        return out

    def cast_rays(self, origins, directions, max_range: float) -> np.ndarray:
        """Vectorized nearest hit distance; inf where nothing lies within max_range."""
        o = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        d = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
        o = np.broadcast_to(o, d.shape) if len(o) == 1 else o
        best = np.full(len(d), np.inf)
        for p in self.primitives:
            best = np.minimum(best, p.intersect(o, d))
        best[best > max_range] = np.inf
        return best

    def cast_ray(self, origin, direction, max_range: float) -> float | None:
        d = np.asarray(direction, dtype=np.float64)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise GeometryError("ray direction must be a unit vector")
        t = float(self.cast_rays(np.asarray(origin, dtype=np.float64)[None], d[None], max_range)[0])
        return None if math.isinf(t) else t


@dataclass(frozen=True)
class Trajectory:
    """Circular end-effector path traversed at constant speed."""

    center: tuple[float, float, float] = (0.25, 0.0, 0.34)
    radius: float = 0.3
    speed: float = 0.188
    plane_rpy_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)
    duration: float = float("inf")

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("trajectory radius must be positive")
        if not self.speed > 0:
            raise GeometryError("trajectory speed must be positive")

    @property
    def angular_rate(self) -> float:
        return self.speed / self.radius

    @property
    def period(self) -> float:
        return 2.0 * math.pi * self.radius / self.speed

    @property
    def plane_rotation(self) -> np.ndarray:
        return rotation_from_rpy(*np.radians(self.plane_rpy_deg))

    def pose(self, t: float) -> Pose:
        return end_effector_pose(self, t)


def end_effector_pose(traj: Trajectory, t: float) -> Pose:
    """Pose on the circle at time ``t``.

    The frame's x-axis follows the direction of travel, z points against the
    plane normal (tool pointing down for a horizontal circle) and y points
    radially outward.
    """
    if not 0.0 <= t <= traj.duration:
        raise GeometryError(f"time {t} outside trajectory duration [0, {traj.duration}]")
    theta = traj.angular_rate * t
    c, s = math.cos(theta), math.sin(theta)
    plane = traj.plane_rotation
    pos = np.array(traj.center) + traj.radius * (plane @ np.array([c, s, 0.0]))
    tangent = plane @ np.array([-s, c, 0.0])
    down = -plane[:, 2]
    return Pose(pos, rotation_with_z_axis(down, tangent))


@dataclass(frozen=True)
class Mount:
    """Proximity sensor fixed to the end-effector; beams leave along ``direction``."""

    sensor_id: int
    position: tuple[float, float, float]
    direction: tuple[float, float, float]

    def __post_init__(self):
        d = np.array(self.direction, dtype=np.float64)
        n = np.linalg.norm(d)
        if not n > 0:
            raise GeometryError(f"mount {self.sensor_id}: zero beam direction")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if abs(n - 1.0) > 1e-12:
            d = d / n
        object.__setattr__(self, "direction", tuple(float(v) for v in d))

    @property
    def pose(self) -> Pose:
        d = np.array(self.direction)
        hint = np.cross([0.0, 0.0, 1.0], d)
        if np.linalg.norm(hint) < 1e-9:
            hint = np.array([1.0, 0.0, 0.0])
        return Pose(np.array(self.position), rotation_with_z_axis(d, hint))


def ring_mounts(count: int, radius: float, z_offset: float, tilt_deg: float,
                phase_deg: float = 0.0, first_id: int = 1) -> list[Mount]:
    """``count`` radially outward sensors around the end-effector z-axis.

    Beams are tilted by ``tilt_deg`` from the radial direction toward +z of
    the end-effector frame (downward for the default tool orientation).
    """
    mounts = []
    tilt = math.radians(tilt_deg)
    for m in range(count):
        phi = 2.0 * math.pi * m / count + math.radians(phase_deg)
        radial = np.array([math.cos(phi), math.sin(phi), 0.0])
        direction = math.cos(tilt) * radial + math.sin(tilt) * np.array([0.0, 0.0, 1.0])
        pos = radius * radial + np.array([0.0, 0.0, z_offset])
        mounts.append(Mount(first_id + m, tuple(pos), tuple(direction)))
    return mounts


@dataclass(frozen=True)
class Camera:
    """Fixed pinhole depth camera looking from ``position`` toward ``look_at``."""

    position: tuple[float, float, float] = (2.0, 0.0, 1.0)
    look_at: tuple[float, float, float] = (0.4, 0.0, 0.0)
    hfov_deg: float = 70.6
    vfov_deg: float = 60.0
    width: int = 80
    height: int = 60

    @property
    def pose(self) -> Pose:
        return Pose(np.array(self.position), look_at(self.position, self.look_at))

    def ray_directions(self) -> np.ndarray:
        """Unit camera-frame directions (z forward, x right, y down), row-major pixels."""
        tx = math.tan(math.radians(self.hfov_deg) / 2)
        ty = math.tan(math.radians(self.vfov_deg) / 2)
        u = (2.0 * (np.arange(self.width) + 0.5) / self.width - 1.0) * tx
        v = (2.0 * (np.arange(self.height) + 0.5) / self.height - 1.0) * ty
        uu, vv = np.meshgrid(u, v)
        d = np.stack([uu.ravel(), vv.ravel(), np.ones(uu.size)], axis=1)
        return d / np.linalg.norm(d, axis=1, keepdims=True)


@dataclass(frozen=True)
class SensorRig:
    mounts: tuple[Mount, ...] = field(
        default_factory=lambda: tuple(ring_mounts(17, 0.05, 0.0, 10.0) + ring_mounts(17, 0.05, 0.03, 35.0, 180.0 / 17, 18))
    )
    camera: Camera = field(default_factory=Camera)
    sigma_proximity: float = 0.02
    sigma_depth: float = 0.03
    proximity_hz: float = 30.0
    depth_hz: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "mounts", tuple(self.mounts))
        ids = [m.sensor_id for m in self.mounts]
        if len(set(ids)) != len(ids):
            raise GeometryError("proximity sensor ids must be unique")
        if self.sigma_proximity < 0 or self.sigma_depth < 0:
            raise GeometryError("noise sigmas must be non-negative")
        if not (self.proximity_hz > 0 and self.depth_hz > 0):
            raise GeometryError("sensor rates must be positive")
        if abs(self.depth_every - self.proximity_hz / self.depth_hz) > 1e-9:
            raise GeometryError("proximity_hz must be an integer multiple of depth_hz")

    @property
    def depth_every(self) -> int:
        return max(1, round(self.proximity_hz / self.depth_hz))


def tick_rng(seed: int, tick: int, stream: int) -> np.random.Generator:
    """Independent generator per (seed, tick, stream): 0 proximity, 1 depth."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tick), int(stream)]))


def simulate_proximity(scene: Scene, rig: SensorRig, ee_pose: Pose, seed: int, tick: int,
                       model: SensorClass) -> tuple[ProximityReading, ...]:
    poses = [ee_pose.compose(m.pose) for m in rig.mounts]
    if not poses:
        return ()
    origins = np.array([p.translation for p in poses])
    dirs = np.array([p.rotation[:, 2] for p in poses])
    true = scene.cast_rays(origins, dirs, model.max_range)
    noise = tick_rng(seed, tick, 0).standard_normal(len(poses)) * rig.sigma_proximity
    readings = []
    for m, pose, d, n in zip(rig.mounts, poses, true, noise):
        if math.isinf(d):
            readings.append(ProximityReading(m.sensor_id, pose, None))
            continue
        noisy = min(max(d + n, 0.0), model.max_range)
        if noisy < model.min_range:
            continue
        readings.append(ProximityReading(m.sensor_id, pose, float(noisy)))
    return tuple(readings)


def simulate_depth(scene: Scene, rig: SensorRig, seed: int, tick: int, model: SensorClass,
                   dirs_cam: np.ndarray | None = None) -> DepthFrame:
    pose = rig.camera.pose
    if dirs_cam is None:
        dirs_cam = rig.camera.ray_directions()
    dirs_world = rotate(pose.rotation, dirs_cam)
    true = scene.cast_rays(pose.translation[None], dirs_world, model.max_range)
    hit = np.isfinite(true)
    noise = tick_rng(seed, tick, 1).standard_normal(len(dirs_cam)) * rig.sigma_depth
    ranges = np.clip(np.where(hit, true, 1.0) + noise, 1e-6, model.max_range)
    points = np.where(hit[:, None], dirs_cam * ranges[:, None], dirs_cam)
    return DepthFrame(pose, points, hit)


def simulate_tick(scene: Scene, rig: SensorRig, traj: Trajectory, tick: int, seed: int,
                  models=None, proximity: bool = True, depth: bool = True,
                  _dirs_cam: np.ndarray | None = None) -> ScanBatch:
    """Synthesize the measurements of step ``tick`` (time tick / proximity_hz)."""
    models = default_models() if models is None else models
    t = tick / rig.proximity_hz
    readings = ()
    if proximity:
        readings = simulate_proximity(scene, rig, end_effector_pose(traj, t), seed, tick,
                                      models[SensorKind.PROXIMITY])
    frame = None
    if depth and tick % rig.depth_every == 0:
        frame = simulate_depth(scene, rig, seed, tick, models[SensorKind.DEPTH_CAMERA], _dirs_cam)
    return ScanBatch(tick, frame, readings)
