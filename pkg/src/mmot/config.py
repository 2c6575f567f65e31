"""Scenario files: a line-oriented, sectioned ``key = value`` format.

::

    # comment
    [trajectory]
    radius = 0.3
    center = 0.2 0.0 0.32

    [primitive cone]
    shape = cone
    position = 0.35 0.15 0.02
    dimensions = 0.08 0.2

Outside a ``[primitive ...]`` section a key may be written fully qualified as
``section.key = value``. Repeatable keys (``rig.ring``, ``rig.mount``,
``workspace.viewpoint``) may appear on several lines. Omitted values take
their defaults; an omitted duration is three trajectory periods.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .octree import DEFAULT_CLAMP_MAX, DEFAULT_CLAMP_MIN, DEFAULT_OCCUPANCY_THRESHOLD, DEFAULT_RESOLUTION
from .scene import Camera, Mount, Primitive, Scene, SensorRig, Shape, Trajectory, ring_mounts
from .sensors import SensorClass, SensorKind, default_depth_camera, default_proximity

SENSOR_MODES = ("depth", "proximity", "fused")
_MODE_ALIASES = {"depth_only": "depth", "proximity_only": "proximity"}
DEFAULT_SEED = 20211001


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


# -- value converters (raise ValueError with a human-readable message) --------

def _float(v: str) -> float:
    x = float(v)
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {v!r}")
    return x


def _pos(v: str) -> float:
    x = _float(v)
    if not x > 0:
        raise ValueError(f"must be positive, got {x}")
    return x


def _nonneg(v: str) -> float:
    x = _float(v)
    if x < 0:
        raise ValueError(f"must be non-negative, got {x}")
    return x


def _posint(v: str) -> int:
    x = int(v)
    if x <= 0:
        raise ValueError(f"must be a positive integer, got {x}")
    return x


def _u64(v: str) -> int:
    x = int(v)
    if not 0 <= x < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {x}")
    return x


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {v!r}")


def _mode(v: str) -> str:
    m = _MODE_ALIASES.get(v, v)
    if m not in SENSOR_MODES:
        raise ValueError(f"sensors must be one of depth, proximity, fused, got {v!r}")
    return m


def _vec(n: int):
    def conv(v: str) -> tuple[float, ...]:
        parts = v.split()
        if len(parts) != n:
            raise ValueError(f"expected {n} numbers, got {len(parts)}")
        return tuple(_float(p) for p in parts)
    return conv


def _floats(v: str) -> tuple[float, ...]:
    return tuple(_float(p) for p in v.split())


def _text(v: str) -> str:
    if not v:
        raise ValueError("must not be empty")
    return v


def _ring(v: str):
    parts = v.split()
    if len(parts) not in (4, 5):
        raise ValueError("ring takes: count radius z_offset tilt_deg [phase_deg]")
    return (_posint(parts[0]),) + tuple(_float(p) for p in parts[1:])


def _mount(v: str):
    parts = v.split()
    if len(parts) != 7:
        raise ValueError("mount takes: id x y z dx dy dz")
    return (_posint(parts[0]),) + tuple(_float(p) for p in parts[1:])


FIELDS = {
    "scenario": {"name": _text, "duration": _pos, "seed": _u64, "sensors": _mode,
                 "cross_sensor_dedup": _bool, "carve_misses": _bool},
    "octree": {"resolution": _pos, "clamp_min": _float, "clamp_max": _float,
               "occupancy_threshold": _float},
    "proximity_model": {"min_range": _nonneg, "max_range": _pos, "hit_slope": _float,
                        "hit_intercept": _float, "miss_logodds": _float},
    "depth_model": {"min_range": _nonneg, "max_range": _pos, "hit_slope": _float,
                    "hit_intercept": _float, "miss_logodds": _float},
    "rig": {"sigma_proximity": _nonneg, "sigma_depth": _nonneg, "proximity_hz": _pos,
            "depth_hz": _pos, "ring": _ring, "mount": _mount},
    "camera": {"position": _vec(3), "look_at": _vec(3), "hfov_deg": _pos, "vfov_deg": _pos,
               "width": _posint, "height": _posint},
    "trajectory": {"center": _vec(3), "radius": _pos, "speed": _pos, "plane_rpy_deg": _vec(3)},
    "workspace": {"min": _vec(3), "max": _vec(3), "viewpoint": _vec(3), "probe": _text},
    "primitive": {"shape": lambda v: Shape(v), "position": _vec(3), "dimensions": _floats},
}
REPEATABLE = {("rig", "ring"), ("rig", "mount"), ("workspace", "viewpoint")}


@dataclass(frozen=True)
class OctreeParams:
    resolution: float = DEFAULT_RESOLUTION
    clamp_min: float = DEFAULT_CLAMP_MIN
    clamp_max: float = DEFAULT_CLAMP_MAX
    occupancy_threshold: float = DEFAULT_OCCUPANCY_THRESHOLD


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "default"
    duration: float = 3 * Trajectory().period
    seed: int = DEFAULT_SEED
    sensors: str = "fused"
    cross_sensor_dedup: bool = False
    carve_misses: bool = True
    octree: OctreeParams = field(default_factory=OctreeParams)
    proximity_model: SensorClass = field(default_factory=default_proximity)
    depth_model: SensorClass = field(default_factory=default_depth_camera)
    rig: SensorRig = field(default_factory=SensorRig)
    trajectory: Trajectory = field(default_factory=lambda: replace(Trajectory(), duration=3 * Trajectory().period))
    scene: Scene = field(default_factory=Scene)
    viewpoints: tuple[tuple[float, float, float], ...] = ()
    probe: str | None = None

    @property
    def models(self) -> dict[SensorKind, SensorClass]:
        return {SensorKind.PROXIMITY: self.proximity_model, SensorKind.DEPTH_CAMERA: self.depth_model}

    @property
    def ticks(self) -> int:
        return int(math.floor(self.duration * self.rig.proximity_hz + 1e-9))

    def with_overrides(self, sensors=None, duration=None, seed=None) -> "ScenarioConfig":
        cfg = self
        if sensors is not None:
            cfg = replace(cfg, sensors=_mode(sensors))
        if seed is not None:
            cfg = replace(cfg, seed=_u64(str(seed)))
        if duration is not None:
            if not duration > 0:
                raise ScenarioError("duration must be positive")
            cfg = replace(cfg, duration=float(duration), trajectory=replace(cfg.trajectory, duration=float(duration)))
        return cfg


_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+)(?:\s+([^\]]+?))?\s*\]$")


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate scenario text; errors carry the offending line number."""
    values: dict[str, dict[str, tuple]] = {s: {} for s in FIELDS if s != "primitive"}
    prims: list[dict] = []
    section, prim = None, None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            name, arg = m.group(1), m.group(2)
            if name == "primitive":
                if not arg:
                    raise ScenarioError("primitive section needs a label: [primitive <label>]", lineno)
                if any(p["label"][0] == arg.strip() for p in prims):
                    raise ScenarioError(f"duplicate primitive label {arg.strip()!r}", lineno)
                prim = {"label": (arg.strip(), lineno)}
                prims.append(prim)
            elif name in values and not arg:
                prim = None
            else:
                raise ScenarioError(f"unknown section [{line[1:-1]}]", lineno)
            section = name
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ScenarioError(f"expected 'key = value', got {line!r}", lineno)
        key, value = key.strip(), value.strip()
        sec = section
        if "." in key:
            sec, key = key.split(".", 1)
            if sec not in values:
                raise ScenarioError(f"unknown section {sec!r} in key", lineno)
            target = values[sec]
        elif sec is None:
            raise ScenarioError(f"key {key!r} outside any section", lineno)
        else:
            target = prim if sec == "primitive" else values[sec]
        conv = FIELDS[sec].get(key)
        if conv is None:
            raise ScenarioError(f"unknown key {sec}.{key}", lineno)
        try:
            parsed = conv(value)
        except ValueError as exc:
            raise ScenarioError(f"{sec}.{key}: {exc}", lineno) from None
        if (sec, key) in REPEATABLE:
            target.setdefault(key, []).append((parsed, lineno))
        elif key in target:
            raise ScenarioError(f"duplicate key {sec}.{key}", lineno)
        else:
            target[key] = (parsed, lineno)
    return _build(values, prims)


def _first_line(entries: dict) -> int | None:
    lines = [v[1] if isinstance(v, tuple) else v[0][1] for v in entries.values()]
    return min(lines) if lines else None


def _construct(factory, entries: dict, **kw):
    try:
        return factory(**kw)
    except ValueError as exc:
        raise ScenarioError(str(exc), _first_line(entries)) from None


def _build(values, prims) -> ScenarioConfig:
    def get(sec):
        return {k: v[0] for k, v in values[sec].items() if (sec, k) not in REPEATABLE}

    sc = get("scenario")
    octree = _construct(OctreeParams, values["octree"], **get("octree"))
    try:
        from .octree import OccupancyOctree

        OccupancyOctree(**vars(octree))
    except ValueError as exc:
        raise ScenarioError(f"octree: {exc}", _first_line(values["octree"])) from None

    def model(sec, base: SensorClass):
        return _construct(SensorClass, values[sec], **{**vars(base), **get(sec)})

    prox = model("proximity_model", default_proximity())
    depth = model("depth_model", default_depth_camera())
    camera = _construct(Camera, values["camera"], **get("camera"))

    rig_vals = values["rig"]
    mounts: list[Mount] = []
    next_id = 1
    for (count, radius, z_off, tilt, *phase), _ in rig_vals.get("ring", []):
        mounts += ring_mounts(count, radius, z_off, tilt, phase[0] if phase else 0.0, next_id)
        next_id += count
    for (sid, *rest), lineno in rig_vals.get("mount", []):
        if any(m.sensor_id == sid for m in mounts):
            raise ScenarioError(f"rig.mount: sensor id {sid} already in use", lineno)
        try:
            mounts.append(Mount(sid, tuple(rest[:3]), tuple(rest[3:])))
        except ValueError as exc:
            raise ScenarioError(f"rig.mount: {exc}", lineno) from None
        next_id = max(next_id, sid + 1)
    rig_kw = get("rig")
    if mounts:
        rig_kw["mounts"] = tuple(mounts)
    rig = _construct(SensorRig, rig_vals, camera=camera, **rig_kw)

    traj = _construct(Trajectory, values["trajectory"], **get("trajectory"))
    duration = sc.pop("duration", 3 * traj.period)
    traj = replace(traj, duration=duration)

    primitives = []
    for p in prims:
        label, lineno = p["label"]
        missing = [k for k in ("shape", "position", "dimensions") if k not in p]
        if missing:
            raise ScenarioError(f"primitive {label!r} missing {', '.join(missing)}", lineno)
        try:
            primitives.append(Primitive(p["shape"][0], p["position"][0], p["dimensions"][0], label))
        except ValueError as exc:
            raise ScenarioError(str(exc), p["dimensions"][1]) from None
    ws = get("workspace")
    probe = ws.pop("probe", None)
    scene_kw = {}
    if "min" in ws:
        scene_kw["workspace_min"] = ws["min"]
    if "max" in ws:
        scene_kw["workspace_max"] = ws["max"]
    where = values["workspace"] or {p["label"][0]: p["label"] for p in prims}
    scene = _construct(Scene, where, primitives=tuple(primitives), **scene_kw)
    if probe is not None and probe not in [p.label for p in primitives]:
        raise ScenarioError(f"workspace.probe names unknown primitive {probe!r}", values["workspace"]["probe"][1])
    viewpoints = tuple(v for v, _ in values["workspace"].get("viewpoint", []))
    return ScenarioConfig(
        duration=duration, octree=octree, proximity_model=prox, depth_model=depth, rig=rig,
        trajectory=traj, scene=scene, viewpoints=viewpoints, probe=probe, **sc,
    )


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def serialize_scenario(cfg: ScenarioConfig) -> str:
    """Canonical text form; ``parse_scenario`` of it reproduces ``cfg``."""
    out = ["# mmot scenario v1", "[scenario]"]
    for k in ("name", "duration", "seed", "sensors", "cross_sensor_dedup", "carve_misses"):
        out.append(f"{k} = {_fmt(getattr(cfg, k))}")
    out.append("\n[octree]")
    out += [f"{k} = {_fmt(v)}" for k, v in vars(cfg.octree).items()]
    for sec, m in (("proximity_model", cfg.proximity_model), ("depth_model", cfg.depth_model)):
        out.append(f"\n[{sec}]")
        out += [f"{k} = {_fmt(getattr(m, k))}" for k in FIELDS[sec]]
    out.append("\n[rig]")
    for k in ("sigma_proximity", "sigma_depth", "proximity_hz", "depth_hz"):
        out.append(f"{k} = {_fmt(float(getattr(cfg.rig, k)))}")
    for m in cfg.rig.mounts:
        out.append(f"mount = {m.sensor_id} {_fmt(m.position)} {_fmt(m.direction)}")
    out.append("\n[camera]")
    out += [f"{k} = {_fmt(getattr(cfg.rig.camera, k))}" for k in FIELDS["camera"]]
    out.append("\n[trajectory]")
    out += [f"{k} = {_fmt(getattr(cfg.trajectory, k))}" for k in FIELDS["trajectory"]]
    out.append("\n[workspace]")
    out.append(f"min = {_fmt(cfg.scene.workspace_min)}")
    out.append(f"max = {_fmt(cfg.scene.workspace_max)}")
    out += [f"viewpoint = {_fmt(v)}" for v in cfg.viewpoints]
    if cfg.probe is not None:
        out.append(f"probe = {cfg.probe}")
    for p in cfg.scene.primitives:
        out.append(f"\n[primitive {p.label}]")
        out.append(f"shape = {p.shape.value}")
        out.append(f"position = {_fmt(p.position)}")
        out.append(f"dimensions = {_fmt(p.dimensions)}")
    return "\n".join(out) + "\n"


def bundled_scenarios() -> list[str]:
    root = resources.files("mmot") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_scenario(name_or_path) -> ScenarioConfig:
    """Parse a scenario file, or a bundled scenario by name (e.g. ``occluded-shelf``)."""
    path = Path(name_or_path)
    if path.is_file():
        return parse_scenario(path.read_text(encoding="utf-8"))
    bundled = resources.files("mmot") / "scenarios" / f"{name_or_path}.cfg"
    if bundled.is_file():
        return parse_scenario(bundled.read_text(encoding="utf-8"))
    raise FileNotFoundError(f"no scenario file or bundled scenario named {name_or_path!r}")
