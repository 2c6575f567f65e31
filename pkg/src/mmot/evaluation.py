"""Ground-truth voxelization, map comparison and hit-probability curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import prob_from_logodds
from .octree import Occupancy, OccupancyOctree, pack_keys, unpack_keys
from .scene import Primitive, Scene
from .sensors import SensorKind, default_models

REPORT_HEADER = "# mmot-report v1"
COUNT_FIELDS = ("occupied", "free", "missed", "missed_unknown", "missed_free", "incorrect")


class ComparisonError(ValueError):
    pass


def workspace_key_bounds(scene: Scene, resolution: float) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive voxel key range covering the workspace box."""
    lo = np.floor(np.array(scene.workspace_min) / resolution + 1e-9).astype(np.int64)
    hi = np.ceil(np.array(scene.workspace_max) / resolution - 1e-9).astype(np.int64) - 1
    return lo, hi


def _key_grid(lo, hi) -> np.ndarray:
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in g], axis=1)


@dataclass(eq=False)
class GroundTruthMap:
    """Reference labels; all arrays are sorted packed voxel codes.

    ``interior`` holds voxels buried inside solids; they are excluded from
    every comparison category.
    """

    occupied: np.ndarray
    free: np.ndarray
    resolution: float
    key_min: np.ndarray
    key_max: np.ndarray
    interior: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def in_workspace(self, codes) -> np.ndarray:
        k = unpack_keys(codes)
        return np.all((k >= self.key_min) & (k <= self.key_max), axis=-1)

    def to_octree(self, clamp_min=-2.0, clamp_max=3.5, occupancy_threshold=0.0) -> OccupancyOctree:
        """Encode as a map: occupied at clamp_max, free at clamp_min, interior at the threshold."""
        codes = np.concatenate([self.occupied, self.free, self.interior])
        vals = np.concatenate([
            np.full(self.occupied.size, clamp_max),
            np.full(self.free.size, clamp_min),
            np.full(self.interior.size, occupancy_threshold),
        ])
        return OccupancyOctree.from_nodes(
            codes, vals, resolution=self.resolution, clamp_min=clamp_min,
            clamp_max=clamp_max, occupancy_threshold=occupancy_threshold,
        )

    @classmethod
    def from_octree(cls, tree: OccupancyOctree) -> "GroundTruthMap":
        """Inverse of ``to_octree``; the workspace becomes the nodes' bounding box."""
        l, thr = tree.log_odds_array, tree.occupancy_threshold
        keys = tree.keys()
        if len(keys):
            kmin, kmax = keys.min(axis=0).astype(np.int64), keys.max(axis=0).astype(np.int64)
        else:
            kmin, kmax = np.zeros(3, np.int64), np.full(3, -1, np.int64)
        return cls(tree.codes[l > thr], tree.codes[l < thr], tree.resolution, kmin, kmax, tree.codes[l == thr])


def classify_workspace(scene: Scene, resolution: float):
    """Workspace voxel codes split into (shell, interior, outside)."""
    lo, hi = workspace_key_bounds(scene, resolution)
    keys = _key_grid(lo, hi)
    shell = np.zeros(len(keys), dtype=bool)
    inside = np.zeros(len(keys), dtype=bool)
    for prim in scene.primitives:
        touches, buried = prim.classify_voxels(keys.astype(np.float64), resolution)
        shell |= touches & ~buried
        inside |= buried
    codes = pack_keys(keys)
    interior = inside & ~shell
    return codes[shell], codes[interior], codes[~shell & ~interior], (lo, hi)


def build_ground_truth(scene: Scene, resolution: float, viewpoints=None) -> GroundTruthMap:
    """Voxelize ``scene``; free space is what some viewpoint sees unobstructed.

    Without viewpoints every non-solid workspace voxel counts as free.
    """
    occ, interior, rest, (lo, hi) = classify_workspace(scene, resolution)
    if viewpoints is None or len(viewpoints) == 0:
        free = rest
    else:
        centers = (unpack_keys(rest).astype(np.float64) + 0.5) * resolution
        seen = np.zeros(len(rest), dtype=bool)
        for vp in np.asarray(viewpoints, dtype=np.float64).reshape(-1, 3):
            todo = ~seen
            if not np.any(todo):
                break
            vec = centers[todo] - vp
            dist = np.linalg.norm(vec, axis=1)
            dirs = vec / dist[:, None]
            hit = scene.cast_rays(vp[None], dirs, np.inf)
            seen[np.flatnonzero(todo)[hit >= dist - 1e-9]] = True
        free = rest[seen]
    return GroundTruthMap(np.sort(occ), np.sort(free), resolution, lo, hi, np.sort(interior))


def region_codes(prim: Primitive, resolution: float) -> np.ndarray:
    """Voxels whose open cube meets the primitive's bounding box."""
    bl, bh = prim.bounds()
    lo = np.floor(bl / resolution + 1e-9).astype(np.int64)
    hi = np.ceil(bh / resolution - 1e-9).astype(np.int64) - 1
    return pack_keys(_key_grid(lo, hi))


def count_occupied(tree: OccupancyOctree, codes) -> int:
    return int(np.sum(tree.states(codes) == Occupancy.OCCUPIED))


@dataclass
class ComparisonReport:
    occupied: int
    free: int
    missed: int
    missed_unknown: int
    missed_free: int
    incorrect: int
    metadata: dict = field(default_factory=dict)

    def counts(self) -> dict:
        return {k: getattr(self, k) for k in COUNT_FIELDS}

    def to_text(self) -> str:
        lines = [REPORT_HEADER]
        lines += [f"{k} = {v}" for k, v in self.counts().items()]
        lines += [f"meta.{k} = {v}" for k, v in sorted(self.metadata.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ComparisonReport":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != REPORT_HEADER:
            raise ValueError("missing report header")
        counts, meta = {}, {}
        for ln in lines[1:]:
            key, _, value = ln.partition("=")
            key, value = key.strip(), value.strip()
            if key.startswith("meta."):
                meta[key[5:]] = value
            elif key in COUNT_FIELDS:
                counts[key] = int(value)
            else:
                raise ValueError(f"unknown report key {key!r}")
        return cls(**counts, metadata=meta)

    def to_csv(self) -> str:
        return "category,count\n" + "".join(f"{k},{v}\n" for k, v in self.counts().items())


def compare_maps(gt: GroundTruthMap, generated: OccupancyOctree, metadata=None) -> ComparisonReport:
    if not math.isclose(gt.resolution, generated.resolution, rel_tol=0, abs_tol=1e-12):
        raise ComparisonError(
            f"resolution mismatch: ground truth {gt.resolution} vs map {generated.resolution}"
        )
    st_occ = generated.states(gt.occupied)
    occupied = int(np.sum(st_occ == Occupancy.OCCUPIED))
    missed_unknown = int(np.sum(st_occ == Occupancy.UNKNOWN))
    missed_free = int(np.sum(st_occ == Occupancy.FREE))
    free = int(np.sum(generated.states(gt.free) == Occupancy.FREE))
    gen_occ = generated.occupied_codes()
    gen_occ = gen_occ[gt.in_workspace(gen_occ)] if gen_occ.size else gen_occ
    excluded = np.concatenate([gt.occupied, gt.interior])
    incorrect = int(np.sum(~np.isin(gen_occ, excluded)))
    return ComparisonReport(
        occupied, free, missed_unknown + missed_free, missed_unknown, missed_free, incorrect,
        dict(metadata or {}),
    )


def emit_update_curves(models=None, d_min: float = 0.0, d_max: float = 4.0, step: float = 0.01):
    """Rows of (distance, P_hit proximity, P_hit depth) on a regular grid.

    Each model's dead-zone edge is included as an exact row.
    """
    if not d_min < d_max:
        raise ValueError("d_min must be below d_max")
    if not step > 0:
        raise ValueError("step must be positive")
    models = default_models() if models is None else models
    prox, depth = models[SensorKind.PROXIMITY], models[SensorKind.DEPTH_CAMERA]
    n = int(math.floor((d_max - d_min) / step + 1e-9))
    grid = {round(d_min + i * step, 12) for i in range(n + 1)}
    grid.add(round(d_max, 12))
    for edge in (prox.min_range, depth.min_range):
        if d_min <= edge <= d_max:
            grid.add(round(edge, 12))
    d = np.array(sorted(grid))
    p_prox = prob_from_logodds(np.asarray(prox.hit_logodds(d)))
    p_depth = prob_from_logodds(np.asarray(depth.hit_logodds(d)))
    return [(float(a), float(b), float(c)) for a, b, c in zip(d, p_prox, p_depth)]


def curves_to_csv(rows) -> str:
    return "distance,p_proximity,p_depth\n" + "".join(f"{d!r},{p!r},{q!r}\n" for d, p, q in rows)
