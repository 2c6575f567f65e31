"""Per-tick fusion of one depth frame and many proximity readings.

Each source sensor first reduces its own beams to at most one contribution
per voxel (a hit beats a miss, the strongest hit wins among several hits).
Contributions of different sensors on the same voxel are then summed, depth
camera first and proximity sensors by ascending id, and every touched voxel
receives a single clamped update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import prob_from_logodds
from .octree import OccupancyOctree, traverse_beams, unpack_keys
from .sensors import (
    BeamBatch,
    DepthFrame,
    ProximityReading,
    SensorClass,
    SensorKind,
    depth_beam_batch,
    proximity_beam_batch,
)

DEPTH_SOURCE = 0
_SOURCE_SHIFT = 48
_CODE_MASK = (1 << _SOURCE_SHIFT) - 1
_MAX_SENSOR_ID = (1 << 14) - 1


class FusionError(ValueError):
    """Sequencing or configuration problem during integration."""


@dataclass(frozen=True, eq=False)
class ScanBatch:
    tick: int
    depth_frame: DepthFrame | None = None
    proximity_readings: tuple[ProximityReading, ...] = ()

    def __post_init__(self):
        readings = tuple(self.proximity_readings)
        object.__setattr__(self, "proximity_readings", readings)
        ids = [r.sensor_id for r in readings]
        if len(set(ids)) != len(ids):
            raise FusionError(f"tick {self.tick}: duplicate proximity sensor ids")
        if any(not 1 <= i <= _MAX_SENSOR_ID for i in ids):
            raise FusionError(f"tick {self.tick}: proximity sensor ids must lie in [1, {_MAX_SENSOR_ID}]")

    def __eq__(self, other):
        if not isinstance(other, ScanBatch):
            return NotImplemented
        return (
            self.tick == other.tick
            and self.depth_frame == other.depth_frame
            and self.proximity_readings == other.proximity_readings
        )

    def to_bytes(self) -> bytes:
        """Canonical byte encoding, used for reproducibility checks."""
        parts = [np.int64(self.tick).tobytes()]
        if self.depth_frame is not None:
            f = self.depth_frame
            parts += [b"D", f.camera_pose.translation.tobytes(), f.camera_pose.rotation.tobytes(),
                      f.points.tobytes(), f.hit.tobytes()]
        for r in self.proximity_readings:
            d = np.float64(np.nan if r.distance is None else r.distance)
            parts += [b"P", np.int64(r.sensor_id).tobytes(), r.sensor_pose.translation.tobytes(),
                      r.sensor_pose.rotation.tobytes(), d.tobytes()]
        return b"".join(parts)


@dataclass(frozen=True)
class NodeDelta:
    key: tuple[int, int, int]
    delta: float
    breakdown: dict[str, float]


@dataclass
class IntegrationStats:
    tick: int
    beams: int = 0
    hit_beams: int = 0
    nodes_touched: int = 0
    hits: int = 0
    misses: int = 0
    deltas: list[NodeDelta] | None = field(default=None, repr=False)

    def to_record(self) -> dict:
        rec = {
            "tick": self.tick, "beams": self.beams, "hit_beams": self.hit_beams,
            "nodes_touched": self.nodes_touched, "hits": self.hits, "misses": self.misses,
        }
        if self.deltas is not None:
            rec["deltas"] = [
                {"key": list(d.key), "delta": d.delta, "breakdown": d.breakdown} for d in self.deltas
            ]
        return rec


def source_label(source: int) -> str:
    return "depth_camera" if source == DEPTH_SOURCE else f"proximity:{source}"


def _model(models, kind: SensorKind) -> SensorClass:
    try:
        return models[kind]
    except KeyError:
        raise FusionError(f"no sensor model configured for {kind.value}") from None


def batch_beams(batch: ScanBatch, models) -> list[BeamBatch]:
    out = []
    if batch.depth_frame is not None:
        out.append(depth_beam_batch(batch.depth_frame, _model(models, SensorKind.DEPTH_CAMERA), DEPTH_SOURCE))
    if batch.proximity_readings:
        out.append(proximity_beam_batch(batch.proximity_readings, _model(models, SensorKind.PROXIMITY)))
    return out


def _only_hits(b: BeamBatch) -> BeamBatch:
    m = b.hit
    return BeamBatch(b.kind, b.sensor_ids[m], b.origins[m], b.endpoints[m], b.ranges[m], b.hit[m])


def compute_contributions(beam_sets: list[BeamBatch], models, resolution: float):
    """Deduplicated per-(sensor, voxel) contributions.

    Returns ``(sources, codes, values, is_hit)`` sorted by voxel code, then
    source. Dead-zone hits are kept (value 0) so they still shadow misses.
    """
    if not beam_sets:
        e = np.empty(0, dtype=np.int64)
        return e, e, np.empty(0), np.empty(0, dtype=bool)
    origins = np.concatenate([b.origins for b in beam_sets])
    endpoints = np.concatenate([b.endpoints for b in beam_sets])
    sources = np.concatenate([b.sensor_ids for b in beam_sets]).astype(np.int64)
    miss_val = np.concatenate([np.full(len(b), _model(models, b.kind).miss_logodds) for b in beam_sets])
    hit = np.concatenate([b.hit for b in beam_sets])
    hit_val = np.zeros(len(hit))
    start = 0
    for b in beam_sets:
        sl = slice(start, start + len(b))
        if np.any(b.hit):
            vals = np.zeros(len(b))
            vals[b.hit] = _model(models, b.kind).hit_logodds(b.ranges[b.hit])
            hit_val[sl] = vals
        start += len(b)

    codes, beam_index, end_codes = traverse_beams(origins, endpoints, resolution)

    hc = (sources[hit] << _SOURCE_SHIFT) | end_codes[hit]
    hv = hit_val[hit]
    order = np.lexsort((hv, hc))
    hc, hv = hc[order], hv[order]
    last = np.ones(hc.size, dtype=bool)
    last[:-1] = hc[1:] != hc[:-1]
    hc, hv = hc[last], hv[last]

    mc = (sources[beam_index] << _SOURCE_SHIFT) | codes
    mc, first = np.unique(mc, return_index=True)
    mv = miss_val[beam_index[first]]
    keep = ~np.isin(mc, hc, assume_unique=True)
    mc, mv = mc[keep], mv[keep]

    comb = np.concatenate([hc, mc])
    vals = np.concatenate([hv, mv])
    is_hit = np.concatenate([np.ones(hc.size, bool), np.zeros(mc.size, bool)])
    src = comb >> _SOURCE_SHIFT
    vox = comb & _CODE_MASK
    order = np.lexsort((src, vox))
    return src[order], vox[order], vals[order], is_hit[order]


def _cross_sensor_dedup(src, vox, vals, is_hit):
    """One contribution per voxel regardless of source: strongest hit, else first miss."""
    rank = np.where(is_hit, vals, -np.inf)
    order = np.lexsort((src, -rank, vox))
    src, vox, vals, is_hit = src[order], vox[order], vals[order], is_hit[order]
    first = np.ones(vox.size, dtype=bool)
    first[1:] = vox[1:] != vox[:-1]
    return src[first], vox[first], vals[first], is_hit[first]


def integrate_scan(
    tree: OccupancyOctree,
    batch: ScanBatch,
    models,
    cross_sensor_dedup: bool = False,
    carve_misses: bool = True,
    audit: bool = False,
) -> IntegrationStats:
    """Fuse one time step of measurements into ``tree``.

    With ``carve_misses=False`` beams that sensed nothing are discarded
    instead of clearing free space up to max range.
    """
    if batch.tick <= tree.last_tick:
        raise FusionError(f"tick {batch.tick} is not after last integrated tick {tree.last_tick}")
    beam_sets = batch_beams(batch, models)
    if not carve_misses:
        beam_sets = [_only_hits(b) for b in beam_sets]
    stats = IntegrationStats(tick=batch.tick)
    stats.beams = sum(len(b) for b in beam_sets)
    stats.hit_beams = int(sum(int(b.hit.sum()) for b in beam_sets))

    src, vox, vals, is_hit = compute_contributions(beam_sets, models, tree.resolution)
    if cross_sensor_dedup:
        src, vox, vals, is_hit = _cross_sensor_dedup(src, vox, vals, is_hit)
    stats.hits = int(is_hit.sum())
    stats.misses = int((~is_hit).sum())

    # dead-zone hits are an additive identity and must not create nodes
    live = vals != 0.0
    src, vox, vals = src[live], vox[live], vals[live]
    nodes, inverse = np.unique(vox, return_inverse=True)
    # bincount accumulates in array order, i.e. ascending source per node
    sums = np.bincount(inverse, weights=vals, minlength=nodes.size)
    tree.apply_updates(nodes, sums, batch.tick)
    tree.last_tick = batch.tick
    stats.nodes_touched = int(nodes.size)

    if audit:
        keys = unpack_keys(nodes).tolist()
        bounds = np.concatenate(([0], np.cumsum(np.bincount(inverse, minlength=nodes.size))))
        stats.deltas = [
            NodeDelta(
                tuple(keys[n]),
                float(sums[n]),
                {source_label(int(s)): float(v) for s, v in zip(src[bounds[n]:bounds[n + 1]], vals[bounds[n]:bounds[n + 1]])},
            )
            for n in range(nodes.size)
        ]
    return stats


def node_probability(tree: OccupancyOctree, key) -> float:
    """P(occupied) of a node; 0.5 for nodes never observed."""
    l = tree.log_odds(key)
    return 0.5 if l is None else prob_from_logodds(l)
