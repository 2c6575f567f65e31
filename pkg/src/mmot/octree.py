"""Sparse leaf-level occupancy map keyed by integer voxel coordinates.

Nodes live in three parallel arrays sorted by packed key, which keeps bulk
per-scan updates vectorized and makes serialization order canonical.
"""

from __future__ import annotations

import enum
import math
import struct

import numpy as np

from . import kernels
from .geometry import GeometryError, prob_from_logodds

KEY_LIMIT = 1 << 15
_OFF = 1 << 15
_MASK = 0xFFFF

DEFAULT_RESOLUTION = 0.04
DEFAULT_CLAMP_MIN = -2.0
DEFAULT_CLAMP_MAX = 3.5
DEFAULT_OCCUPANCY_THRESHOLD = 0.0

MAGIC = b"MMOT"
VERSION = 1
_HEADER = struct.Struct("<4sHddddQ")
_RECORD = np.dtype([("i", "<i4"), ("j", "<i4"), ("k", "<i4"), ("log_odds", "<f8")])


class AddressingError(ValueError):
    """Point or key outside the addressable extent of the map."""


class MapFormatError(ValueError):
    """Malformed MMOT byte stream."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class Occupancy(enum.IntEnum):
    UNKNOWN = -1
    FREE = 0
    OCCUPIED = 1


def pack_keys(keys) -> np.ndarray:
    """Pack (..., 3) integer keys into sortable int64 codes."""
    k = np.asarray(keys, dtype=np.int64)
    if k.size and np.any(np.abs(k) >= KEY_LIMIT):
        raise AddressingError("voxel key outside the 16-level addressing bound")
    return ((k[..., 0] + _OFF) << 32) | ((k[..., 1] + _OFF) << 16) | (k[..., 2] + _OFF)


def unpack_keys(codes) -> np.ndarray:
    c = np.asarray(codes, dtype=np.int64)
    out = np.empty(c.shape + (3,), dtype=np.int32)
    out[..., 0] = (c >> 32) - _OFF
    out[..., 1] = ((c >> 16) & _MASK) - _OFF
    out[..., 2] = (c & _MASK) - _OFF
    return out


def key_of(point, resolution: float) -> tuple[int, int, int]:
    """Voxel containing ``point``: component-wise floor(x / resolution)."""
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (3,) or not np.all(np.isfinite(p)):
        raise GeometryError(f"invalid point {point!r}")
    key = tuple(int(math.floor(c / resolution)) for c in p)
    if any(abs(c) >= KEY_LIMIT for c in key):
        raise AddressingError(f"point {p.tolist()} outside addressable extent")
    return key


def traverse_beams(origins, endpoints, resolution: float):
    """Batch traversal of many segments.

    Returns ``(codes, beam_index, end_codes)``: packed keys of every voxel
    crossed before each beam's endpoint voxel, the beam each key belongs to
    (keys of one beam are contiguous and ordered from the origin), and the
    packed endpoint voxel of each beam.
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    endpoints = np.ascontiguousarray(endpoints, dtype=np.float64).reshape(-1, 3)
    if not (np.all(np.isfinite(origins)) and np.all(np.isfinite(endpoints))):
        raise GeometryError("beam endpoints must be finite")
    for pts in (origins, endpoints):
        if pts.size and np.any(np.abs(np.floor(pts / resolution)) >= KEY_LIMIT):
            raise AddressingError("beam leaves the addressable extent")
    keys, beam_index, end_keys = kernels.traverse_rays(origins, endpoints, resolution)
    return pack_keys(keys), beam_index, pack_keys(end_keys)


def traverse_ray(origin, endpoint, resolution: float) -> list[tuple[int, int, int]]:
    """Voxels crossed by the segment [origin, endpoint), endpoint voxel excluded."""
    o = np.asarray(origin, dtype=np.float64)
    e = np.asarray(endpoint, dtype=np.float64)
    if o.shape != (3,) or e.shape != (3,):
        raise GeometryError("origin and endpoint must be 3-vectors")
    if np.array_equal(o, e):
        raise GeometryError("zero-length ray")
    codes, _, _ = traverse_beams(o[None], e[None], resolution)
    return [tuple(int(c) for c in k) for k in unpack_keys(codes)]


class OccupancyOctree:
    """Leaf-resolution occupancy map with clamped log-odds per node.

    Keys absent from the store are unknown space.
    """

    def __init__(
        self,
        resolution: float = DEFAULT_RESOLUTION,
        clamp_min: float = DEFAULT_CLAMP_MIN,
        clamp_max: float = DEFAULT_CLAMP_MAX,
        occupancy_threshold: float = DEFAULT_OCCUPANCY_THRESHOLD,
    ):
        if not (resolution > 0 and math.isfinite(resolution)):
            raise ValueError(f"resolution must be positive, got {resolution}")
        if not clamp_min < 0.0 < clamp_max:
            raise ValueError("clamp bounds must satisfy clamp_min < 0 < clamp_max")
        if not clamp_min <= occupancy_threshold <= clamp_max:
            raise ValueError("occupancy threshold must lie within the clamp bounds")
        self.resolution = float(resolution)
        self.clamp_min = float(clamp_min)
        self.clamp_max = float(clamp_max)
        self.occupancy_threshold = float(occupancy_threshold)
        self._codes = np.empty(0, dtype=np.int64)
        self._log_odds = np.empty(0, dtype=np.float64)
        self._ticks = np.empty(0, dtype=np.int64)
        self.last_tick = -1

    def __len__(self):
        return self._codes.size

    def __contains__(self, key):
        return self._find(pack_keys(key)) >= 0

    def __repr__(self):
        return (
            f"OccupancyOctree(resolution={self.resolution}, nodes={len(self)}, "
            f"clamp=[{self.clamp_min}, {self.clamp_max}])"
        )

    def key_of(self, point) -> tuple[int, int, int]:
        return key_of(point, self.resolution)

    def _find(self, code) -> int:
        idx = int(np.searchsorted(self._codes, code))
        if idx < self._codes.size and self._codes[idx] == code:
            return idx
        return -1

    @property
    def codes(self) -> np.ndarray:
        return self._codes

    @property
    def log_odds_array(self) -> np.ndarray:
        return self._log_odds

    @property
    def ticks(self) -> np.ndarray:
        return self._ticks

    def keys(self) -> np.ndarray:
        return unpack_keys(self._codes)

    def log_odds(self, key) -> float | None:
        idx = self._find(pack_keys(key))
        return None if idx < 0 else float(self._log_odds[idx])

    def last_update_tick(self, key) -> int | None:
        idx = self._find(pack_keys(key))
        return None if idx < 0 else int(self._ticks[idx])

    def probability(self, key) -> float:
        """Occupancy probability of a node; 0.5 for unknown space."""
        l = self.log_odds(key)
        return 0.5 if l is None else prob_from_logodds(l)

    def occupancy_state(self, key) -> Occupancy:
        l = self.log_odds(key)
        if l is None:
            return Occupancy.UNKNOWN
        return Occupancy.OCCUPIED if l > self.occupancy_threshold else Occupancy.FREE

    def states(self, codes) -> np.ndarray:
        """Vectorized tri-state lookup for packed keys (int8 Occupancy values)."""
        codes = np.asarray(codes, dtype=np.int64)
        out = np.full(codes.shape, Occupancy.UNKNOWN, dtype=np.int8)
        if self._codes.size == 0 or codes.size == 0:
            return out
        idx = np.searchsorted(self._codes, codes)
        idx_c = np.minimum(idx, self._codes.size - 1)
        present = self._codes[idx_c] == codes
        occ = self._log_odds[idx_c] > self.occupancy_threshold
        out[present & occ] = Occupancy.OCCUPIED
        out[present & ~occ] = Occupancy.FREE
        return out

    def occupied_codes(self) -> np.ndarray:
        return self._codes[self._log_odds > self.occupancy_threshold]

    def free_codes(self) -> np.ndarray:
        return self._codes[self._log_odds <= self.occupancy_threshold]

    def apply_update(self, key, delta: float, tick: int = 0) -> float:
        """Add ``delta`` to one node (created at prior 0 if absent) and clamp."""
        if not math.isfinite(delta):
            raise ValueError("log-odds delta must be finite")
        self.apply_updates(np.atleast_1d(pack_keys(key)), np.array([float(delta)]), tick)
        return self.log_odds(key)

    def apply_updates(self, codes, deltas, tick: int = 0) -> None:
        """Clamped additive update of many nodes; ``codes`` must be unique."""
        codes = np.asarray(codes, dtype=np.int64)
        deltas = np.asarray(deltas, dtype=np.float64)
        if codes.size == 0:
            return
        if not np.all(np.isfinite(deltas)):
            raise ValueError("log-odds deltas must be finite")
        order = np.argsort(codes, kind="stable")
        codes, deltas = codes[order], deltas[order]
        if np.any(codes[1:] == codes[:-1]):
            raise ValueError("duplicate keys in one bulk update")
        idx = np.searchsorted(self._codes, codes)
        if self._codes.size:
            present = self._codes[np.minimum(idx, self._codes.size - 1)] == codes
        else:
            present = np.zeros(codes.size, dtype=bool)
        hit = idx[present]
        self._log_odds[hit] = np.clip(self._log_odds[hit] + deltas[present], self.clamp_min, self.clamp_max)
        self._ticks[hit] = tick
        new = ~present
        if np.any(new):
            at = idx[new]
            self._codes = np.insert(self._codes, at, codes[new])
            self._log_odds = np.insert(
                self._log_odds, at, np.clip(0.0 + deltas[new], self.clamp_min, self.clamp_max)
            )
            self._ticks = np.insert(self._ticks, at, tick)

    def same_nodes(self, other: "OccupancyOctree") -> bool:
        """Node-for-node equality of keys, log-odds and map parameters."""
        return (
            self.resolution == other.resolution
            and self.clamp_min == other.clamp_min
            and self.clamp_max == other.clamp_max
            and self.occupancy_threshold == other.occupancy_threshold
            and np.array_equal(self._codes, other._codes)
            and np.array_equal(self._log_odds, other._log_odds)
        )

    @classmethod
    def from_nodes(cls, codes, log_odds, **params) -> "OccupancyOctree":
        tree = cls(**params)
        codes = np.asarray(codes, dtype=np.int64)
        log_odds = np.asarray(log_odds, dtype=np.float64)
        order = np.argsort(codes, kind="stable")
        tree._codes = codes[order].copy()
        tree._log_odds = log_odds[order].copy()
        tree._ticks = np.full(codes.size, -1, dtype=np.int64)
        return tree

    # -- serialization -------------------------------------------------------

    def serialize(self) -> bytes:
        header = _HEADER.pack(
            MAGIC, VERSION, self.resolution, self.clamp_min, self.clamp_max,
            self.occupancy_threshold, self._codes.size,
        )
        records = np.empty(self._codes.size, dtype=_RECORD)
        keys = unpack_keys(self._codes)
        records["i"], records["j"], records["k"] = keys[:, 0], keys[:, 1], keys[:, 2]
        records["log_odds"] = self._log_odds
        return header + records.tobytes()

    @classmethod
    def deserialize(cls, data: bytes) -> "OccupancyOctree":
        data = bytes(data)
        if len(data) < 4:
            raise MapFormatError("truncated magic", len(data))
        if data[:4] != MAGIC:
            raise MapFormatError(f"bad magic {data[:4]!r}", 0)
        if len(data) < 6:
            raise MapFormatError("truncated header", len(data))
        (version,) = struct.unpack_from("<H", data, 4)
        if version != VERSION:
            raise MapFormatError(f"unsupported version {version}", 4)
        if len(data) < _HEADER.size:
            raise MapFormatError("truncated header", len(data))
        _, _, res, lmin, lmax, locc, count = _HEADER.unpack_from(data, 0)
        need = _HEADER.size + count * _RECORD.itemsize
        if len(data) < need:
            intact = (len(data) - _HEADER.size) // _RECORD.itemsize
            raise MapFormatError(
                f"truncated node records: expected {count}, found {intact} complete",
                _HEADER.size + intact * _RECORD.itemsize,
            )
        if len(data) > need:
            raise MapFormatError("trailing bytes after node records", need)
        try:
            tree = cls(res, lmin, lmax, locc)
        except ValueError as exc:
            raise MapFormatError(f"invalid header values: {exc}", 6) from None
        records = np.frombuffer(data, dtype=_RECORD, count=count, offset=_HEADER.size)
        keys = np.stack([records["i"], records["j"], records["k"]], axis=-1)
        try:
            codes = pack_keys(keys)
        except AddressingError as exc:
            raise MapFormatError(str(exc), _HEADER.size) from None
        if codes.size and np.any(np.diff(codes) <= 0):
            bad = int(np.flatnonzero(np.diff(codes) <= 0)[0]) + 1
            raise MapFormatError("node records not strictly ordered", _HEADER.size + bad * _RECORD.itemsize)
        tree._codes = codes
        tree._log_odds = records["log_odds"].astype(np.float64)
        tree._ticks = np.full(count, -1, dtype=np.int64)
        return tree

    def save(self, path) -> None:
        from .io import atomic_write_bytes

        atomic_write_bytes(path, self.serialize())

    @classmethod
    def load(cls, path) -> "OccupancyOctree":
        with open(path, "rb") as fh:
            return cls.deserialize(fh.read())

    def to_text(self) -> str:
        """Diff-friendly export: one ``i j k log_odds`` line per node."""
        lines = [
            "# mmot text export v1",
            f"# resolution {self.resolution!r}",
            f"# clamp_min {self.clamp_min!r}",
            f"# clamp_max {self.clamp_max!r}",
            f"# occupancy_threshold {self.occupancy_threshold!r}",
            f"# nodes {len(self)}",
        ]
        for (i, j, k), l in zip(self.keys().tolist(), self._log_odds.tolist()):
            lines.append(f"{i} {j} {k} {l!r}")
        return "\n".join(lines) + "\n"
