import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmot import kernels
from mmot.geometry import GeometryError, prob_from_logodds
from mmot.octree import (
    AddressingError,
    MapFormatError,
    Occupancy,
    OccupancyOctree,
    key_of,
    pack_keys,
    traverse_beams,
    traverse_ray,
    unpack_keys,
)

R = 0.04


# -- oracles -----------------------------------------------------------------

def dense_sample_keys(o, e, r, step_frac=100):
    """Keys hit by points sampled every r/step_frac along [o, e], endpoint voxel dropped."""
    L = np.linalg.norm(e - o)
    n = int(math.ceil(L / (r / step_frac)))
    s = np.linspace(0.0, 1.0, n + 1)
    pts = o + s[:, None] * (e - o)
    keys = {tuple(k) for k in np.floor(pts / r).astype(int).tolist()}
    keys.discard(tuple(np.floor(e / r).astype(int).tolist()))
    return keys


def voxel_chords(o, e, r):
    """Exact segment/voxel overlap lengths by slab clipping, for every voxel in the bounding box."""
    lo = np.floor(np.minimum(o, e) / r).astype(int)
    hi = np.floor(np.maximum(o, e) / r).astype(int)
    d = e - o
    L = np.linalg.norm(d)
    out = {}
    for i in range(lo[0], hi[0] + 1):
        for j in range(lo[1], hi[1] + 1):
            for k in range(lo[2], hi[2] + 1):
                t0, t1 = 0.0, 1.0
                for a, c in enumerate((i, j, k)):
                    b0, b1 = c * r, (c + 1) * r
                    if d[a] == 0.0:
                        if not b0 <= o[a] < b1:
                            t0, t1 = 1.0, 0.0
                        continue
                    u0, u1 = (b0 - o[a]) / d[a], (b1 - o[a]) / d[a]
                    t0, t1 = max(t0, min(u0, u1)), min(t1, max(u0, u1))
                if t1 > t0:
                    out[(i, j, k)] = (t1 - t0) * L
    return out


def random_ray(rng, r, margin):
    while True:
        o = rng.uniform(-0.3, 0.3, 3)
        e = o + rng.normal(size=3) * rng.uniform(0.02, 0.4)
        g = np.concatenate([o, e]) / r
        if np.all(np.abs(g - np.round(g)) * r > margin):
            return o, e


# -- tests -------------------------------------------------------------------

class TestKeyOf:
    @pytest.mark.parametrize(
        "p,key",
        [((0.05, 0.05, 0.05), (1, 1, 1)), ((-0.001, 0, 0), (-1, 0, 0)), ((0.04, 0.04, 0.04), (1, 1, 1))],
    )
    def test_examples(self, p, key):
        assert key_of(p, R) == key

    def test_out_of_extent(self):
        with pytest.raises(AddressingError):
            key_of((2**15 * R + 1.0, 0, 0), R)

    def test_pack_round_trip(self, rng):
        k = rng.integers(-(2**15) + 1, 2**15, size=(1000, 3))
        np.testing.assert_array_equal(unpack_keys(pack_keys(k)), k)

    def test_pack_order_is_lexicographic(self, rng):
        k = rng.integers(-50, 50, size=(500, 3))
        by_code = k[np.argsort(pack_keys(k))]
        by_lex = k[np.lexsort((k[:, 2], k[:, 1], k[:, 0]))]
        np.testing.assert_array_equal(by_code, by_lex)


class TestUpdates:
    def test_absent_node_created_at_prior(self):
        t = OccupancyOctree()
        assert t.apply_update((0, 0, 0), 0.93) == pytest.approx(0.93)

    def test_clamp_ceiling(self):
        t = OccupancyOctree(clamp_max=3.5)
        t.apply_update((1, 2, 3), 3.4)
        assert t.apply_update((1, 2, 3), 0.8) == 3.5

    def test_clamp_floor(self):
        t = OccupancyOctree(clamp_min=-2.0)
        for _ in range(10):
            t.apply_update((0, 0, 0), -0.4)
        assert t.log_odds((0, 0, 0)) == -2.0

    def test_additive(self):
        t = OccupancyOctree()
        t.apply_update((0, 0, 0), 0.2)
        assert t.apply_update((0, 0, 0), -0.4) == pytest.approx(-0.2)

    def test_states(self):
        t = OccupancyOctree()
        assert t.occupancy_state((5, 5, 5)) is Occupancy.UNKNOWN
        t.apply_update((0, 0, 0), 0.93)
        t.apply_update((1, 0, 0), -0.4)
        assert t.occupancy_state((0, 0, 0)) is Occupancy.OCCUPIED
        assert t.occupancy_state((1, 0, 0)) is Occupancy.FREE
        np.testing.assert_array_equal(
            t.states(pack_keys([(0, 0, 0), (1, 0, 0), (2, 0, 0)])), [1, 0, -1]
        )

    def test_bulk_matches_single(self, rng):
        a, b = OccupancyOctree(), OccupancyOctree()
        for _ in range(20):
            keys = np.unique(rng.integers(-5, 5, size=(30, 3)), axis=0)
            deltas = rng.uniform(-0.5, 1.0, len(keys))
            a.apply_updates(pack_keys(keys), deltas)
            for k, d in zip(keys, deltas):
                b.apply_update(tuple(k), d)
        assert a.same_nodes(b)

    def test_bulk_rejects_duplicates(self):
        with pytest.raises(ValueError):
            OccupancyOctree().apply_updates(pack_keys([(0, 0, 0), (0, 0, 0)]), [0.1, 0.2])

    @pytest.mark.parametrize("kw", [dict(resolution=0), dict(clamp_min=0.1), dict(clamp_max=-1.0)])
    def test_invalid_parameters(self, kw):
        with pytest.raises(ValueError):
            OccupancyOctree(**kw)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-0.4, 0.4), min_size=1, max_size=4), st.randoms())
    def test_order_independent_below_clamp(self, deltas, rnd):
        shuffled = list(deltas)
        rnd.shuffle(shuffled)
        a, b = OccupancyOctree(), OccupancyOctree()
        for d in deltas:
            a.apply_update((0, 0, 0), d)
        for d in shuffled:
            b.apply_update((0, 0, 0), d)
        assert a.log_odds((0, 0, 0)) == pytest.approx(sum(deltas), abs=1e-12)
        assert a.log_odds((0, 0, 0)) == pytest.approx(b.log_odds((0, 0, 0)), abs=1e-12)


def bayes_recursion(p_meas):
    """Probability-form occupancy recursion with uniform prior P(n) = 0.5."""
    p = 0.5
    for z in p_meas:
        p = 1.0 / (1.0 + (1.0 - z) / z * (1.0 - p) / p)
    return p


def test_bayes_equivalence(rng):
    for _ in range(1000):
        while True:
            deltas = rng.uniform(-0.4, 0.95, rng.integers(1, 12))
            partial = np.cumsum(deltas)
            if np.all((partial > -2.0) & (partial < 3.5)):
                break
        t = OccupancyOctree()
        for d in deltas:
            t.apply_update((0, 0, 0), float(d))
        p_map = prob_from_logodds(t.log_odds((0, 0, 0)))
        assert abs(p_map - bayes_recursion(prob_from_logodds(deltas))) <= 1e-9


class TestTraversal:
    def test_axis_aligned(self):
        assert traverse_ray((0.02, 0.02, 0.02), (0.14, 0.02, 0.02), R) == [(0, 0, 0), (1, 0, 0), (2, 0, 0)]

    def test_same_voxel(self):
        assert traverse_ray((0.01, 0.01, 0.01), (0.03, 0.02, 0.01), R) == []

    def test_negative_direction(self):
        assert traverse_ray((0.14, 0.02, 0.02), (0.02, 0.02, 0.02), R) == [(3, 0, 0), (2, 0, 0), (1, 0, 0)]

    def test_zero_length(self):
        with pytest.raises(GeometryError):
            traverse_ray((0.1, 0.1, 0.1), (0.1, 0.1, 0.1), R)

    def test_dense_sampling_oracle(self, rng):
        checked = 0
        while checked < 500:
            o, e = random_ray(rng, R, R / 1000)
            chords = voxel_chords(o, e, R)
            # the sampling oracle cannot see voxels clipped by less than one step
            if any(c < 1.01 * R / 100 for c in chords.values()):
                continue
            assert set(traverse_ray(o, e, R)) == dense_sample_keys(o, e, R)
            checked += 1

    def test_exact_clipping_oracle(self, rng):
        for _ in range(500):
            o, e = random_ray(rng, R, R / 1000)
            expected = set(voxel_chords(o, e, R))
            expected.discard(key_of(e, R))
            assert set(traverse_ray(o, e, R)) == expected

    def test_walk_properties(self, rng):
        for _ in range(300):
            o, e = random_ray(rng, R, 0.0)
            keys = traverse_ray(o, e, R)
            assert key_of(e, R) not in keys
            assert len(set(keys)) == len(keys)
            if keys:
                assert keys[0] == key_of(o, R)
                steps = np.abs(np.diff(np.array(keys + [key_of(e, R)]), axis=0))
                assert np.all(steps.sum(axis=1) == 1)

    @pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="compiled kernel not built")
    def test_backends_identical(self, rng):
        o = rng.uniform(-1, 1, (2000, 3))
        e = o + rng.normal(size=(2000, 3))
        e[:50] = o[:50]  # zero-length rows emit nothing
        e[50:100, 1] = o[50:100, 1]  # planar rays
        a = kernels.BACKENDS["python"](o, e, R)
        b = kernels.BACKENDS["compiled"](o, e, R)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_batch_grouping(self, rng):
        o = rng.uniform(-0.2, 0.2, (50, 3))
        e = o + rng.normal(size=(50, 3)) * 0.2
        codes, beam, ends = traverse_beams(o, e, R)
        assert np.all(np.diff(beam) >= 0)
        for b in range(50):
            got = [tuple(k) for k in unpack_keys(codes[beam == b]).tolist()]
            assert got == traverse_ray(o[b], e[b], R)
            assert tuple(unpack_keys(ends[b]).tolist()) == key_of(e[b], R)

    def test_miss_updates_leave_free_nodes(self, rng):
        t = OccupancyOctree()
        for _ in range(50):
            o, e = random_ray(rng, R, 0.0)
            keys = traverse_ray(o, e, R)
            t.apply_updates(pack_keys(keys), np.full(len(keys), -0.4))
            for k in keys:
                assert k in t
                assert t.occupancy_state(k) is Occupancy.FREE


class TestSerialization:
    def _tree(self, rng, n=200):
        t = OccupancyOctree(0.05, -1.5, 2.5, 0.1)
        keys = np.unique(rng.integers(-300, 300, size=(n, 3)), axis=0)
        t.apply_updates(pack_keys(keys), rng.uniform(-2, 3, len(keys)))
        return t

    def test_empty_round_trip(self):
        t = OccupancyOctree()
        data = t.serialize()
        assert len(data) == 4 + 2 + 4 * 8 + 8
        assert OccupancyOctree.deserialize(data).same_nodes(t)

    def test_single_node(self):
        t = OccupancyOctree()
        t.apply_update((-3, 7, 11), 0.93)
        data = t.serialize()
        assert len(data) == 46 + 20
        u = OccupancyOctree.deserialize(data)
        assert u.same_nodes(t)
        assert u.log_odds((-3, 7, 11)) == t.log_odds((-3, 7, 11))

    def test_round_trip_and_reserialize(self, rng):
        t = self._tree(rng)
        data = t.serialize()
        u = OccupancyOctree.deserialize(data)
        assert u.same_nodes(t)
        assert u.serialize() == data

    def test_layout(self):
        t = OccupancyOctree()
        t.apply_update((1, -2, 3), 0.5)
        data = t.serialize()
        assert data[:4] == b"MMOT"
        assert int.from_bytes(data[4:6], "little") == 1
        assert np.frombuffer(data[6:14], "<f8")[0] == 0.04
        assert int.from_bytes(data[38:46], "little") == 1
        assert np.frombuffer(data[46:58], "<i4").tolist() == [1, -2, 3]
        assert np.frombuffer(data[58:66], "<f8")[0] == 0.5

    def test_bad_magic(self):
        with pytest.raises(MapFormatError) as exc:
            OccupancyOctree.deserialize(b"NOPE" + bytes(42))
        assert exc.value.offset == 0

    def test_version_mismatch(self):
        data = bytearray(OccupancyOctree().serialize())
        data[4] = 2
        with pytest.raises(MapFormatError) as exc:
            OccupancyOctree.deserialize(bytes(data))
        assert exc.value.offset == 4

    def test_truncated(self, rng):
        data = self._tree(rng).serialize()
        for cut in (3, 10, 45, len(data) - 1, len(data) - 25):
            with pytest.raises(MapFormatError):
                OccupancyOctree.deserialize(data[:cut])
        with pytest.raises(MapFormatError) as exc:
            OccupancyOctree.deserialize(data[: 46 + 20 * 3 + 5])
        assert exc.value.offset == 46 + 20 * 3

    def test_text_export(self):
        t = OccupancyOctree()
        t.apply_update((1, 2, 3), 0.93)
        t.apply_update((-1, 0, 0), -0.4)
        lines = t.to_text().splitlines()
        body = [ln for ln in lines if not ln.startswith("#")]
        assert body == ["-1 0 0 -0.4", "1 2 3 0.93"]
        assert all(ln.startswith("#") for ln in lines[: len(lines) - 2])
