import math

import numpy as np
import pytest

from mmot.geometry import GeometryError, Pose, prob_from_logodds, rot_x
from mmot.sensors import (
    DepthFrame,
    ProximityReading,
    RangeError,
    SensorClass,
    SensorKind,
    beams_from_depth,
    beams_from_proximity,
    default_depth_camera,
    default_proximity,
    depth_hit_logodds,
    miss_logodds,
    proximity_hit_logodds,
)


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


class TestProximityModel:
    def test_dead_zone(self):
        assert proximity_hit_logodds(0.02) == 0.0
        assert proximity_hit_logodds(0.0) == 0.0

    def test_one_meter(self):
        assert proximity_hit_logodds(1.0) == pytest.approx(0.93, abs=1e-12)

    def test_min_range_is_live(self):
        assert proximity_hit_logodds(0.04) == pytest.approx(0.9972, abs=1e-12)
        assert sigmoid(proximity_hit_logodds(0.04)) == pytest.approx(0.7305, abs=1e-3)

    def test_max_range(self):
        assert proximity_hit_logodds(4.0) == pytest.approx(0.72, abs=1e-12)
        assert sigmoid(proximity_hit_logodds(4.0)) == pytest.approx(0.6726, abs=1e-3)

    def test_beyond_max_range(self):
        with pytest.raises(RangeError):
            proximity_hit_logodds(4.01)

    @pytest.mark.parametrize("d", [-0.1, math.nan])
    def test_invalid(self, d):
        with pytest.raises(RangeError):
            proximity_hit_logodds(d)


class TestDepthModel:
    def test_dead_zone(self):
        assert depth_hit_logodds(0.3) == 0.0

    def test_two_meters(self):
        assert depth_hit_logodds(2.0) == pytest.approx(0.8, abs=1e-12)
        assert sigmoid(depth_hit_logodds(2.0)) == pytest.approx(0.6900, abs=1e-3)

    def test_boundary(self):
        assert depth_hit_logodds(0.5) == pytest.approx(0.95, abs=1e-12)
        assert sigmoid(depth_hit_logodds(0.5)) == pytest.approx(0.7211, abs=1e-3)
        assert depth_hit_logodds(0.5 - 1e-9) == 0.0

    def test_beyond_max_range(self):
        with pytest.raises(RangeError):
            depth_hit_logodds(5.0)


class TestModelProperties:
    @pytest.mark.parametrize("model", [default_proximity(), default_depth_camera()])
    def test_positive_and_decreasing_past_dead_zone(self, model):
        d = np.linspace(model.min_range, model.max_range, 1000)
        v = model.hit_logodds(d)
        assert np.all(v > 0)
        assert np.all(np.diff(v) < 0)

    @pytest.mark.parametrize("model", [default_proximity(), default_depth_camera()])
    def test_miss(self, model):
        assert miss_logodds(model) == -0.4
        assert prob_from_logodds(miss_logodds(model)) == pytest.approx(0.4013, abs=1e-4)

    def test_array_input(self):
        v = default_proximity().hit_logodds(np.array([0.0, 0.03, 1.0]))
        np.testing.assert_allclose(v, [0.0, 0.0, 0.93])

    @pytest.mark.parametrize(
        "kw",
        [
            dict(min_range=1.0, max_range=0.5),
            dict(miss_logodds=0.1),
            dict(hit_slope=-1.0),
        ],
    )
    def test_validation(self, kw):
        base = dict(kind=SensorKind.PROXIMITY, min_range=0.04, max_range=4.0, hit_slope=-0.07, hit_intercept=1.0)
        base.update(kw)
        with pytest.raises(ValueError):
            SensorClass(**base)


class TestBeams:
    def test_proximity_hit(self):
        b = beams_from_proximity(ProximityReading(1, Pose(), 0.5))
        np.testing.assert_array_equal(b.origin, [0, 0, 0])
        np.testing.assert_array_equal(b.endpoint, [0, 0, 0.5])
        assert b.hit and b.range == 0.5

    def test_proximity_miss(self):
        b = beams_from_proximity(ProximityReading(1, Pose(), None))
        np.testing.assert_array_equal(b.endpoint, [0, 0, 4.0])
        assert not b.hit and b.range == 4.0

    def test_proximity_rotated(self):
        pose = Pose(np.array([1.0, 0, 0]), rot_x(math.pi / 2))
        b = beams_from_proximity(ProximityReading(3, pose, 0.5))
        np.testing.assert_allclose(b.endpoint, [1, -0.5, 0], atol=1e-15)
        assert b.sensor_id == 3

    def test_proximity_invalid_distance(self):
        with pytest.raises(GeometryError):
            ProximityReading(1, Pose(), -0.5)

    def test_depth_single(self):
        (b,) = beams_from_depth(DepthFrame(Pose(), [[0, 0, 2.0]]))
        np.testing.assert_array_equal(b.endpoint, [0, 0, 2])
        assert b.range == 2.0 and b.kind is SensorKind.DEPTH_CAMERA

    def test_depth_translated(self):
        (b,) = beams_from_depth(DepthFrame(Pose(np.array([0, 0, -1.0])), [[0, 0, 2.0]]))
        np.testing.assert_array_equal(b.origin, [0, 0, -1])
        np.testing.assert_array_equal(b.endpoint, [0, 0, 1])
        assert b.range == 2.0

    def test_depth_miss_carves_to_max_range(self):
        (b,) = beams_from_depth(DepthFrame(Pose(), [[0, 0.6, 0.8]], hit=[False]))
        np.testing.assert_allclose(b.endpoint, [0, 2.4, 3.2])
        assert not b.hit and b.range == 4.0

    def test_depth_empty(self):
        assert beams_from_depth(DepthFrame(Pose(), np.empty((0, 3)))) == []

    def test_depth_behind_camera(self):
        with pytest.raises(GeometryError):
            DepthFrame(Pose(), [[0, 0, -1.0]])


def test_proximity_curve_above_depth_curve():
    d = np.linspace(0.5, 4.0, 351)
    assert np.all(default_proximity().hit_logodds(d) > default_depth_camera().hit_logodds(d))
