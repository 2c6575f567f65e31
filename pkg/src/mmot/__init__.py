"""Multi-modal occupancy octree.

Fuses external depth-camera beams and onboard proximity-sensor beams into one
log-odds voxel map, with a deterministic scene simulator and Occupied / Free /
Missed / Incorrect scoring against a voxelized ground truth.
"""

from .config import ScenarioConfig, load_scenario, parse_scenario, serialize_scenario
from .evaluation import ComparisonReport, GroundTruthMap, build_ground_truth, compare_maps, emit_update_curves
from .fusion import ScanBatch, integrate_scan, node_probability
from .geometry import Pose, depth_object_position, logodds_from_prob, prob_from_logodds, proximity_object_position
from .kernels import BACKEND
from .octree import Occupancy, OccupancyOctree, key_of, traverse_ray
from .runner import run_scenario
from .scene import Primitive, Scene, SensorRig, Trajectory, end_effector_pose, simulate_tick
from .sensors import DepthFrame, ProximityReading, SensorClass, SensorKind, default_models

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ComparisonReport", "DepthFrame", "GroundTruthMap", "Occupancy", "OccupancyOctree",
    "Pose", "Primitive", "ProximityReading", "ScanBatch", "ScenarioConfig", "Scene", "SensorClass",
    "SensorKind", "SensorRig", "Trajectory", "build_ground_truth", "compare_maps", "default_models",
    "depth_object_position", "emit_update_curves", "end_effector_pose", "integrate_scan", "key_of",
    "load_scenario", "logodds_from_prob", "node_probability", "parse_scenario", "prob_from_logodds",
    "proximity_object_position", "run_scenario", "serialize_scenario", "simulate_tick", "traverse_ray",
]
