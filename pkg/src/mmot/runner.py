"""End-to-end scenario execution: simulate, fuse, voxelize, compare."""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import ScenarioConfig
from .evaluation import ComparisonReport, GroundTruthMap, build_ground_truth, compare_maps, count_occupied, region_codes
from .fusion import IntegrationStats, integrate_scan
from .octree import OccupancyOctree
from .scene import simulate_tick


@dataclass
class RunResult:
    config: ScenarioConfig
    tree: OccupancyOctree
    ground_truth: GroundTruthMap
    report: ComparisonReport
    stats: list[IntegrationStats] = field(repr=False, default_factory=list)


def ground_truth_for(config: ScenarioConfig) -> GroundTruthMap:
    return build_ground_truth(config.scene, config.octree.resolution, config.viewpoints)


def build_map(config: ScenarioConfig, diagnostics=None, verbose: bool = False):
    """Simulate every tick of ``config`` and fuse it into a fresh map."""
    tree = OccupancyOctree(**vars(config.octree))
    use_depth = config.sensors in ("depth", "fused")
    use_prox = config.sensors in ("proximity", "fused")
    dirs = config.rig.camera.ray_directions()
    stats = []
    for tick in range(config.ticks):
        batch = simulate_tick(
            config.scene, config.rig, config.trajectory, tick, config.seed, config.models,
            proximity=use_prox, depth=use_depth, _dirs_cam=dirs,
        )
        st = integrate_scan(
            tree, batch, config.models, cross_sensor_dedup=config.cross_sensor_dedup,
            carve_misses=config.carve_misses, audit=verbose,
        )
        if diagnostics is not None:
            diagnostics(st.to_record())
        st.deltas = None
        stats.append(st)
    return tree, stats


def run_scenario(config: ScenarioConfig, ground_truth: GroundTruthMap | None = None,
                 diagnostics=None, verbose: bool = False) -> RunResult:
    tree, stats = build_map(config, diagnostics, verbose)
    gt = ground_truth if ground_truth is not None else ground_truth_for(config)
    meta = {
        "scenario": config.name,
        "seed": config.seed,
        "sensors": config.sensors,
        "resolution": config.octree.resolution,
        "duration": config.duration,
        "ticks": config.ticks,
        "nodes": len(tree),
    }
    if config.probe is not None:
        probe = config.scene.primitive(config.probe)
        meta["probe"] = config.probe
        meta["probe_occupied"] = count_occupied(tree, region_codes(probe, tree.resolution))
    report = compare_maps(gt, tree, meta)
    return RunResult(config, tree, gt, report, stats)
