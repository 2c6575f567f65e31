"""Time the voxel traversal backends and a full fusion tick.

    python3 benchmarks/bench_traversal.py [--rays N] [--repeat K]
"""

import argparse
import time

import numpy as np

from mmot import kernels
from mmot.config import load_scenario
from mmot.fusion import integrate_scan
from mmot.octree import OccupancyOctree
from mmot.scene import simulate_tick


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rays", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    origins = rng.uniform(-0.5, 0.5, (args.rays, 3))
    endpoints = origins + rng.normal(size=(args.rays, 3)) * 0.8
    ref = None
    print(f"traversal of {args.rays} rays at 0.04 m, best of {args.repeat}")
    for name, fn in kernels.BACKENDS.items():
        out = fn(origins, endpoints, 0.04)
        if ref is None:
            ref = out
        same = all(np.array_equal(a, b) for a, b in zip(out, ref))
        t = best_of(lambda: fn(origins, endpoints, 0.04), args.repeat)
        print(f"  {name:9s} {t * 1e3:8.1f} ms  {len(out[0]) / t / 1e6:6.2f} Mvoxel/s  matches reference: {same}")

    cfg = load_scenario("occluded-shelf")
    batch = simulate_tick(cfg.scene, cfg.rig, cfg.trajectory, 0, cfg.seed, cfg.models)
    print("one fused tick (4800 depth rays + 34 proximity beams)")
    for name, fn in kernels.BACKENDS.items():
        kernels.traverse_rays = fn
        t = best_of(lambda: integrate_scan(OccupancyOctree(), batch, cfg.models), args.repeat)
        print(f"  {name:9s} {t * 1e3:8.1f} ms")
    kernels.traverse_rays = kernels.BACKENDS[kernels.BACKEND]


if __name__ == "__main__":
    main()
