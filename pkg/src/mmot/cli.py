"""Command-line front end (``mmot``)."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import kernels
from .config import DEFAULT_SEED, SENSOR_MODES, ScenarioError, bundled_scenarios, load_scenario
from .evaluation import GroundTruthMap, compare_maps, curves_to_csv, emit_update_curves
from .io import atomic_write_text
from .octree import MapFormatError, OccupancyOctree, Occupancy
from .runner import ground_truth_for, run_scenario

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"\n{self.prog}: error: {message}\n")


def _scenario_arg(args):
    name = args.scenario_opt or args.scenario
    if name is None:
        raise _UsageError("a scenario is required (path or one of: " + ", ".join(bundled_scenarios()) + ")")
    return name


class _UsageError(Exception):
    pass


def _cmd_simulate(args) -> int:
    cfg = load_scenario(_scenario_arg(args)).with_overrides(args.sensors, args.duration, args.seed)
    stem = f"{cfg.name}_{cfg.sensors}"
    out_map = Path(args.out_map or f"{stem}.mmot")
    out_report = Path(args.out_report or f"{stem}.report.txt")
    sink = open(args.diagnostics, "w", encoding="utf-8") if args.diagnostics else sys.stderr
    try:
        def emit(rec):
            sink.write(json.dumps(rec, sort_keys=True) + "\n")

        result = run_scenario(cfg, diagnostics=emit, verbose=args.verbose)
    finally:
        if sink is not sys.stderr:
            sink.close()
    result.tree.save(out_map)
    text = result.report.to_csv() if out_report.suffix == ".csv" else result.report.to_text()
    atomic_write_text(out_report, text)
    print(result.report.to_text(), end="")
    return EXIT_OK


def _cmd_compare(args) -> int:
    gt = GroundTruthMap.from_octree(OccupancyOctree.load(args.gt_map))
    report = compare_maps(gt, OccupancyOctree.load(args.map), {"gt_map": args.gt_map, "map": args.map})
    if args.out_report:
        atomic_write_text(args.out_report, report.to_csv() if args.out_report.endswith(".csv") else report.to_text())
    print(report.to_text(), end="")
    return EXIT_OK


def _cmd_curves(args) -> int:
    models = load_scenario(args.scenario_opt).models if args.scenario_opt else None
    rows = emit_update_curves(models, args.d_min, args.d_max, args.step)
    atomic_write_text(args.out, curves_to_csv(rows))
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_groundtruth(args) -> int:
    cfg = load_scenario(_scenario_arg(args))
    gt = ground_truth_for(cfg)
    o = cfg.octree
    gt.to_octree(o.clamp_min, o.clamp_max, o.occupancy_threshold).save(args.out)
    print(f"occupied = {gt.occupied.size}\nfree = {gt.free.size}\ninterior = {gt.interior.size}")
    return EXIT_OK


def _cmd_info(args) -> int:
    tree = OccupancyOctree.load(args.map)
    states = tree.states(tree.codes)
    print(f"format = MMOT v1\nresolution = {tree.resolution!r}\nclamp_min = {tree.clamp_min!r}")
    print(f"clamp_max = {tree.clamp_max!r}\noccupancy_threshold = {tree.occupancy_threshold!r}")
    print(f"nodes = {len(tree)}\noccupied = {int((states == Occupancy.OCCUPIED).sum())}")
    print(f"free = {int((states == Occupancy.FREE).sum())}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mmot", description="Fused depth-camera/proximity occupancy mapping simulator.")
    p.add_argument("--backend-info", action="store_true", help="print the traversal backend and exit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a scenario and score the map against ground truth")
    s.add_argument("scenario", nargs="?", help="scenario file or bundled scenario name")
    s.add_argument("--scenario", dest="scenario_opt", metavar="PATH")
    s.add_argument("--seed", type=int, help=f"64-bit seed (scenario default, built-in {DEFAULT_SEED})")
    s.add_argument("--out-map", metavar="PATH")
    s.add_argument("--out-report", metavar="PATH", help="text report, or CSV when the name ends in .csv")
    s.add_argument("--sensors", choices=SENSOR_MODES)
    s.add_argument("--duration", type=float, metavar="S")
    s.add_argument("--diagnostics", metavar="PATH", help="per-tick NDJSON records (default: stderr)")
    s.add_argument("--verbose", action="store_true", help="include per-node delta breakdowns")
    s.set_defaults(func=_cmd_simulate)

    c = sub.add_parser("compare", help="score a map against a ground-truth map file")
    c.add_argument("gt_map")
    c.add_argument("map")
    c.add_argument("--out-report", metavar="PATH")
    c.set_defaults(func=_cmd_compare)

    cv = sub.add_parser("curves", help="write hit-probability curves as CSV")
    cv.add_argument("out")
    cv.add_argument("--d-min", type=float, default=0.0)
    cv.add_argument("--d-max", type=float, default=4.0)
    cv.add_argument("--step", type=float, default=0.01)
    cv.add_argument("--scenario", dest="scenario_opt", metavar="PATH", help="take sensor constants from a scenario")
    cv.set_defaults(func=_cmd_curves)

    g = sub.add_parser("groundtruth", help="voxelize a scenario into a ground-truth MMOT map")
    g.add_argument("scenario", nargs="?")
    g.add_argument("out")
    g.add_argument("--scenario", dest="scenario_opt", metavar="PATH")
    g.set_defaults(func=_cmd_groundtruth)

    i = sub.add_parser("info", help="print the header and node counts of an MMOT map")
    i.add_argument("map")
    i.set_defaults(func=_cmd_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.backend_info:
        print(kernels.BACKEND)
        return EXIT_OK
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mmot: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, MapFormatError) as exc:
        print(f"mmot: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"mmot: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"mmot: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
