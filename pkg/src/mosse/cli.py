"""Benchmark command line: map generation, DEM ingestion, planning, campaigns, scoring.

Exit codes: 0 on success, 1 on configuration errors, 2 when more than 20% of
campaign rows fail.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, geo
from .baselines import evaluate_coverage
from .bench import BenchConfig, ConfigError
from .maps import load_map, save_map, scalarize
from .sensing import SensorMask
from .solver import SolverConfig, read_plan, solve, write_plan

FAILURE_EXIT_THRESHOLD = 0.2


def _load_config(args) -> BenchConfig:
    if args.config:
        config = BenchConfig.from_json(args.config)
    else:
        config = BenchConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_maps(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    rng = np.random.default_rng([config.seed, 1, 0, 0])
    maps = bench.random_objective_maps(config, rng)
    for i, objective in enumerate(maps):
        path = out / f"objective_{i + 1}.txt"
        save_map(objective, path)
        print(f"wrote {path}")
    return 0


def cmd_ingest_dem(args) -> int:
    config = _load_config(args)
    if config.sun_azimuth_deg is None or config.sun_elevation_deg is None:
        raise ConfigError("ingest-dem requires sun_azimuth_deg and sun_elevation_deg")
    out = _out_dir(args)
    dem = geo.load_dem(args.dem)
    sun = geo.SunVector(
        azimuth=math.radians(config.sun_azimuth_deg) % (2.0 * math.pi),
        elevation_angle=math.radians(config.sun_elevation_deg),
    )
    shade = geo.raycast_shade(dem, sun)
    save_map(shade, out / "shade.txt")
    print(f"wrote {out / 'shade.txt'}")
    slope = geo.slope_objective(geo.sobel_slope(dem), invert=config.slope_mode == "avoid")
    save_map(slope, out / "slope.txt")
    print(f"wrote {out / 'slope.txt'}")
    if args.entropy:
        entropy = geo.threshold_entropy(load_map(args.entropy), config.entropy_threshold)
        save_map(entropy, out / "entropy.txt")
        print(f"wrote {out / 'entropy.txt'}")
    return 0


def _single_scenario(config: BenchConfig):
    """Scenario for the plan command: first team size, first budget, trial 0."""
    team_size = config.team_sizes[0]
    if config.mode == "synthetic":
        rng = np.random.default_rng([config.seed, team_size, 0, 0])
        maps = bench.random_objective_maps(config, rng)
    else:
        maps = bench.load_objective_maps(config)
    if config.start_positions:
        starts = np.array(config.start_positions, dtype=float)
    else:
        starts_rng = np.random.default_rng([config.seed, team_size, 0, 1])
        starts = starts_rng.uniform(*bench.START_RANGE, size=(team_size, 2))
    mask = bench._team_mask(config, team_size)
    solver_seed = bench.derive_seed(config.seed, team_size, 0, 2)
    scenario = bench._base_scenario(
        config, maps, maps[0], starts, mask, config.budgets_percent[0], solver_seed
    )
    weighting = bench.select_weighting(maps, config, scenario)
    scenario = replace(scenario, combined_map=scalarize(maps, weighting))
    return scenario, maps, solver_seed


def cmd_plan(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    scenario, maps, solver_seed = _single_scenario(config)
    result = solve(scenario, SolverConfig(max_iters=config.max_iters, seed=solver_seed))
    plan_path = out / "plan.txt"
    write_plan(result, plan_path)
    for i, objective in enumerate(maps):
        save_map(objective, out / f"objective_{i + 1}.txt")
    print(f"wrote {plan_path} (final objective {result.final_objective:.6g})")
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args)
    if not config.map_files:
        raise ConfigError("eval requires map_files in the config")
    maps = bench.load_objective_maps(config)
    plan = read_plan(args.plan)
    basis = bench.BasisConfig(dims=2, modes_per_dim=config.modes_per_dim)
    phi = evaluate_coverage(plan.trajectories, plan.binary_schedules, maps, basis)
    print("objective,phi")
    for i, value in enumerate(phi):
        print(f"{i + 1},{value!r}")
    if args.out_dir:
        out = _out_dir(args)
        with open(out / "eval.csv", "w") as fh:
            fh.write("objective,phi\n")
            for i, value in enumerate(phi):
                fh.write(f"{i + 1},{value!r}\n")
    return 0 if np.isfinite(phi).all() else 2


def cmd_bench(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    result = bench.run_experiment(config, parallel=args.parallel)
    paths = bench.emit_results(result, out)
    for name in ("results", "aggregate", "traces", "timings"):
        print(f"wrote {paths[name]}")
    failed = result.failure_fraction
    if failed > 0.0:
        print(f"warning: {failed:.0%} of rows failed")
    return 2 if failed > FAILURE_EXIT_THRESHOLD else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mosse",
        description=(
            "Plan coverage trajectories with per-sensor measurement schedules and "
            "benchmark them against uniform and probabilistic sampling baselines."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, out_required=True):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--out-dir", default="out", required=False, help="output directory"
        )
        p.add_argument(
            "--parallel", type=int, default=1, help="worker processes for campaigns"
        )

    p = sub.add_parser("gen-maps", help="write synthetic objective map files")
    add_common(p)
    p.set_defaults(func=cmd_gen_maps)

    p = sub.add_parser("ingest-dem", help="derive slope/shade (and entropy) maps from a DEM")
    add_common(p)
    p.add_argument("--dem", required=True, help="ESRI ASCII grid file")
    p.add_argument("--entropy", help="optional entropy map file to threshold")
    p.set_defaults(func=cmd_ingest_dem)

    p = sub.add_parser("plan", help="solve one scenario and write the plan document")
    add_common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="run the full planner-comparison campaign")
    add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="score a stored plan against objective maps")
    add_common(p)
    p.add_argument("--plan", required=True, help="plan document to score")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
