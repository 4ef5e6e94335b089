"""Campaign configuration, randomized trial generation, and results emission."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .baselines import (
    evaluate_coverage,
    plan_standard_ergodic,
    probabilistic_schedule,
    uniform_schedule,
)
from .maps import ObjectiveMap, WeightVector, load_map, scalarize, synth_gaussian_map, weight_grid, topsis_select
from .sensing import Budget, SensorMask
from .solver import (
    BasisConfig,
    DynamicsModel,
    SolverConfig,
    TeamScenario,
    solve,
)
from .spectral import ergodic_metric, map_coefficients, team_trajectory_coefficients

PLANNERS = ("uniform", "probabilistic", "mosse")

# Synthetic map randomization: 2-4 unit-amplitude Gaussian peaks per map,
# centers away from the walls, moderate widths.
PEAK_COUNT_RANGE = (2, 4)
PEAK_CENTER_RANGE = (0.15, 0.85)
PEAK_SIGMA_RANGE = (0.05, 0.15)
START_RANGE = (0.1, 0.9)


class ConfigError(ValueError):
    """The benchmark configuration is malformed."""


@dataclass(frozen=True)
class BenchConfig:
    """Everything a campaign needs; serializes to/from a flat JSON object."""

    mode: str = "synthetic"  # synthetic | geo (load map_files)
    team: str = "single"  # single | homogeneous | heterogeneous
    n_objectives: int = 3
    n_trials: int = 25
    budgets_percent: tuple[float, ...] = (10.0, 25.0, 50.0, 85.0)
    team_sizes: tuple[int, ...] = ()  # defaults: (1,) single, 3..10 multi-agent
    horizon: int = 256
    dt: float = 0.1
    u_max: float = 1.0
    modes_per_dim: int = 10
    map_resolution: tuple[int, int] = (100, 100)
    l1_weight: float = 0.1
    max_iters: int = 300
    pilot_iters: int = 50
    weight_steps: int = 4
    seed: int = 0
    map_files: tuple[str, ...] = ()
    start_positions: tuple[tuple[float, float], ...] = ()  # fixed starts (plan command)
    weights: tuple[float, ...] = ()  # explicit scalarization; empty -> TOPSIS
    # geo ingestion settings (used by the ingest-dem command)
    sun_azimuth_deg: float | None = None
    sun_elevation_deg: float | None = None
    entropy_threshold: float = 0.75
    slope_mode: str = "avoid"  # avoid (invert slope) | cover

    def __post_init__(self):
        if self.mode not in ("synthetic", "geo"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.team not in ("single", "homogeneous", "heterogeneous"):
            raise ConfigError(f"unknown team kind {self.team!r}")
        if self.n_objectives < 1 or self.n_trials < 1:
            raise ConfigError("n_objectives and n_trials must be positive")
        if not self.budgets_percent:
            raise ConfigError("at least one budget percent required")
        for pct in self.budgets_percent:
            if not 0.0 < pct <= 100.0:
                raise ConfigError(f"budget percent {pct} outside (0, 100]")
        if self.horizon < 1 or self.modes_per_dim < 1:
            raise ConfigError("horizon and modes_per_dim must be positive")
        if self.dt <= 0 or self.u_max <= 0 or self.l1_weight < 0:
            raise ConfigError("dt, u_max must be positive and l1_weight nonnegative")
        if self.max_iters < 0 or self.pilot_iters < 0 or self.weight_steps < 1:
            raise ConfigError("iteration counts must be nonnegative, weight_steps >= 1")
        if self.mode == "geo" and len(self.map_files) != self.n_objectives:
            raise ConfigError("geo mode needs one map file per objective")
        if self.slope_mode not in ("avoid", "cover"):
            raise ConfigError(f"unknown slope_mode {self.slope_mode!r}")
        if self.weights and len(self.weights) != self.n_objectives:
            raise ConfigError("explicit weights must cover every objective")
        sizes = self.team_sizes
        if not sizes:
            sizes = (1,) if self.team == "single" else tuple(range(3, 11))
        if self.team == "single" and any(s != 1 for s in sizes):
            raise ConfigError("single-agent mode requires team size 1")
        if self.team != "single" and any(s < 2 for s in sizes):
            raise ConfigError("multi-agent team sizes must be at least 2")
        if self.team == "heterogeneous" and any(s < self.n_objectives for s in sizes):
            raise ConfigError(
                "heterogeneous teams need at least one agent per sensor"
            )
        object.__setattr__(self, "team_sizes", tuple(int(s) for s in sizes))
        object.__setattr__(self, "budgets_percent", tuple(float(b) for b in self.budgets_percent))
        object.__setattr__(self, "map_resolution", tuple(int(v) for v in self.map_resolution))
        object.__setattr__(self, "map_files", tuple(str(p) for p in self.map_files))
        object.__setattr__(
            self,
            "start_positions",
            tuple((float(x), float(y)) for x, y in self.start_positions),
        )
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "BenchConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)


def config_hash(config: BenchConfig) -> str:
    """Short stable digest of the full configuration."""
    canonical = json.dumps(asdict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def derive_seed(base: int, *keys: int) -> int:
    """Deterministic substream seed for (base, keys...)."""
    seq = np.random.SeedSequence([int(base), *[int(k) for k in keys]])
    return int(seq.generate_state(1)[0])


@dataclass(frozen=True)
class TrialResult:
    """One planner's scores for one (team size, trial, budget) cell."""

    team_size: int
    trial: int
    seed: int
    planner: str
    budget_percent: float
    phi: tuple[float, ...]
    wall_time: float
    config_hash: str
    error: str = ""


@dataclass(frozen=True)
class TraceRow:
    """One descent trace, plot-ready."""

    team_size: int
    trial: int
    planner: str
    budget_percent: float | None
    objective: tuple[float, ...]


@dataclass(frozen=True)
class BenchResult:
    rows: tuple[TrialResult, ...]
    traces: tuple[TraceRow, ...]
    config: BenchConfig
    config_hash: str

    @property
    def failure_fraction(self) -> float:
        if not self.rows:
            return 0.0
        failed = sum(1 for r in self.rows if r.error)
        return failed / len(self.rows)


def random_objective_maps(config: BenchConfig, rng: np.random.Generator) -> list[ObjectiveMap]:
    """Synthetic trial maps: a few random Gaussian peaks each."""
    maps = []
    for i in range(config.n_objectives):
        n_peaks = int(rng.integers(PEAK_COUNT_RANGE[0], PEAK_COUNT_RANGE[1] + 1))
        peaks = []
        for _ in range(n_peaks):
            center = rng.uniform(*PEAK_CENTER_RANGE, size=2)
            sigma = float(rng.uniform(*PEAK_SIGMA_RANGE))
            peaks.append((tuple(center), sigma, 1.0))
        maps.append(
            synth_gaussian_map(peaks, config.map_resolution, name=f"objective_{i + 1}")
        )
    return maps


def load_objective_maps(config: BenchConfig) -> list[ObjectiveMap]:
    return [load_map(path).normalized() for path in config.map_files]


def _team_mask(config: BenchConfig, team_size: int) -> SensorMask:
    if config.team == "heterogeneous":
        return SensorMask.cyclic(team_size, config.n_objectives)
    return SensorMask.homogeneous(team_size, config.n_objectives)


def _base_scenario(
    config: BenchConfig,
    maps,
    combined: ObjectiveMap,
    starts: np.ndarray,
    mask: SensorMask,
    budget_percent: float,
    seed: int,
) -> TeamScenario:
    n_steps = config.horizon + 1
    budgets = tuple(
        Budget.from_percent(budget_percent, n_steps, onboard=mask.onboard[m])
        for m in range(mask.n_agents)
    )
    return TeamScenario(
        maps=tuple(maps),
        combined_map=combined,
        starts=starts,
        mask=mask,
        budgets=budgets,
        dynamics=DynamicsModel(u_max=config.u_max, dt=config.dt),
        horizon=config.horizon,
        basis=BasisConfig(dims=2, modes_per_dim=config.modes_per_dim),
        l1_weight=config.l1_weight,
        seed=seed,
    )


def pilot_scores(maps, candidates, scenario: TeamScenario, cfg: SolverConfig) -> np.ndarray:
    """Cost matrix for weight selection: per-objective coverage of short pilot plans.

    Each candidate weighting gets a short trajectory-only solve on its
    scalarized map; the row holds the coverage error of the full pilot
    trajectory against each objective (lower is better).
    """
    maps = list(maps)
    xis = [map_coefficients(m, scenario.basis) for m in maps]
    rows = []
    for candidate in candidates:
        combined = scalarize(maps, candidate)
        pilot_scenario = replace(scenario, combined_map=combined)
        plan = plan_standard_ergodic(pilot_scenario, cfg)
        pooled = team_trajectory_coefficients(plan.trajectories, scenario.basis)
        rows.append([ergodic_metric(pooled, xi) for xi in xis])
    return np.array(rows)


def select_weighting(maps, config: BenchConfig, scenario: TeamScenario) -> WeightVector:
    """Explicit config weights if given, otherwise TOPSIS over the simplex grid."""
    if config.weights:
        return WeightVector(config.weights)
    candidates = weight_grid(config.n_objectives, config.weight_steps)
    pilot_cfg = SolverConfig(max_iters=config.pilot_iters, seed=scenario.seed)
    criteria = pilot_scores(maps, candidates, scenario, pilot_cfg)
    return topsis_select(candidates, criteria)


def _failure_rows(config, chash, team_size, trial, seed, budgets, message):
    nan_phi = (math.nan,) * config.n_objectives
    return [
        TrialResult(
            team_size=team_size,
            trial=trial,
            seed=seed,
            planner=planner,
            budget_percent=pct,
            phi=nan_phi,
            wall_time=0.0,
            config_hash=chash,
            error=message,
        )
        for pct in budgets
        for planner in PLANNERS
    ]


def run_trial(config: BenchConfig, team_size: int, trial: int):
    """One randomized setup scored by all planners at every budget.

    Maps and starts are drawn per trial and shared by every planner and budget;
    failures are confined to the rows they affect.
    """
    chash = config_hash(config)
    trial_seed = derive_seed(config.seed, team_size, trial)
    rows: list[TrialResult] = []
    traces: list[TraceRow] = []
    try:
        maps_rng = np.random.default_rng([config.seed, team_size, trial, 0])
        starts_rng = np.random.default_rng([config.seed, team_size, trial, 1])
        if config.mode == "synthetic":
            maps = random_objective_maps(config, maps_rng)
        else:
            maps = load_objective_maps(config)
        if config.start_positions:
            starts = np.array(config.start_positions, dtype=float)
            if starts.shape[0] != team_size:
                raise ConfigError("start_positions must cover every agent")
        else:
            starts = starts_rng.uniform(*START_RANGE, size=(team_size, 2))
        mask = _team_mask(config, team_size)
        solver_seed = derive_seed(config.seed, team_size, trial, 2)

        scenario = _base_scenario(
            config, maps, maps[0], starts, mask, config.budgets_percent[0], solver_seed
        )
        weighting = select_weighting(maps, config, scenario)
        combined = scalarize(maps, weighting)
        scenario = replace(scenario, combined_map=combined)

        solver_cfg = SolverConfig(max_iters=config.max_iters, seed=solver_seed)
        t0 = time.perf_counter()
        standard = plan_standard_ergodic(scenario, solver_cfg)
        standard_time = time.perf_counter() - t0
        traces.append(
            TraceRow(
                team_size=team_size,
                trial=trial,
                planner="standard_ergodic",
                budget_percent=None,
                objective=tuple(float(v) for v in standard.objective_trace),
            )
        )
    except Exception as exc:  # isolate the whole trial
        return (
            _failure_rows(
                config,
                chash,
                team_size,
                trial,
                trial_seed,
                config.budgets_percent,
                f"{type(exc).__name__}: {exc}",
            ),
            traces,
        )

    n_steps = config.horizon + 1
    for budget_idx, pct in enumerate(config.budgets_percent):
        try:
            budgets = tuple(
                Budget.from_percent(pct, n_steps, onboard=mask.onboard[m])
                for m in range(team_size)
            )
            budget_scenario = replace(scenario, budgets=budgets)

            t0 = time.perf_counter()
            mosse_plan = solve(budget_scenario, solver_cfg)
            mosse_time = time.perf_counter() - t0
            phi_mosse = evaluate_coverage(
                mosse_plan.trajectories,
                mosse_plan.binary_schedules,
                maps,
                scenario.basis,
            )
            traces.append(
                TraceRow(
                    team_size=team_size,
                    trial=trial,
                    planner="mosse",
                    budget_percent=pct,
                    objective=tuple(float(v) for v in mosse_plan.objective_trace),
                )
            )

            t0 = time.perf_counter()
            uniform_schedules = [uniform_schedule(n_steps, b) for b in budgets]
            phi_uniform = evaluate_coverage(
                standard.trajectories, uniform_schedules, maps, scenario.basis
            )
            uniform_time = standard_time + time.perf_counter() - t0

            t0 = time.perf_counter()
            prob_schedules = [
                probabilistic_schedule(
                    standard.trajectories[m],
                    maps,
                    budgets[m],
                    seed=derive_seed(config.seed, team_size, trial, 3, budget_idx, m),
                )
                for m in range(team_size)
            ]
            phi_prob = evaluate_coverage(
                standard.trajectories, prob_schedules, maps, scenario.basis
            )
            prob_time = standard_time + time.perf_counter() - t0

            for planner, phi, wall in (
                ("uniform", phi_uniform, uniform_time),
                ("probabilistic", phi_prob, prob_time),
                ("mosse", phi_mosse, mosse_time),
            ):
                error = "" if np.isfinite(phi).all() else "empty measurement pool"
                rows.append(
                    TrialResult(
                        team_size=team_size,
                        trial=trial,
                        seed=trial_seed,
                        planner=planner,
                        budget_percent=pct,
                        phi=tuple(float(v) for v in phi),
                        wall_time=wall,
                        config_hash=chash,
                        error=error,
                    )
                )
        except Exception as exc:
            rows.extend(
                _failure_rows(
                    config,
                    chash,
                    team_size,
                    trial,
                    trial_seed,
                    (pct,),
                    f"{type(exc).__name__}: {exc}",
                )
            )
    return rows, traces


def _run_trial_star(args):
    return run_trial(*args)


def run_experiment(config: BenchConfig, parallel: int = 1) -> BenchResult:
    """Run every (team size, trial) setup and collect per-planner scores.

    Trials are independent and deterministic, so the result is identical
    whatever the worker count; rows come back sorted by (team size, trial,
    budget, planner order).
    """
    jobs = [
        (config, team_size, trial)
        for team_size in config.team_sizes
        for trial in range(config.n_trials)
    ]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(_run_trial_star, jobs))
    else:
        outcomes = [run_trial(*job) for job in jobs]

    rows: list[TrialResult] = []
    traces: list[TraceRow] = []
    for trial_rows, trial_traces in outcomes:
        rows.extend(trial_rows)
        traces.extend(trial_traces)
    planner_order = {name: i for i, name in enumerate(PLANNERS)}
    rows.sort(
        key=lambda r: (r.team_size, r.trial, r.budget_percent, planner_order[r.planner])
    )
    traces.sort(
        key=lambda t: (
            t.team_size,
            t.trial,
            -1.0 if t.budget_percent is None else t.budget_percent,
            t.planner,
        )
    )
    return BenchResult(
        rows=tuple(rows),
        traces=tuple(traces),
        config=config,
        config_hash=config_hash(config),
    )


def aggregate_means(result: BenchResult) -> dict[tuple[str, float, int], float]:
    """Mean score per (planner, budget percent, objective index) over clean rows."""
    sums: dict[tuple[str, float, int], list[float]] = {}
    for row in result.rows:
        if row.error:
            continue
        for obj_idx, value in enumerate(row.phi):
            sums.setdefault((row.planner, row.budget_percent, obj_idx), []).append(value)
    return {key: float(np.mean(values)) for key, values in sums.items()}


def emit_results(result: BenchResult, out_dir) -> dict[str, str]:
    """Write raw per-trial, aggregated, trace, and timing CSVs.

    Everything except timings.csv is bit-identical across reruns of the same
    configuration.
    """
    from pathlib import Path

    if not result.rows:
        raise ValueError("no result rows to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_objectives = result.config.n_objectives
    paths = {
        "results": out / "results.csv",
        "aggregate": out / "aggregate.csv",
        "traces": out / "traces.csv",
        "timings": out / "timings.csv",
    }

    with open(paths["results"], "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["team_size", "trial", "seed", "planner", "budget_percent"]
            + [f"phi_obj{i + 1}" for i in range(n_objectives)]
            + ["error", "config_hash"]
        )
        for row in result.rows:
            writer.writerow(
                [row.team_size, row.trial, row.seed, row.planner, repr(row.budget_percent)]
                + [repr(v) for v in row.phi]
                + [row.error, row.config_hash]
            )

    means = aggregate_means(result)
    budgets = result.config.budgets_percent
    with open(paths["aggregate"], "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["planner"]
            + [
                f"obj{i + 1}_pct{pct:g}"
                for i in range(n_objectives)
                for pct in budgets
            ]
            + ["config_hash"]
        )
        for planner in PLANNERS:
            cells = []
            for i in range(n_objectives):
                for pct in budgets:
                    value = means.get((planner, pct, i))
                    cells.append("" if value is None else repr(value))
            writer.writerow([planner] + cells + [result.config_hash])

    with open(paths["traces"], "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["team_size", "trial", "planner", "budget_percent", "iteration", "objective"]
        )
        for trace in result.traces:
            budget = "" if trace.budget_percent is None else repr(trace.budget_percent)
            for iteration, value in enumerate(trace.objective):
                writer.writerow(
                    [trace.team_size, trace.trial, trace.planner, budget, iteration, repr(value)]
                )

    with open(paths["timings"], "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["team_size", "trial", "planner", "budget_percent", "wall_time_s"])
        for row in result.rows:
            writer.writerow(
                [row.team_size, row.trial, row.planner, repr(row.budget_percent), repr(row.wall_time)]
            )
    return {name: str(path) for name, path in paths.items()}
