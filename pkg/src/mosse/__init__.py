"""Coverage planning with sparse per-sensor measurement schedules over multiple objectives."""

from .baselines import (
    evaluate_coverage,
    plan_standard_ergodic,
    probabilistic_schedule,
    uniform_schedule,
)
from .bench import BenchConfig, BenchResult, TrialResult, emit_results, pilot_scores, run_experiment
from .geo import Dem, SunVector, raycast_shade, slope_objective, sobel_slope, threshold_entropy
from .maps import (
    ObjectiveMap,
    WeightVector,
    load_map,
    save_map,
    scalarize,
    synth_gaussian_map,
    topsis_select,
    weight_grid,
)
from .sensing import (
    Budget,
    DegenerateScheduleError,
    SensingSchedule,
    SensorMask,
    apply_mask,
    mosse_metric,
    project_budget,
    sparse_ergodic_metric,
    sparse_time_average_coeffs,
)
from .solver import (
    DynamicsModel,
    PlanResult,
    SolverConfig,
    SolverError,
    TeamScenario,
    build_scenario,
    initialize,
    mosse_gradient,
    read_plan,
    rollout,
    solve,
    write_plan,
)
from .spectral import (
    BasisConfig,
    SpectralCoefficients,
    Trajectory,
    coefficient_weights,
    ergodic_metric,
    evaluate_basis,
    map_coefficients,
    trajectory_coefficients,
)

__version__ = "0.1.0"
