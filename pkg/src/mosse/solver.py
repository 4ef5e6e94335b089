"""Joint first-order optimization of agent controls and continuous sensing decisions.

Projected gradient descent with Armijo backtracking over the stacked decision
variables (per-agent control sequences and per-sensor decision vectors).
Controls are projected onto the speed ball, decisions clipped to [0,1] with
off-board sensor rows frozen at zero; the continuous schedule is rounded to
exact budgets once the descent terminates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .maps import ObjectiveMap, WeightVector, scalarize
from .sensing import (
    POOL_EPS,
    Budget,
    DegenerateScheduleError,
    SensingSchedule,
    SensorMask,
    project_budget,
    schedule_from_csv,
    schedule_to_csv,
)
from .spectral import (
    BasisConfig,
    Trajectory,
    basis_gradient,
    basis_matrix,
    coefficient_weights,
    map_coefficients,
)


class SolverError(RuntimeError):
    """The descent could not produce a usable plan."""


@dataclass(frozen=True)
class DynamicsModel:
    """Single-integrator agent: next = clamp(state + dt * control), |control| <= u_max."""

    kind: str = "single_integrator"
    u_max: float = 1.0
    dt: float = 0.1

    def __post_init__(self):
        if self.kind != "single_integrator":
            raise ValueError(f"unsupported dynamics kind {self.kind!r}")
        if self.u_max <= 0.0 or self.dt <= 0.0:
            raise ValueError("u_max and dt must be positive")


@dataclass(frozen=True)
class SolverConfig:
    """First-order solver settings; defaults size a 3-objective solve to seconds."""

    max_iters: int = 300
    step_size: float = 0.1
    backtrack: float = 0.5
    armijo: float = 1e-4
    tol: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.step_size <= 0.0 or not 0.0 < self.backtrack < 1.0:
            raise ValueError("step_size must be positive and backtrack in (0,1)")
        if self.armijo <= 0.0 or self.tol <= 0.0:
            raise ValueError("armijo and tol must be positive")


@dataclass(frozen=True)
class TeamScenario:
    """Everything one planning problem needs: maps, agents, budgets, dynamics."""

    maps: tuple[ObjectiveMap, ...]  # one normalized objective map per sensor
    combined_map: ObjectiveMap  # scalarized target for the trajectory term
    starts: np.ndarray  # (n_agents, 2) initial positions in the unit square
    mask: SensorMask
    budgets: tuple[Budget, ...]  # one per agent
    dynamics: DynamicsModel
    horizon: int  # number of control steps; horizon+1 states
    basis: BasisConfig
    l1_weight: float = 0.1
    seed: int = 0

    def __post_init__(self):
        maps = tuple(self.maps)
        budgets = tuple(self.budgets)
        starts = np.array(self.starts, dtype=float)
        if starts.ndim != 2 or starts.shape[1] != 2:
            raise ValueError("starts must be an (n_agents, 2) array")
        if starts.min() < 0.0 or starts.max() > 1.0:
            raise ValueError("start positions must lie in the unit square")
        if len(maps) != self.mask.n_sensors:
            raise ValueError("one objective map per sensor required")
        if starts.shape[0] != self.mask.n_agents or len(budgets) != self.mask.n_agents:
            raise ValueError("starts and budgets must cover every agent")
        for budget in budgets:
            if len(budget.per_sensor) != self.mask.n_sensors:
                raise ValueError("budgets must cover every sensor")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.l1_weight < 0.0:
            raise ValueError("l1_weight must be nonnegative")
        starts.setflags(write=False)
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "budgets", budgets)
        object.__setattr__(self, "starts", starts)

    @property
    def n_agents(self) -> int:
        return self.mask.n_agents

    @property
    def n_sensors(self) -> int:
        return self.mask.n_sensors

    @property
    def n_steps(self) -> int:
        return self.horizon + 1


def build_scenario(
    maps,
    starts,
    budget_percent: float,
    mask: SensorMask | None = None,
    combined_map: ObjectiveMap | None = None,
    dynamics: DynamicsModel | None = None,
    horizon: int = 256,
    basis: BasisConfig | None = None,
    l1_weight: float = 0.1,
    seed: int = 0,
) -> TeamScenario:
    """Assemble a TeamScenario with per-agent budgets derived from a percentage.

    The mask defaults to every agent carrying the full suite, and the combined
    map to the equal-weight scalarization of the objectives.
    """
    maps = tuple(maps)
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if mask is None:
        mask = SensorMask.homogeneous(starts.shape[0], len(maps))
    if combined_map is None:
        combined_map = scalarize(maps, WeightVector((1.0 / len(maps),) * len(maps)))
    if dynamics is None:
        dynamics = DynamicsModel()
    if basis is None:
        basis = BasisConfig()
    budgets = tuple(
        Budget.from_percent(budget_percent, horizon + 1, onboard=mask.onboard[m])
        for m in range(mask.n_agents)
    )
    return TeamScenario(
        maps=maps,
        combined_map=combined_map,
        starts=starts,
        mask=mask,
        budgets=budgets,
        dynamics=dynamics,
        horizon=horizon,
        basis=basis,
        l1_weight=l1_weight,
        seed=seed,
    )


@dataclass(frozen=True)
class PlanResult:
    """Solver output: trajectories, both schedule forms, and the descent trace."""

    trajectories: tuple[Trajectory, ...]
    continuous_schedules: tuple[SensingSchedule, ...]
    binary_schedules: tuple[SensingSchedule, ...]
    objective_trace: np.ndarray
    final_objective: float

    def __post_init__(self):
        trace = np.array(self.objective_trace, dtype=float)
        trace.setflags(write=False)
        object.__setattr__(self, "objective_trace", trace)
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        object.__setattr__(self, "continuous_schedules", tuple(self.continuous_schedules))
        object.__setattr__(self, "binary_schedules", tuple(self.binary_schedules))


def clip_controls(controls: np.ndarray, u_max: float) -> np.ndarray:
    """Project each control vector onto the L2 ball of radius u_max."""
    speed = np.linalg.norm(controls, axis=-1, keepdims=True)
    scale = np.where(speed > u_max, u_max / np.maximum(speed, 1e-300), 1.0)
    return controls * scale


def rollout(x0, controls, model: DynamicsModel) -> Trajectory:
    """Integrate the single integrator from x0, clamping states to the unit box."""
    start = np.asarray(x0, dtype=float).ravel()
    if start.min() < 0.0 or start.max() > 1.0:
        raise ValueError("start position must lie in the unit box")
    u = clip_controls(np.atleast_2d(np.asarray(controls, dtype=float)), model.u_max)
    states, _ = _rollout_arrays(start[None], u[None], model.dt)
    return Trajectory(states[0], u, dt=model.dt)


def _rollout_arrays(starts: np.ndarray, controls: np.ndarray, dt: float):
    """Batched rollout; returns states (M, T+1, d) and a per-step free mask.

    free[m, t+1, j] is False where the step was clamped at the box boundary, in
    which case the partial derivative through that step is zero.
    """
    n_agents, horizon, dims = controls.shape
    states = np.empty((n_agents, horizon + 1, dims))
    free = np.ones((n_agents, horizon + 1, dims), dtype=bool)
    x = starts.copy()
    states[:, 0] = x
    for t in range(horizon):
        raw = x + dt * controls[:, t]
        free[:, t + 1] = (raw >= 0.0) & (raw <= 1.0)
        x = np.clip(raw, 0.0, 1.0)
        states[:, t + 1] = x
    return states, free


class _CompiledProblem:
    """Scenario folded into flat arrays for fast objective/gradient evaluation."""

    def __init__(self, scenario: TeamScenario, optimize_sensing: bool = True):
        self.scenario = scenario
        self.optimize_sensing = optimize_sensing
        self.basis = scenario.basis
        self.alpha = coefficient_weights(scenario.basis)
        self.xis = np.stack(
            [map_coefficients(m, scenario.basis).values for m in scenario.maps]
        )
        self.xi_comb = map_coefficients(scenario.combined_map, scenario.basis).values
        self.onboard = scenario.mask.onboard.astype(float)
        self.l1 = scenario.l1_weight
        self.dt = scenario.dynamics.dt
        self.u_max = scenario.dynamics.u_max
        self.n_steps = scenario.n_steps

    def _basis_values(self, states: np.ndarray) -> np.ndarray:
        n_agents, n_steps, dims = states.shape
        flat = basis_matrix(states.reshape(-1, dims), self.basis)
        return flat.reshape(n_agents, n_steps, -1)

    def objective(self, controls: np.ndarray, lam: np.ndarray) -> float:
        """Objective value; +inf when a sensor pool degenerates."""
        states, _ = _rollout_arrays(self.scenario.starts, controls, self.dt)
        F = self._basis_values(states)
        c_all = F.mean(axis=(0, 1))
        dall = c_all - self.xi_comb
        value = float((self.alpha * dall * dall).sum())
        if not self.optimize_sensing:
            return value
        mass = lam.sum(axis=(0, 2))
        if (mass <= POOL_EPS).any():
            return math.inf
        pooled = np.einsum("mit,mtk->ik", lam, F) / mass[:, None]
        diff = pooled - self.xis
        value += float((self.alpha[None, :] * diff * diff).sum())
        value += self.l1 * float(lam.sum())
        return value

    def objective_and_grad(self, controls: np.ndarray, lam: np.ndarray):
        """Objective with gradients in the controls and the decision variables."""
        n_agents, horizon, dims = controls.shape
        states, free = _rollout_arrays(self.scenario.starts, controls, self.dt)
        flat_states = states.reshape(-1, dims)
        F = basis_matrix(flat_states, self.basis).reshape(n_agents, self.n_steps, -1)
        dF = basis_gradient(flat_states, self.basis).reshape(
            n_agents, self.n_steps, -1, dims
        )

        c_all = F.mean(axis=(0, 1))
        dall = c_all - self.xi_comb
        value = float((self.alpha * dall * dall).sum())
        e_all = 2.0 * self.alpha * dall
        g_states = np.einsum("k,mtkd->mtd", e_all, dF) / (n_agents * self.n_steps)

        grad_lam = np.zeros_like(lam)
        if self.optimize_sensing:
            mass = lam.sum(axis=(0, 2))
            if (mass <= POOL_EPS).any():
                raise DegenerateScheduleError("gradient undefined for an empty sensor pool")
            pooled = np.einsum("mit,mtk->ik", lam, F) / mass[:, None]
            diff = pooled - self.xis
            value += float((self.alpha[None, :] * diff * diff).sum())
            value += self.l1 * float(lam.sum())

            err = 2.0 * self.alpha[None, :] * diff  # (N, K)
            # d pooled_ik / d lam_mit = (F_mtk - pooled_ik) / mass_i
            proj = np.einsum("mtk,ik->mit", F, err)
            base = (err * pooled).sum(axis=1)
            grad_lam = (proj - base[None, :, None]) / mass[None, :, None] + self.l1
            grad_lam *= self.onboard[:, :, None]  # freeze off-board rows

            sens = np.einsum("mit,ik->mtk", lam / mass[None, :, None], err)
            g_states += np.einsum("mtk,mtkd->mtd", sens, dF)

        # chain back through the clamped integrator
        grad_u = np.empty_like(controls)
        carry = g_states[:, horizon]
        for t in range(horizon - 1, -1, -1):
            gated = np.where(free[:, t + 1], carry, 0.0)
            grad_u[:, t] = self.dt * gated
            carry = g_states[:, t] + gated
        return value, grad_u, grad_lam


def initialize(scenario: TeamScenario, seed) -> tuple[np.ndarray, np.ndarray]:
    """Seeded starting point: small random controls, decisions at the budget fraction.

    ``seed`` is either one integer (agent m then draws from the substream
    [seed, m]) or a sequence of per-agent seeds; identical agents with permuted
    seeds therefore produce permuted initializations.
    """
    n_agents = scenario.n_agents
    if np.isscalar(seed):
        agent_seeds = [[int(seed), m] for m in range(n_agents)]
    else:
        agent_seeds = [[int(s)] for s in seed]
        if len(agent_seeds) != n_agents:
            raise ValueError("need one seed per agent")
    controls = np.empty((n_agents, scenario.horizon, 2))
    span = 0.1 * scenario.dynamics.u_max
    for m in range(n_agents):
        rng = np.random.default_rng(agent_seeds[m])
        controls[m] = rng.uniform(-span, span, size=(scenario.horizon, 2))
    lam = _budget_fraction_schedule(scenario)
    return controls, lam


def _budget_fraction_schedule(scenario: TeamScenario) -> np.ndarray:
    lam = np.zeros((scenario.n_agents, scenario.n_sensors, scenario.n_steps))
    for m, budget in enumerate(scenario.budgets):
        for i, count in enumerate(budget.per_sensor):
            if scenario.mask.onboard[m, i]:
                lam[m, i, :] = count / scenario.n_steps
    return lam


def _clip_schedule(lam: np.ndarray, onboard: np.ndarray) -> np.ndarray:
    clipped = np.clip(lam, 0.0, 1.0)
    clipped *= onboard[:, :, None]
    return clipped


def mosse_objective(controls, lam, scenario: TeamScenario) -> float:
    """Joint objective at raw decision variables (controls not re-clipped)."""
    return _CompiledProblem(scenario).objective(
        np.asarray(controls, dtype=float), np.asarray(lam, dtype=float)
    )


def mosse_gradient(controls, lam, scenario: TeamScenario):
    """Analytic gradient of the joint objective.

    Returns (grad_controls, grad_lam) of the same shapes as the inputs.
    Off-board decision rows are frozen variables and report zero gradient;
    clamped rollout steps contribute zero partials.
    """
    problem = _CompiledProblem(scenario)
    _, grad_u, grad_lam = problem.objective_and_grad(
        np.asarray(controls, dtype=float), np.asarray(lam, dtype=float)
    )
    return grad_u, grad_lam


def solve(
    scenario: TeamScenario,
    cfg: SolverConfig | None = None,
    optimize_sensing: bool = True,
) -> PlanResult:
    """Projected-gradient descent on controls and sensing decisions.

    Steps are accepted by Armijo backtracking, so the objective trace is
    nonincreasing; on convergence or the iteration cap the continuous schedule
    is rounded to exact budgets. With ``optimize_sensing=False`` only the
    team-coverage term is optimized and the decision variables stay at their
    initialization.
    """
    cfg = cfg or SolverConfig()
    for m, budget in enumerate(scenario.budgets):
        if budget.total > scenario.n_steps:
            raise ValueError(
                f"agent {m}: budget {budget.total} exceeds {scenario.n_steps} time slots"
            )
    problem = _CompiledProblem(scenario, optimize_sensing=optimize_sensing)
    controls, lam = initialize(scenario, cfg.seed)
    controls = clip_controls(controls, scenario.dynamics.u_max)
    lam = _clip_schedule(lam, scenario.mask.onboard)

    value = problem.objective(controls, lam)
    if not math.isfinite(value):
        # one retry from the canonical budget-fraction decisions
        lam = _budget_fraction_schedule(scenario)
        value = problem.objective(controls, lam)
        if not math.isfinite(value):
            raise SolverError("objective is non-finite at the budget-fraction start")
    trace = [value]

    for _ in range(cfg.max_iters):
        _, grad_u, grad_lam = problem.objective_and_grad(controls, lam)
        if not optimize_sensing:
            grad_lam = np.zeros_like(lam)
        step = cfg.step_size
        accepted = False
        while step > 1e-16:
            new_controls = clip_controls(controls - step * grad_u, scenario.dynamics.u_max)
            new_lam = _clip_schedule(lam - step * grad_lam, scenario.mask.onboard)
            decrease = float(
                (grad_u * (new_controls - controls)).sum()
                + (grad_lam * (new_lam - lam)).sum()
            )
            candidate = problem.objective(new_controls, new_lam)
            if math.isfinite(candidate) and candidate <= value + cfg.armijo * decrease:
                accepted = True
                break
            step *= cfg.backtrack
        if not accepted:
            break
        moved = float(
            np.abs(new_controls - controls).max() + np.abs(new_lam - lam).max()
        )
        previous, value = value, candidate
        controls, lam = new_controls, new_lam
        trace.append(value)
        if moved == 0.0:
            break
        if previous - value <= cfg.tol * max(abs(previous), 1e-30):
            break

    states, _ = _rollout_arrays(scenario.starts, controls, scenario.dynamics.dt)
    trajectories = tuple(
        Trajectory(states[m], controls[m], dt=scenario.dynamics.dt)
        for m in range(scenario.n_agents)
    )
    continuous = tuple(SensingSchedule(lam[m], "continuous") for m in range(scenario.n_agents))
    binary = tuple(
        project_budget(continuous[m], scenario.budgets[m])
        for m in range(scenario.n_agents)
    )
    return PlanResult(
        trajectories=trajectories,
        continuous_schedules=continuous,
        binary_schedules=binary,
        objective_trace=np.array(trace),
        final_objective=float(trace[-1]),
    )


# --- plan file serialization -------------------------------------------------

_PLAN_MAGIC = "mosse-plan 1"


def write_plan(result: PlanResult, path) -> None:
    """Serialize a plan as a sectioned text document (round-trips via read_plan)."""
    lines = [_PLAN_MAGIC]
    lines.append(f"agents {len(result.trajectories)}")
    lines.append(f"sensors {result.continuous_schedules[0].n_sensors}")
    lines.append(f"steps {result.trajectories[0].n_steps}")
    lines.append(f"dt {result.trajectories[0].dt!r}")
    lines.append(f"final_objective {result.final_objective!r}")
    lines.append("objective_trace")
    for v in result.objective_trace:
        lines.append(repr(float(v)))
    for m, traj in enumerate(result.trajectories):
        lines.append(f"agent {m}")
        lines.append("states")
        for row in traj.states:
            lines.append(",".join(repr(float(v)) for v in row))
        lines.append("controls")
        for row in traj.controls:
            lines.append(",".join(repr(float(v)) for v in row))
        lines.append("schedule continuous")
        lines.append(schedule_to_csv(result.continuous_schedules[m]).rstrip("\n"))
        lines.append("schedule binary")
        lines.append(schedule_to_csv(result.binary_schedules[m]).rstrip("\n"))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_plan(path) -> PlanResult:
    """Parse a plan document written by :func:`write_plan`."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _PLAN_MAGIC:
        raise ValueError(f"{path}: not a plan file")
    header: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and lines[pos] != "objective_trace":
        key, value = lines[pos].split(maxsplit=1)
        header[key] = value
        pos += 1
    n_agents = int(header["agents"])
    n_sensors = int(header["sensors"])
    n_steps = int(header["steps"])
    dt = float(header["dt"])
    final_objective = float(header["final_objective"])

    pos += 1  # skip "objective_trace"
    trace = []
    while pos < len(lines) and not lines[pos].startswith("agent "):
        trace.append(float(lines[pos]))
        pos += 1

    def read_rows(count):
        nonlocal pos
        rows = [[float(v) for v in lines[pos + r].split(",")] for r in range(count)]
        pos += count
        return np.array(rows)

    def read_schedule(mode):
        nonlocal pos
        block = "\n".join(lines[pos : pos + n_sensors + 1])
        pos += n_sensors + 1
        return schedule_from_csv(block, mode=mode)

    trajectories, continuous, binary = [], [], []
    for m in range(n_agents):
        if lines[pos] != f"agent {m}":
            raise ValueError(f"{path}: expected 'agent {m}' section, got {lines[pos]!r}")
        pos += 1
        if lines[pos] != "states":
            raise ValueError(f"{path}: missing states section")
        pos += 1
        states = read_rows(n_steps)
        if lines[pos] != "controls":
            raise ValueError(f"{path}: missing controls section")
        pos += 1
        controls = read_rows(n_steps - 1)
        if lines[pos] != "schedule continuous":
            raise ValueError(f"{path}: missing continuous schedule")
        pos += 1
        continuous.append(read_schedule("continuous"))
        if lines[pos] != "schedule binary":
            raise ValueError(f"{path}: missing binary schedule")
        pos += 1
        binary.append(read_schedule("binary"))
        trajectories.append(Trajectory(states, controls, dt=dt))
    return PlanResult(
        trajectories=tuple(trajectories),
        continuous_schedules=tuple(continuous),
        binary_schedules=tuple(binary),
        objective_trace=np.array(trace),
        final_objective=final_objective,
    )
