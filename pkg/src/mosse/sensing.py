"""Per-sensor measurement schedules, budgets, masking, and sparse coverage metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import (
    BasisConfig,
    SpectralCoefficients,
    Trajectory,
    basis_matrix,
    coefficient_weights,
    ergodic_metric,
)

# A sensor pool below this selected mass cannot be normalized into statistics.
POOL_EPS = 1e-12


class DegenerateScheduleError(ValueError):
    """A sensor pool has (numerically) zero selected measurement mass."""


@dataclass(frozen=True)
class SensingSchedule:
    """Per-sensor measurement decisions over the time grid.

    ``lam`` has shape (n_sensors, n_steps) with entries in [0,1]; continuous
    during optimization, binary after projection. Binary schedules additionally
    satisfy the one-sensor-at-a-time rule (column sums at most 1).
    """

    lam: np.ndarray
    mode: str = "continuous"

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        if lam.ndim != 2:
            raise ValueError("schedule must be a (n_sensors, n_steps) matrix")
        if lam.min() < 0.0 or lam.max() > 1.0:
            raise ValueError("schedule entries must lie in [0, 1]")
        if self.mode not in ("continuous", "binary"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "binary":
            if not np.isin(lam, (0.0, 1.0)).all():
                raise ValueError("binary schedule entries must be 0 or 1")
            if (lam.sum(axis=0) > 1.0).any():
                raise ValueError("binary schedule uses more than one sensor at a time")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @property
    def n_sensors(self) -> int:
        return self.lam.shape[0]

    @property
    def n_steps(self) -> int:
        return self.lam.shape[1]

    def measurement_counts(self) -> np.ndarray:
        return self.lam.sum(axis=1)


@dataclass(frozen=True)
class SensorMask:
    """Which sensors each agent carries; (n_agents, n_sensors) boolean matrix."""

    onboard: np.ndarray

    def __post_init__(self):
        onboard = np.array(self.onboard, dtype=bool)
        if onboard.ndim != 2:
            raise ValueError("mask must be a (n_agents, n_sensors) matrix")
        if not onboard.any(axis=1).all():
            raise ValueError("every agent must carry at least one sensor")
        if not onboard.any(axis=0).all():
            raise ValueError("every sensor must be onboard at least one agent")
        onboard.setflags(write=False)
        object.__setattr__(self, "onboard", onboard)

    @property
    def n_agents(self) -> int:
        return self.onboard.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.onboard.shape[1]

    @classmethod
    def homogeneous(cls, n_agents: int, n_sensors: int) -> "SensorMask":
        """Every agent carries the full sensor suite."""
        return cls(np.ones((n_agents, n_sensors), dtype=bool))

    @classmethod
    def cyclic(cls, n_agents: int, n_sensors: int) -> "SensorMask":
        """Heterogeneous default: agent m carries only sensor m mod n_sensors."""
        onboard = np.zeros((n_agents, n_sensors), dtype=bool)
        onboard[np.arange(n_agents), np.arange(n_agents) % n_sensors] = True
        return cls(onboard)


@dataclass(frozen=True)
class Budget:
    """Exact per-sensor measurement counts for one agent."""

    per_sensor: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(b) for b in self.per_sensor)
        if not counts:
            raise ValueError("budget must cover at least one sensor")
        if any(b < 0 for b in counts):
            raise ValueError("budgets must be nonnegative")
        object.__setattr__(self, "per_sensor", counts)

    @property
    def total(self) -> int:
        return sum(self.per_sensor)

    @classmethod
    def from_percent(cls, percent: float, n_steps: int, onboard=None) -> "Budget":
        """Budget for one agent from a sensing-budget percentage.

        The percentage is the fraction of the agent's time steps spent
        measuring with any sensor (one sensor at a time); the resulting count
        is split evenly across the onboard sensors, remainder to the
        lowest-index ones. ``onboard`` defaults to a single sensor.
        """
        if not 0.0 <= percent <= 100.0:
            raise ValueError("budget percent must lie in [0, 100]")
        if n_steps < 1:
            raise ValueError("n_steps must be positive")
        mask = np.ones(1, dtype=bool) if onboard is None else np.asarray(onboard, dtype=bool)
        active = np.flatnonzero(mask)
        if active.size == 0:
            raise ValueError("at least one onboard sensor required")
        total = int(math.floor(percent / 100.0 * n_steps + 0.5))
        base, remainder = divmod(total, active.size)
        counts = np.zeros(mask.size, dtype=int)
        counts[active] = base
        counts[active[:remainder]] += 1
        return cls(tuple(counts))


def pooled_coefficients(F: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Per-sensor spectral statistics pooled over agents and time.

    Args:
        F: (n_agents, n_steps, n_modes) basis evaluations along each path.
        lam: (n_agents, n_sensors, n_steps) nonnegative selection weights.

    Returns:
        (n_sensors, n_modes) statistics, each pool normalized by its total
        selected mass.
    """
    mass = lam.sum(axis=(0, 2))
    if (mass <= POOL_EPS).any():
        empty = int(np.argmin(mass))
        raise DegenerateScheduleError(f"sensor {empty} selects zero measurement mass")
    weighted = np.einsum("mit,mtk->ik", lam, F)
    return weighted / mass[:, None]


def sparse_time_average_coeffs(
    traj: Trajectory, lam, cfg: BasisConfig
) -> SpectralCoefficients:
    """Selection-weighted spectral statistics of a single trajectory.

    ``lam`` is one sensor's decision vector over the time grid; the statistics
    are the lam-weighted basis average normalized by the selected mass.
    """
    weights = np.asarray(lam, dtype=float).ravel()
    if weights.shape != (traj.n_steps,):
        raise ValueError("decision vector length must match the trajectory")
    if weights.min() < 0.0:
        raise ValueError("decision values must be nonnegative")
    F = basis_matrix(traj.states, cfg)
    values = pooled_coefficients(F[None], weights[None, None])[0]
    return SpectralCoefficients(values, coefficient_weights(cfg), cfg)


def sparse_ergodic_metric(
    traj: Trajectory,
    lam,
    xi: SpectralCoefficients,
    cfg: BasisConfig,
    l1_weight: float = 1.0,
) -> float:
    """Coverage error of the selected measurements plus an L1 sparsity penalty."""
    c = sparse_time_average_coeffs(traj, lam, cfg)
    penalty = float(np.abs(np.asarray(lam, dtype=float)).sum())
    return ergodic_metric(c, xi) + l1_weight * penalty


def _stack_team(trajs, schedules, mask: SensorMask):
    trajs = list(trajs)
    schedules = list(schedules)
    if len(trajs) != mask.n_agents or len(schedules) != mask.n_agents:
        raise ValueError("one trajectory and one schedule per agent required")
    n_steps = trajs[0].n_steps
    for traj, sched in zip(trajs, schedules):
        if traj.n_steps != n_steps or sched.n_steps != n_steps:
            raise ValueError("trajectories and schedules must share the horizon")
        if sched.n_sensors != mask.n_sensors:
            raise ValueError("schedule sensor count must match the mask")
    lam = np.stack([s.lam for s in schedules])
    offboard = ~mask.onboard
    if (lam.sum(axis=2)[offboard] > 0.0).any():
        raise ValueError("schedule has mass on a sensor not onboard its agent")
    return trajs, lam


def mosse_metric_terms(
    trajs,
    schedules,
    xis,
    xi_combined: SpectralCoefficients,
    mask: SensorMask,
    l1_weight: float = 0.1,
) -> tuple[float, float, float]:
    """The three objective terms: per-sensor coverage, sparsity penalty, team coverage.

    The per-sensor term pools every agent's selected measurements for sensor i
    into one set of statistics compared against objective i; the team term
    compares the plain pooled trajectory statistics against the combined map.
    """
    xis = list(xis)
    if len(xis) != mask.n_sensors:
        raise ValueError("one objective coefficient set per sensor required")
    basis = xi_combined.basis
    for xi in xis:
        if xi.basis != basis or not np.array_equal(xi.weights, xi_combined.weights):
            raise ValueError("objective coefficients must share basis and weights")
    trajs, lam = _stack_team(trajs, schedules, mask)

    F = np.stack([basis_matrix(t.states, basis) for t in trajs])
    alpha = xi_combined.weights

    pooled = pooled_coefficients(F, lam)
    xi_values = np.stack([xi.values for xi in xis])
    diff = pooled - xi_values
    per_sensor = float((alpha[None, :] * diff * diff).sum())

    penalty = l1_weight * float(lam.sum())

    c_all = F.mean(axis=(0, 1))
    dall = c_all - xi_combined.values
    team = float((alpha * dall * dall).sum())
    return per_sensor, penalty, team


def mosse_metric(
    trajs,
    schedules,
    xis,
    xi_combined: SpectralCoefficients,
    mask: SensorMask,
    l1_weight: float = 0.1,
) -> float:
    """Joint multi-objective sparse-sensing coverage objective (sum of the three terms)."""
    return sum(mosse_metric_terms(trajs, schedules, xis, xi_combined, mask, l1_weight))


def project_budget(sched: SensingSchedule, budget: Budget) -> SensingSchedule:
    """Round a continuous schedule to exact budgets under the one-sensor rule.

    Greedy selection over all (sensor, time) pairs by descending decision value
    (ties: earlier time, then lower sensor index); a pair is accepted iff the
    sensor has remaining budget and the time slot is still free. Each sensor
    ends with exactly its budgeted count.
    """
    if sched.mode != "continuous":
        raise ValueError("projection expects a continuous schedule")
    n_sensors, n_steps = sched.lam.shape
    if len(budget.per_sensor) != n_sensors:
        raise ValueError("budget must cover every sensor")
    if budget.total > n_steps:
        raise ValueError(
            f"infeasible budget: {budget.total} measurements for {n_steps} time slots"
        )
    flat = sched.lam.ravel()
    sensor_idx = np.repeat(np.arange(n_sensors), n_steps)
    time_idx = np.tile(np.arange(n_steps), n_sensors)
    order = np.lexsort((sensor_idx, time_idx, -flat))

    out = np.zeros((n_sensors, n_steps))
    remaining = list(budget.per_sensor)
    slot_free = np.ones(n_steps, dtype=bool)
    to_fill = budget.total
    for flat_pos in order:
        if to_fill == 0:
            break
        i = sensor_idx[flat_pos]
        t = time_idx[flat_pos]
        if remaining[i] > 0 and slot_free[t]:
            out[i, t] = 1.0
            remaining[i] -= 1
            slot_free[t] = False
            to_fill -= 1
    return SensingSchedule(out, mode="binary")


def apply_mask(sched: SensingSchedule, mask: SensorMask, agent: int) -> SensingSchedule:
    """Zero the schedule rows for sensors the agent does not carry."""
    if not 0 <= agent < mask.n_agents:
        raise ValueError(f"agent index {agent} out of range")
    if sched.n_sensors != mask.n_sensors:
        raise ValueError("schedule sensor count must match the mask")
    lam = sched.lam.copy()
    lam[~mask.onboard[agent]] = 0.0
    return SensingSchedule(lam, mode=sched.mode)


def schedule_to_csv(sched: SensingSchedule) -> str:
    """Serialize as comma-separated rows with a leading sensor_id column."""
    header = "sensor_id," + ",".join(f"t{t}" for t in range(sched.n_steps))
    lines = [header]
    for i, row in enumerate(sched.lam):
        lines.append(f"{i}," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def schedule_from_csv(text: str, mode: str) -> SensingSchedule:
    """Parse the serialization produced by :func:`schedule_to_csv`."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError("schedule text must contain a header and at least one row")
    rows = []
    for expected_id, line in enumerate(lines[1:]):
        cells = line.split(",")
        if int(cells[0]) != expected_id:
            raise ValueError(f"unexpected sensor_id {cells[0]!r} on row {expected_id}")
        rows.append([float(v) for v in cells[1:]])
    return SensingSchedule(np.array(rows), mode=mode)
