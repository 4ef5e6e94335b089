"""Comparison planners: uniform and probabilistic sampling over a standard ergodic plan."""

from __future__ import annotations

import math

import numpy as np

from .sensing import Budget, SensingSchedule
from .solver import PlanResult, SolverConfig, TeamScenario, solve
from .spectral import BasisConfig, basis_matrix, coefficient_weights, map_coefficients


def plan_standard_ergodic(scenario: TeamScenario, cfg: SolverConfig | None = None) -> PlanResult:
    """Optimize the trajectory against the combined map only (no sensing terms).

    Same descent code path as the joint solver with the penalty and per-sensor
    terms switched off; the returned schedules are the untouched initialization
    and its budget projection.
    """
    return solve(scenario, cfg, optimize_sensing=False)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _nearest_free(taken: np.ndarray, t: int) -> int:
    """Closest free slot to t, preferring the forward direction on ties."""
    if not taken[t]:
        return t
    n = len(taken)
    for dist in range(1, n):
        fwd = t + dist
        if fwd < n and not taken[fwd]:
            return fwd
        back = t - dist
        if back >= 0 and not taken[back]:
            return back
    raise ValueError("no free time slot available")


def uniform_schedule(n_steps: int, budget: Budget) -> SensingSchedule:
    """Spread each sensor's measurements evenly over the horizon.

    Sensor i takes slots round(j*(n_steps-1)/(B_i-1)) for j = 0..B_i-1
    (endpoints included; a single measurement lands on the midpoint). Slots
    already claimed by an earlier sensor shift to the nearest free slot,
    forward first.
    """
    if budget.total > n_steps:
        raise ValueError(
            f"infeasible budget: {budget.total} measurements for {n_steps} time slots"
        )
    lam = np.zeros((len(budget.per_sensor), n_steps))
    taken = np.zeros(n_steps, dtype=bool)
    for i, count in enumerate(budget.per_sensor):
        if count == 0:
            continue
        if count == 1:
            targets = [_round_half_up((n_steps - 1) / 2.0)]
        else:
            targets = [
                _round_half_up(j * (n_steps - 1) / (count - 1)) for j in range(count)
            ]
        for t in targets:
            slot = _nearest_free(taken, t)
            lam[i, slot] = 1.0
            taken[slot] = True
    return SensingSchedule(lam, mode="binary")


def probabilistic_schedule(traj, maps, budget: Budget, seed) -> SensingSchedule:
    """Sample measurement slots proportionally to each map's value under the path.

    Sensors claim slots in index order, drawing without replacement from the
    still-free slots with probability proportional to map_i at the trajectory
    state. When fewer free slots have positive probability than the budget, the
    positives are all taken and the remainder is drawn uniformly from the
    remaining free slots.
    """
    maps = list(maps)
    n_steps = traj.n_steps
    n_sensors = len(budget.per_sensor)
    if len(maps) != n_sensors:
        raise ValueError("one map per sensor required")
    if budget.total > n_steps:
        raise ValueError(
            f"infeasible budget: {budget.total} measurements for {n_steps} time slots"
        )
    for m in maps:
        if not m.is_normalized():
            raise ValueError(f"map {m.name!r} is not normalized")
    values = np.array(
        [[m.value_at(state) for state in traj.states] for m in maps]
    )
    rng = np.random.default_rng(seed)
    lam = np.zeros((n_sensors, n_steps))
    taken = np.zeros(n_steps, dtype=bool)
    for i, count in enumerate(budget.per_sensor):
        if count == 0:
            continue
        free = np.flatnonzero(~taken)
        weights = values[i, free]
        positive = weights > 0.0
        if positive.sum() >= count:
            chosen = rng.choice(free, size=count, replace=False, p=weights / weights.sum())
        else:
            chosen = list(free[positive])
            leftover = free[~positive]
            extra = rng.choice(leftover, size=count - len(chosen), replace=False)
            chosen = np.concatenate([chosen, extra]).astype(int) if chosen else extra
        lam[i, chosen] = 1.0
        taken[chosen] = True
    return SensingSchedule(lam, mode="binary")


def evaluate_coverage(trajs, schedules, maps, basis: BasisConfig) -> np.ndarray:
    """Per-objective coverage scores of the selected measurement locations.

    For each objective the pooled statistics of the slots where its sensor
    fired (across all agents) are compared against the objective map. This is
    the common scoreboard for every planner; an objective whose pool is empty
    scores NaN, which callers report as a failure.
    """
    trajs = list(trajs)
    schedules = list(schedules)
    maps = list(maps)
    if len(trajs) != len(schedules):
        raise ValueError("one schedule per trajectory required")
    n_steps = trajs[0].n_steps
    for traj, sched in zip(trajs, schedules):
        if sched.mode != "binary":
            raise ValueError("coverage is evaluated on binary schedules")
        if traj.n_steps != n_steps or sched.n_steps != n_steps:
            raise ValueError("trajectories and schedules must share the horizon")
        if sched.n_sensors != len(maps):
            raise ValueError("schedule sensor count must match the map count")

    alpha = coefficient_weights(basis)
    xi_values = np.stack([map_coefficients(m, basis).values for m in maps])
    F = np.stack([basis_matrix(t.states, basis) for t in trajs])
    lam = np.stack([s.lam for s in schedules])

    scores = np.empty(len(maps))
    for i in range(len(maps)):
        mass = lam[:, i].sum()
        if mass <= 0.0:
            scores[i] = math.nan
            continue
        pooled = np.einsum("mt,mtk->k", lam[:, i], F) / mass
        diff = pooled - xi_values[i]
        scores[i] = float((alpha * diff * diff).sum())
    return scores
