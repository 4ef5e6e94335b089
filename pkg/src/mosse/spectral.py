"""Separable cosine basis on the unit box, spectral statistics, and the coverage metric.

Distributions and trajectories are compared through truncated cosine-series
coefficients. A trajectory's empirical spatial distribution is a train of point
masses, so its coefficients are plain basis-evaluation averages; no grid
binning is involved and everything stays differentiable in the states.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .maps import ObjectiveMap

# Maps fed to map_coefficients must integrate to 1 within this tolerance;
# it also bounds the midpoint-quadrature error budget on coefficients for
# 100x100 grids and smooth maps.
MAP_NORMALIZATION_TOL = 1e-6


@lru_cache(maxsize=None)
def _mode_table(dims: int, modes_per_dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Multi-index array (n_modes, dims) and unit-L2 norms of each basis function."""
    axes = [np.arange(modes_per_dim)] * dims
    mesh = np.meshgrid(*axes, indexing="ij")
    ks = np.stack([m.ravel() for m in mesh], axis=1)
    # integral of cos^2(k pi x) over [0,1] is 1 for k=0 and 1/2 otherwise
    h = np.sqrt(np.where(ks == 0, 1.0, 0.5).prod(axis=1))
    ks.setflags(write=False)
    h.setflags(write=False)
    return ks, h


@dataclass(frozen=True)
class BasisConfig:
    """Truncated cosine basis over [0,1]^dims.

    Every axis carries mode indices 0..modes_per_dim-1, giving
    modes_per_dim**dims multi-indices including the constant mode (0,...,0).
    """

    dims: int = 2
    modes_per_dim: int = 10

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError("dims must be at least 1")
        if self.modes_per_dim < 1:
            raise ValueError("modes_per_dim must be at least 1")

    @property
    def n_modes(self) -> int:
        return self.modes_per_dim**self.dims

    @property
    def mode_indices(self) -> np.ndarray:
        return _mode_table(self.dims, self.modes_per_dim)[0]

    @property
    def norms(self) -> np.ndarray:
        return _mode_table(self.dims, self.modes_per_dim)[1]


@dataclass(frozen=True)
class SpectralCoefficients:
    """Cosine-series coefficients with per-coefficient metric weights."""

    values: np.ndarray
    weights: np.ndarray
    basis: BasisConfig

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        weights = np.array(self.weights, dtype=float)
        expected = (self.basis.n_modes,)
        if values.shape != expected or weights.shape != expected:
            raise ValueError(
                f"coefficient arrays must have shape {expected}, "
                f"got {values.shape} and {weights.shape}"
            )
        if (weights <= 0).any():
            raise ValueError("coefficient weights must be positive")
        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class Trajectory:
    """Time-discretized path through the unit box with its control sequence."""

    states: np.ndarray  # (n_steps, dims), all inside [0,1]^dims
    controls: np.ndarray  # (n_steps - 1, dims)
    dt: float

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        controls = np.array(self.controls, dtype=float)
        if states.ndim != 2 or states.shape[0] < 1:
            raise ValueError("trajectory must contain at least one state")
        if controls.ndim != 2 or controls.shape != (states.shape[0] - 1, states.shape[1]):
            raise ValueError("controls must have one fewer row than states")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if states.min() < 0.0 or states.max() > 1.0:
            raise ValueError("trajectory states must lie in the unit box")
        states.setflags(write=False)
        controls.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "controls", controls)

    @property
    def n_steps(self) -> int:
        return self.states.shape[0]

    @property
    def dims(self) -> int:
        return self.states.shape[1]


def _check_points(points, dims: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != dims:
        raise ValueError(f"points must be {dims}-dimensional, got shape {pts.shape}")
    if pts.min() < 0.0 or pts.max() > 1.0:
        raise ValueError("points must lie inside the unit box")
    return pts


def basis_matrix(points, cfg: BasisConfig) -> np.ndarray:
    """Evaluate every basis function at each point; returns (n_points, n_modes)."""
    pts = _check_points(points, cfg.dims)
    ks, h = _mode_table(cfg.dims, cfg.modes_per_dim)
    return np.cos(np.pi * pts[:, None, :] * ks[None, :, :]).prod(axis=2) / h


def basis_gradient(points, cfg: BasisConfig) -> np.ndarray:
    """Spatial gradients of every basis function; returns (n_points, n_modes, dims)."""
    pts = _check_points(points, cfg.dims)
    ks, h = _mode_table(cfg.dims, cfg.modes_per_dim)
    ang = np.pi * pts[:, None, :] * ks[None, :, :]
    cos = np.cos(ang)
    sin = np.sin(ang)
    grad = np.empty((pts.shape[0], cfg.n_modes, cfg.dims))
    for j in range(cfg.dims):
        others = [axis for axis in range(cfg.dims) if axis != j]
        partial = -np.pi * ks[None, :, j] * sin[:, :, j]
        if others:
            partial = partial * cos[:, :, others].prod(axis=2)
        grad[:, :, j] = partial
    return grad / h[None, :, None]


def evaluate_basis(x, k, cfg: BasisConfig) -> float:
    """Single normalized basis function value at one point.

    Accepts any nonnegative multi-index ``k``; the unit-L2 normalization is
    computed from ``k`` directly.
    """
    point = np.asarray(x, dtype=float).ravel()
    if point.shape != (cfg.dims,):
        raise ValueError(f"point must have {cfg.dims} coordinates")
    if point.min() < 0.0 or point.max() > 1.0:
        raise ValueError(f"point {tuple(point)} outside the unit box")
    idx = np.asarray(k, dtype=int).ravel()
    if idx.shape != (cfg.dims,) or (idx < 0).any():
        raise ValueError("multi-index must be nonnegative with one entry per dim")
    h = np.sqrt(np.where(idx == 0, 1.0, 0.5).prod())
    return float(np.cos(np.pi * idx * point).prod() / h)


def coefficient_weights(cfg: BasisConfig) -> np.ndarray:
    """Sobolev decay weights (1 + |k|^2)^(-(dims+1)/2), positive and nonincreasing in |k|."""
    ks = cfg.mode_indices.astype(float)
    return (1.0 + (ks**2).sum(axis=1)) ** (-(cfg.dims + 1) / 2.0)


def map_coefficients(objective: ObjectiveMap, cfg: BasisConfig) -> SpectralCoefficients:
    """Spectral coefficients of a normalized objective map (midpoint quadrature)."""
    if cfg.dims != 2:
        raise ValueError("objective maps are 2-D; basis dims must be 2")
    if abs(objective.integral() - 1.0) > MAP_NORMALIZATION_TOL:
        raise ValueError(
            f"map {objective.name!r} must integrate to 1, got {objective.integral():.6g}"
        )
    F = basis_matrix(objective.cell_points(), cfg)
    values = F.T @ objective.grid.ravel() * objective.cell_area
    return SpectralCoefficients(values, coefficient_weights(cfg), cfg)


def trajectory_coefficients(traj: Trajectory, cfg: BasisConfig) -> SpectralCoefficients:
    """Spectral statistics of a trajectory: the basis average over its states."""
    F = basis_matrix(traj.states, cfg)
    return SpectralCoefficients(F.mean(axis=0), coefficient_weights(cfg), cfg)


def team_trajectory_coefficients(trajs, cfg: BasisConfig) -> SpectralCoefficients:
    """Pooled spectral statistics of several trajectories of equal length."""
    trajs = list(trajs)
    if not trajs:
        raise ValueError("at least one trajectory required")
    n_steps = trajs[0].n_steps
    if any(t.n_steps != n_steps for t in trajs):
        raise ValueError("trajectories must share their horizon")
    stacked = np.concatenate([t.states for t in trajs], axis=0)
    F = basis_matrix(stacked, cfg)
    return SpectralCoefficients(F.mean(axis=0), coefficient_weights(cfg), cfg)


def ergodic_metric(c: SpectralCoefficients, xi: SpectralCoefficients) -> float:
    """Weighted squared distance between two coefficient sets.

    Zero iff the coefficient arrays are equal; symmetric in its arguments.
    """
    if c.basis != xi.basis:
        raise ValueError("coefficients use different bases")
    if not np.array_equal(c.weights, xi.weights):
        raise ValueError("coefficients use different weights")
    diff = c.values - xi.values
    return float((c.weights * diff * diff).sum())
