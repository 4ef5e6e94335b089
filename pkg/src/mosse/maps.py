"""Objective maps on the unit square: synthesis, combination, and weight selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# All normalized maps produced by this module integrate to 1 within this tolerance.
NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class ObjectiveMap:
    """Nonnegative information density on a regular grid over [0,1]^2.

    The grid is row-major with rows indexing y and columns indexing x:
    cell (iy, ix) is centered at ((ix+0.5)/nx, (iy+0.5)/ny).
    """

    grid: np.ndarray
    name: str = ""

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        if grid.ndim != 2 or grid.shape[0] < 2 or grid.shape[1] < 2:
            raise ValueError("map grid must be 2-D with at least 2 cells per axis")
        if not np.all(np.isfinite(grid)):
            raise ValueError("map grid must be finite")
        if (grid < 0).any():
            raise ValueError("map grid must be nonnegative")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def nx(self) -> int:
        return self.grid.shape[1]

    @property
    def ny(self) -> int:
        return self.grid.shape[0]

    @property
    def resolution(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return 1.0 / (self.nx * self.ny)

    def integral(self) -> float:
        """Midpoint-rule integral of the map over the unit square."""
        return float(self.grid.sum() * self.cell_area)

    def is_normalized(self, tol: float = NORMALIZATION_TOL) -> bool:
        return abs(self.integral() - 1.0) <= tol

    def normalized(self, name: str | None = None) -> "ObjectiveMap":
        total = self.integral()
        if total <= 0.0:
            raise ValueError("cannot normalize a map with zero total mass")
        return ObjectiveMap(self.grid / total, name=self.name if name is None else name)

    def cell_points(self) -> np.ndarray:
        """Cell centers as an (nx*ny, 2) array matching ``grid.ravel()`` order."""
        xs = (np.arange(self.nx) + 0.5) / self.nx
        ys = (np.arange(self.ny) + 0.5) / self.ny
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def value_at(self, point) -> float:
        """Value of the cell containing ``point`` (nearest-cell lookup)."""
        x, y = float(point[0]), float(point[1])
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise ValueError(f"point {(x, y)} outside the unit square")
        ix = min(int(x * self.nx), self.nx - 1)
        iy = min(int(y * self.ny), self.ny - 1)
        return float(self.grid[iy, ix])


@dataclass(frozen=True)
class WeightVector:
    """Convex combination weights over the objectives (nonnegative, sum to 1)."""

    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) == 0:
            raise ValueError("weight vector must be nonempty")
        if any(v < 0.0 for v in w):
            raise ValueError("weights must be nonnegative")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.array(self.weights)


def synth_gaussian_map(peaks, resolution, name: str = "gaussians") -> ObjectiveMap:
    """Sum of isotropic Gaussian bumps, normalized to integrate to 1.

    Args:
        peaks: iterable of ((cx, cy), sigma, amplitude) with centers in [0,1]^2,
            sigma > 0 and amplitude > 0.
        resolution: (nx, ny) grid size.
    """
    peaks = list(peaks)
    if not peaks:
        raise ValueError("at least one Gaussian peak is required")
    nx, ny = int(resolution[0]), int(resolution[1])
    xs = (np.arange(nx) + 0.5) / nx
    ys = (np.arange(ny) + 0.5) / ny
    gx, gy = np.meshgrid(xs, ys)
    grid = np.zeros((ny, nx))
    for center, sigma, amplitude in peaks:
        cx, cy = float(center[0]), float(center[1])
        if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0):
            raise ValueError(f"peak center {(cx, cy)} outside the unit square")
        if sigma <= 0.0 or amplitude <= 0.0:
            raise ValueError("sigma and amplitude must be positive")
        grid += amplitude * np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2.0 * sigma**2))
    return ObjectiveMap(grid, name=name).normalized()


def scalarize(maps, w: WeightVector) -> ObjectiveMap:
    """Cellwise weighted sum of normalized maps, renormalized to integrate to 1."""
    maps = list(maps)
    if len(maps) != len(w):
        raise ValueError(f"{len(w)} weights for {len(maps)} maps")
    resolution = maps[0].resolution
    for m in maps:
        if m.resolution != resolution:
            raise ValueError("maps must share resolution")
        if not m.is_normalized():
            raise ValueError(f"map {m.name!r} is not normalized")
    combined = np.zeros_like(maps[0].grid)
    for weight, m in zip(w.weights, maps):
        combined = combined + weight * m.grid
    return ObjectiveMap(combined, name="scalarized").normalized()


def weight_grid(n_objectives: int, steps: int) -> list[WeightVector]:
    """All simplex lattice weightings with denominator ``steps``.

    Returns C(steps + n_objectives - 1, n_objectives - 1) vectors in a fixed
    deterministic order.
    """
    if n_objectives < 1 or steps < 1:
        raise ValueError("n_objectives and steps must be at least 1")

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    return [
        WeightVector(tuple(c / steps for c in comp))
        for comp in compositions(steps, n_objectives)
    ]


def topsis_scores(criteria: np.ndarray) -> np.ndarray:
    """TOPSIS closeness coefficients for a cost matrix (rows = candidates).

    Columns are vector-normalized, the ideal point is the columnwise minimum
    (costs) and the anti-ideal the columnwise maximum; the score of a row is
    d_anti / (d_ideal + d_anti). Degenerate rows with zero distance to both
    points score 0.
    """
    crit = np.asarray(criteria, dtype=float)
    if crit.ndim != 2 or crit.shape[0] < 1 or crit.shape[1] < 1:
        raise ValueError("criteria must be a nonempty 2-D matrix")
    if not np.all(np.isfinite(crit)):
        raise ValueError("criteria must be finite")
    norms = np.sqrt((crit**2).sum(axis=0))
    norms[norms == 0.0] = 1.0
    scaled = crit / norms
    ideal = scaled.min(axis=0)
    anti = scaled.max(axis=0)
    d_ideal = np.sqrt(((scaled - ideal) ** 2).sum(axis=1))
    d_anti = np.sqrt(((scaled - anti) ** 2).sum(axis=1))
    denom = d_ideal + d_anti
    scores = np.zeros(crit.shape[0])
    np.divide(d_anti, denom, out=scores, where=denom > 0.0)
    return scores


def topsis_select(candidates, criteria) -> WeightVector:
    """Pick the candidate with the highest closeness coefficient.

    ``criteria`` row r scores candidate r on each objective as a cost (lower is
    better). Ties are broken by the lowest candidate index.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate list must be nonempty")
    crit = np.asarray(criteria, dtype=float)
    if crit.shape[0] != len(candidates):
        raise ValueError("one criteria row per candidate required")
    scores = topsis_scores(crit)
    return candidates[int(np.argmax(scores))]


def save_map(objective: ObjectiveMap, path) -> None:
    """Write a map as ``nx,ny`` header plus ny comma-separated rows of nx values."""
    lines = [f"{objective.nx},{objective.ny}"]
    for row in objective.grid:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_map(path, name: str | None = None) -> ObjectiveMap:
    """Read a map written by :func:`save_map`; rejects negative values."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty map file")
    try:
        nx, ny = (int(tok) for tok in lines[0].split(","))
    except ValueError as exc:
        raise ValueError(f"{path}: malformed header {lines[0]!r}") from exc
    rows = lines[1:]
    if len(rows) != ny:
        raise ValueError(f"{path}: expected {ny} rows, found {len(rows)}")
    grid = np.empty((ny, nx))
    for iy, row in enumerate(rows):
        values = row.split(",")
        if len(values) != nx:
            raise ValueError(f"{path}: row {iy} has {len(values)} values, expected {nx}")
        grid[iy] = [float(v) for v in values]
    if (grid < 0).any():
        raise ValueError(f"{path}: map contains negative values")
    return ObjectiveMap(grid, name=name if name is not None else str(path))
