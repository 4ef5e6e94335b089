"""Objective maps derived from terrain data: thresholded entropy, shade, and slope."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .maps import ObjectiveMap

# Shaded cells keep a small positive value so scalarized maps never go fully
# degenerate in occluded regions.
SHADE_FLOOR = 0.05


@dataclass(frozen=True)
class Dem:
    """Digital elevation model: elevations in meters on a square-cell grid."""

    elevations: np.ndarray  # (nrows, ncols), rows index y, cols index x
    cell_size: float  # meters per cell

    def __post_init__(self):
        z = np.array(self.elevations, dtype=float)
        if z.ndim != 2 or z.shape[0] < 3 or z.shape[1] < 3:
            raise ValueError("DEM must be at least 3x3")
        if not np.all(np.isfinite(z)):
            raise ValueError("DEM elevations must be finite")
        if self.cell_size <= 0.0:
            raise ValueError("cell_size must be positive")
        z.setflags(write=False)
        object.__setattr__(self, "elevations", z)

    @property
    def shape(self) -> tuple[int, int]:
        return self.elevations.shape


@dataclass(frozen=True)
class SunVector:
    """Illumination direction: azimuth from +x counterclockwise, elevation above horizon."""

    azimuth: float  # radians in [0, 2*pi)
    elevation_angle: float  # radians in (0, pi/2]

    def __post_init__(self):
        if not 0.0 <= self.azimuth < 2.0 * math.pi:
            raise ValueError("azimuth must lie in [0, 2*pi)")
        if not 0.0 < self.elevation_angle <= math.pi / 2.0:
            raise ValueError("elevation_angle must lie in (0, pi/2]")


def threshold_entropy(entropy: ObjectiveMap, fraction: float = 0.75) -> ObjectiveMap:
    """Saturate high-entropy cells and renormalize.

    The grid is first scaled to unit maximum (the final renormalization makes
    this scale-free); cells strictly above ``fraction`` of the maximum are set
    to 1, the rest keep their value, and the result is normalized to integrate
    to 1. Sub-threshold cells therefore keep their relative proportions.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    peak = float(entropy.grid.max())
    if peak <= 0.0:
        raise ValueError("entropy map is identically zero")
    scaled = entropy.grid / peak
    saturated = np.where(scaled > fraction, 1.0, scaled)
    return ObjectiveMap(saturated, name=entropy.name or "entropy").normalized()


def sobel_slope(dem: Dem) -> ObjectiveMap:
    """Terrain gradient magnitude from 3x3 Sobel filters.

    Kernels are scaled by 1/(8*cell_size) so the response to a plane equals its
    analytic gradient; borders use edge replication. The returned map holds raw
    magnitudes (meters per meter); normalization happens downstream in the risk
    transform (:func:`slope_objective`).
    """
    z = dem.elevations
    gx = ndimage.sobel(z, axis=1, mode="nearest") / (8.0 * dem.cell_size)
    gy = ndimage.sobel(z, axis=0, mode="nearest") / (8.0 * dem.cell_size)
    return ObjectiveMap(np.hypot(gx, gy), name="slope")


def slope_objective(slope: ObjectiveMap, invert: bool = True) -> ObjectiveMap:
    """Convert raw slope magnitudes into a normalized coverage objective.

    ``invert=True`` rewards flat terrain (max - slope); ``invert=False`` covers
    the steep regions directly.
    """
    grid = slope.grid
    if invert:
        grid = grid.max() - grid
    out = ObjectiveMap(grid, name="slope_objective")
    if out.integral() <= 0.0:
        raise ValueError("slope map is degenerate (constant gradient magnitude)")
    return out.normalized()


def _bilinear(z: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Bilinear elevation sample at fractional grid coordinates (gx in cols, gy in rows)."""
    ny, nx = z.shape
    i0 = np.clip(np.floor(gx).astype(int), 0, nx - 2)
    j0 = np.clip(np.floor(gy).astype(int), 0, ny - 2)
    fx = gx - i0
    fy = gy - j0
    return (
        z[j0, i0] * (1 - fx) * (1 - fy)
        + z[j0, i0 + 1] * fx * (1 - fy)
        + z[j0 + 1, i0] * (1 - fx) * fy
        + z[j0 + 1, i0 + 1] * fx * fy
    )


def shade_mask(dem: Dem, sun: SunVector) -> np.ndarray:
    """Boolean occlusion mask (True = shaded) by ray marching toward the sun.

    Rays start at each cell center and march in steps of cell_size/2, sampling
    the surface bilinearly; a cell is shaded when any sample exceeds the ray
    height. Marching stops once rays leave the span of the cell centers.
    """
    z = dem.elevations
    ny, nx = z.shape
    step = dem.cell_size / 2.0
    dx = math.cos(sun.azimuth) * step
    dy = math.sin(sun.azimuth) * step
    rise = math.tan(sun.elevation_angle) * step

    xs = (np.arange(nx) + 0.5) * dem.cell_size
    ys = (np.arange(ny) + 0.5) * dem.cell_size
    px, py = np.meshgrid(xs, ys)
    px = px.copy()
    py = py.copy()
    height = z.copy()
    shaded = np.zeros((ny, nx), dtype=bool)

    max_steps = int(math.ceil(2.0 * math.hypot(nx, ny))) + 2
    for _ in range(max_steps):
        px += dx
        py += dy
        height += rise
        gx = px / dem.cell_size - 0.5
        gy = py / dem.cell_size - 0.5
        inside = (gx >= 0.0) & (gx <= nx - 1.0) & (gy >= 0.0) & (gy <= ny - 1.0)
        if not inside.any():
            break
        sample = _bilinear(z, np.where(inside, gx, 0.0), np.where(inside, gy, 0.0))
        shaded |= inside & (sample > height + 1e-12)
    return shaded


def raycast_shade(dem: Dem, sun: SunVector) -> ObjectiveMap:
    """Sunlit-preference map: shaded cells get the floor value, sunlit cells 1."""
    grid = np.where(shade_mask(dem, sun), SHADE_FLOOR, 1.0)
    return ObjectiveMap(grid, name="shade").normalized()


def load_dem(path) -> Dem:
    """Read an ESRI ASCII grid subset: ncols/nrows/cellsize headers, then rows."""
    headers: dict[str, float] = {}
    values: list[float] = []
    known = {"ncols", "nrows", "cellsize", "xllcorner", "yllcorner", "nodata_value"}
    with open(path) as fh:
        for line in fh:
            tokens = line.split()
            if not tokens:
                continue
            key = tokens[0].lower()
            if key in known and len(tokens) == 2:
                headers[key] = float(tokens[1])
            else:
                values.extend(float(tok) for tok in tokens)
    for required in ("ncols", "nrows", "cellsize"):
        if required not in headers:
            raise ValueError(f"{path}: missing DEM header {required!r}")
    ncols, nrows = int(headers["ncols"]), int(headers["nrows"])
    if len(values) != nrows * ncols:
        raise ValueError(
            f"{path}: expected {nrows * ncols} elevation values, found {len(values)}"
        )
    grid = np.array(values).reshape(nrows, ncols)
    return Dem(grid, cell_size=headers["cellsize"])


def save_dem(dem: Dem, path) -> None:
    """Write a DEM in the ESRI ASCII grid subset used by :func:`load_dem`."""
    ny, nx = dem.shape
    lines = [f"ncols {nx}", f"nrows {ny}", f"cellsize {repr(dem.cell_size)}"]
    for row in dem.elevations:
        lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
