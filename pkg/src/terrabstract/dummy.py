"""Synthetic terrains, trajectories and graphs for testing."""

import numpy as np
from scipy.ndimage import gaussian_filter

from terrabstract.terrain import TerrainGrid
from terrabstract.trajectory import Trajectory
from terrabstract.waygraph import GraphConfig, WaypointGraph, build_graph


def flat_terrain(ncols=3, nrows=3, cell_size=1.0, height=0.0, origin=(0.0, 0.0)):
    """Level ground."""
    return TerrainGrid(
        cell_size=cell_size,
        origin_x=origin[0],
        origin_z=origin[1],
        heights=np.full((nrows, ncols), float(height)),
    )


def ramp_terrain(ncols=11, nrows=11, cell_size=1.0, slope_deg=30.0):
    """Ground rising towards the east at a constant slope."""
    x = np.arange(ncols) * cell_size
    heights = np.tile(x * np.tan(np.radians(slope_deg)), (nrows, 1))
    return TerrainGrid(cell_size=cell_size, origin_x=0.0, origin_z=0.0, heights=heights)


def wall_terrain(
    ncols=21, nrows=21, cell_size=1.0, wall_col=10, wall_height=10.0, gap_rows=()
):
    """Flat ground split north-south by a wall, optionally with gaps.

    The wall and the samples next to it are too steep to walk on; a gap is a
    range of rows where the wall is absent.
    """
    heights = np.zeros((nrows, ncols))
    heights[:, wall_col] = wall_height
    heights[list(gap_rows), wall_col] = 0.0
    return TerrainGrid(cell_size=cell_size, origin_x=0.0, origin_z=0.0, heights=heights)


def random_terrain(
    ncols=64, nrows=64, cell_size=1.0, relief=4.0, smoothness=3.0, seed=0
):
    """Smooth random hills."""
    rng = np.random.default_rng(seed)
    noise = gaussian_filter(rng.standard_normal((nrows, ncols)), smoothness)
    noise = noise / (np.ptp(noise) or 1.0)
    return TerrainGrid(
        cell_size=cell_size, origin_x=0.0, origin_z=0.0, heights=relief * noise
    )


def line_graph(n=5, spacing=2.0) -> WaypointGraph:
    """A single row of `n` valid waypoints on flat ground."""
    grid = flat_terrain(ncols=int((n - 1) * spacing) + 1, nrows=2, cell_size=1.0)
    return build_graph(grid, GraphConfig(spacing=spacing))


def straight_trajectory(start, end, n=10, dt=0.5, grid: TerrainGrid | None = None):
    """Evenly spaced samples on the segment from start (x, z) to end (x, z)."""
    s = np.linspace(0.0, 1.0, n)
    x = start[0] + (end[0] - start[0]) * s
    z = start[1] + (end[1] - start[1]) * s
    y = np.zeros(n) if grid is None else grid.heights_at(x, z)
    xyz = np.column_stack([x, y, z])
    return Trajectory(t=np.arange(n) * dt, xyz=xyz, nominal_dt=dt)


def random_walk(
    grid: TerrainGrid, n=100, dt=0.5, speed=2.0, jitter=0.1, seed=0, name="walk"
):
    """Wandering trajectory that stays on the terrain, with position noise."""
    rng = np.random.default_rng(seed)
    e = grid.extent
    pos = np.array([(e.xmin + e.xmax) / 2, (e.zmin + e.zmax) / 2])
    heading = rng.uniform(0, 2 * np.pi)
    xz = []
    for _ in range(n):
        xz.append(pos.copy())
        heading += rng.normal(0, 0.5)
        step = speed * dt * np.array([np.cos(heading), np.sin(heading)])
        nxt = pos + step
        if not grid.contains(*nxt):
            heading += np.pi
            nxt = pos - step
        pos = np.clip(nxt, [e.xmin, e.zmin], [e.xmax, e.zmax])
    xz_arr = np.array(xz) + rng.normal(0, jitter, size=(n, 2))
    xz_arr = np.clip(xz_arr, [e.xmin, e.zmin], [e.xmax, e.zmax])
    y = grid.heights_at(xz_arr[:, 0], xz_arr[:, 1])
    return Trajectory(
        t=np.arange(n) * dt,
        xyz=np.column_stack([xz_arr[:, 0], y, xz_arr[:, 1]]),
        nominal_dt=dt,
        name=name,
    )
