"""
Gridded terrain: height samples on a regular lattice, slope based
walkability and the height / line-of-sight queries built on top of them.

The terrain file is plain text:

```
# comment lines start with '#'
ncols nrows cell_size origin_x origin_z
h(0,0) h(0,1) ... h(0,ncols-1)      <- southernmost row
...
h(nrows-1,0) ...                   <- northernmost row
```

Example:

    ```python
    from terrabstract.terrain import load_terrain, walkable_mask

    grid = load_terrain("village.ter")
    mask = walkable_mask(grid, slope_max_deg=45)
    grid.height_at(10.0, 4.5)
    ```

"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from terrabstract.utils import (
    BoundingBox,
    Point,
    TerrainParseError,
    TerrainRangeError,
    atomic_write,
)

logger = logging.getLogger(__name__)

EXTENT_TOLERANCE = 1e-9

# (dcol, drow) for the 8 neighbours of a cell
NEIGHBOUR_OFFSETS = (
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
)


@dataclass(frozen=True, eq=False)
class TerrainGrid:
    """Regular height grid.

    Attributes:
        cell_size: distance between neighbouring height samples in meters.
        origin_x: world x of the southwest sample.
        origin_z: world z of the southwest sample.
        heights: array of shape (nrows, ncols); row 0 is the southernmost row.
    """

    cell_size: float
    origin_x: float
    origin_z: float
    heights: np.ndarray = field(repr=False)

    def __post_init__(self):
        heights = np.array(self.heights, dtype=float)
        if heights.ndim != 2 or heights.shape[0] < 2 or heights.shape[1] < 2:
            raise ValueError("heights should be a 2D array of at least 2x2 samples")
        if not np.all(np.isfinite(heights)):
            raise ValueError("heights should all be finite")
        if not self.cell_size > 0:
            raise ValueError(f"cell_size should be positive, got {self.cell_size}")
        heights.setflags(write=False)
        object.__setattr__(self, "heights", heights)

    @property
    def nrows(self) -> int:
        return self.heights.shape[0]

    @property
    def ncols(self) -> int:
        return self.heights.shape[1]

    @property
    def width(self) -> float:
        """East-west extent in meters."""
        return (self.ncols - 1) * self.cell_size

    @property
    def depth(self) -> float:
        """North-south extent in meters."""
        return (self.nrows - 1) * self.cell_size

    @property
    def extent(self) -> BoundingBox:
        return BoundingBox(
            self.origin_x,
            self.origin_z,
            self.origin_x + self.width,
            self.origin_z + self.depth,
        )

    def contains(self, x: float, z: float) -> bool:
        e = self.extent
        tol = EXTENT_TOLERANCE * max(1.0, self.cell_size)
        inside_x = e.xmin - tol <= x <= e.xmax + tol
        return inside_x and e.zmin - tol <= z <= e.zmax + tol

    def cell_of(self, x: float, z: float) -> tuple[int, int]:
        """Index (col, row) of the height sample nearest to (x, z)."""
        col = math.floor((x - self.origin_x) / self.cell_size + 0.5)
        row = math.floor((z - self.origin_z) / self.cell_size + 0.5)
        return min(max(col, 0), self.ncols - 1), min(max(row, 0), self.nrows - 1)

    def cell_center(self, col: int, row: int) -> Point:
        return Point(
            self.origin_x + col * self.cell_size, self.origin_z + row * self.cell_size
        )

    def height_at(self, x: float, z: float) -> float:
        """Bilinear height at a world position; see `height_at`."""
        return height_at(self, x, z)

    def heights_at(self, xs, zs) -> np.ndarray:
        """Vectorized bilinear interpolation without range checks.

        Positions are clamped to the extent.
        """
        u = (np.asarray(xs, dtype=float) - self.origin_x) / self.cell_size
        v = (np.asarray(zs, dtype=float) - self.origin_z) / self.cell_size
        u = np.clip(u, 0.0, self.ncols - 1)
        v = np.clip(v, 0.0, self.nrows - 1)
        c0 = np.minimum(np.floor(u).astype(int), self.ncols - 2)
        r0 = np.minimum(np.floor(v).astype(int), self.nrows - 2)
        fu = u - c0
        fv = v - r0
        h = self.heights
        south = h[r0, c0] * (1 - fu) + h[r0, c0 + 1] * fu
        north = h[r0 + 1, c0] * (1 - fu) + h[r0 + 1, c0 + 1] * fu
        return south * (1 - fv) + north * fv


@dataclass(frozen=True, eq=False)
class WalkMask:
    """Per-sample walkability derived from a slope limit.

    Attributes:
        walkable: boolean array with the shape of the terrain heights.
        slope_max_deg: the limit the mask was derived with.
    """

    walkable: np.ndarray = field(repr=False)
    slope_max_deg: float

    def __post_init__(self):
        walkable = np.array(self.walkable, dtype=bool)
        walkable.setflags(write=False)
        object.__setattr__(self, "walkable", walkable)

    def __getitem__(self, cell: tuple[int, int]) -> bool:
        col, row = cell
        return bool(self.walkable[row, col])

    @property
    def count(self) -> int:
        return int(self.walkable.sum())


def load_terrain(path: Path | str) -> TerrainGrid:
    """Read a terrain text file.

    Raises:
        TerrainParseError: malformed header, wrong number of rows or values,
            or non-finite heights. The message names the offending line.
    """
    path = Path(path)
    header: tuple[int, int, float, float, float] | None = None
    rows: list[list[float]] = []
    last_line = 0

    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            last_line = lineno
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if header is None:
                header = _parse_header(tokens, lineno)
                continue
            ncols = header[0]
            if len(rows) == header[1]:
                raise TerrainParseError(
                    f"expected {header[1]} rows of heights, found more", lineno
                )
            if len(tokens) != ncols:
                raise TerrainParseError(
                    f"expected {ncols} heights, found {len(tokens)}", lineno
                )
            try:
                values = [float(t) for t in tokens]
            except ValueError as e:
                raise TerrainParseError(f"invalid height value ({e})", lineno) from e
            if not all(math.isfinite(v) for v in values):
                raise TerrainParseError("non-finite height value", lineno)
            rows.append(values)

    if header is None:
        raise TerrainParseError("missing header", last_line or 1)
    ncols, nrows, cell_size, origin_x, origin_z = header
    if len(rows) != nrows:
        raise TerrainParseError(
            f"expected {nrows} rows of heights, found {len(rows)}", last_line
        )

    grid = TerrainGrid(
        cell_size=cell_size,
        origin_x=origin_x,
        origin_z=origin_z,
        heights=np.array(rows, dtype=float),
    )
    logger.info(f"Loaded {ncols}x{nrows} terrain from {path}")
    return grid


def _parse_header(tokens: list[str], lineno: int):
    if len(tokens) != 5:
        raise TerrainParseError(
            "header should read 'ncols nrows cell_size origin_x origin_z'", lineno
        )
    try:
        ncols, nrows = int(tokens[0]), int(tokens[1])
        cell_size, origin_x, origin_z = (float(t) for t in tokens[2:])
    except ValueError as e:
        raise TerrainParseError(f"invalid header value ({e})", lineno) from e
    if ncols < 2 or nrows < 2:
        raise TerrainParseError("terrain needs at least 2x2 samples", lineno)
    if not (math.isfinite(cell_size) and cell_size > 0):
        raise TerrainParseError("cell_size should be a positive number", lineno)
    if not (math.isfinite(origin_x) and math.isfinite(origin_z)):
        raise TerrainParseError("origin should be finite", lineno)
    return ncols, nrows, cell_size, origin_x, origin_z


def dump_terrain(grid: TerrainGrid) -> str:
    header = (grid.ncols, grid.nrows, grid.cell_size, grid.origin_x, grid.origin_z)
    lines = [" ".join(repr(v) for v in header)]
    for row in grid.heights:
        lines.append(" ".join(repr(float(h)) for h in row))
    return "\n".join(lines) + "\n"


def save_terrain(grid: TerrainGrid, path: Path | str):
    """Write the grid in the terrain text format."""
    atomic_write(Path(path), dump_terrain(grid))


def walkable_mask(grid: TerrainGrid, slope_max_deg: float) -> WalkMask:
    """Mark samples whose steepest slope to any neighbour is within the limit.

    Border samples only consider the neighbours that exist. Diagonal
    neighbours are sqrt(2) * cell_size away.
    """
    if not 0 < slope_max_deg <= 90:
        raise ValueError(f"slope_max_deg should be in (0, 90], got {slope_max_deg}")

    h = grid.heights
    nrows, ncols = h.shape
    steepest = np.zeros_like(h)
    for dcol, drow in NEIGHBOUR_OFFSETS:
        dist = grid.cell_size * math.hypot(dcol, drow)
        # slice of cells that have a neighbour at this offset
        src_r = slice(max(0, -drow), nrows - max(0, drow))
        src_c = slice(max(0, -dcol), ncols - max(0, dcol))
        dst_r = slice(max(0, drow), nrows - max(0, -drow))
        dst_c = slice(max(0, dcol), ncols - max(0, -dcol))
        slope = np.degrees(np.arctan(np.abs(h[src_r, src_c] - h[dst_r, dst_c]) / dist))
        steepest[src_r, src_c] = np.maximum(steepest[src_r, src_c], slope)

    walkable = steepest <= slope_max_deg + 1e-9
    logger.debug(
        f"{int(walkable.sum())} of {walkable.size} samples walkable "
        f"at {slope_max_deg} deg"
    )
    return WalkMask(walkable=walkable, slope_max_deg=slope_max_deg)


def height_at(grid: TerrainGrid, x: float, z: float) -> float:
    """Bilinear interpolation of the four surrounding height samples.

    Raises:
        TerrainRangeError: (x, z) lies outside the terrain extent.
    """
    if not grid.contains(x, z):
        raise TerrainRangeError(
            f"({x}, {z}) is outside the terrain extent {grid.extent}"
        )
    return float(grid.heights_at(x, z))


def line_of_sight(
    grid: TerrainGrid, a: Point, b: Point, eye_height: float, step: float | None = None
) -> bool:
    """Whether terrain stays below the sight line between two eyes.

    The sight line runs from `eye_height` above the terrain at `a` to
    `eye_height` above the terrain at `b`. Interior samples are taken every
    `step` meters (default a quarter cell); the endpoints are not tested.
    """
    if eye_height < 0:
        raise ValueError("eye_height should be non-negative")
    ax, az = a
    bx, bz = b
    length = math.hypot(bx - ax, bz - az)
    step = grid.cell_size / 4 if step is None else step
    n = math.ceil(length / step)
    if n < 2:
        return True

    eye_a = float(grid.heights_at(ax, az)) + eye_height
    eye_b = float(grid.heights_at(bx, bz)) + eye_height
    t = np.arange(1, n) / n
    ground = grid.heights_at(ax + (bx - ax) * t, az + (bz - az) * t)
    sight = eye_a + (eye_b - eye_a) * t
    return bool(np.all(ground < sight))
