"""
Waypoint movement graph over a terrain.

Waypoints sit on a square lattice with a parameterized spacing, anchored at a
seed point. Generation is a breadth-first flood fill from the seed: every
visited waypoint tries to create its 8 lattice neighbours and the edges to
them. Waypoints without walkable ground and edges without a good walkable
path are kept but flagged invalid. `fill_gaps` then sweeps the lattice from
the southwest to the northeast corner and floods every walkable spot the
first pass could not reach.

Example:

    ```python
    from terrabstract.terrain import load_terrain
    from terrabstract.waygraph import GraphConfig, build_graph, save_graph

    grid = load_terrain("village.ter")
    cfg = GraphConfig(spacing=2.0, seed_x=10.0, seed_z=10.0)
    graph = build_graph(grid, cfg)
    save_graph(graph, "village.graph")
    ```

"""

import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from pathlib import Path
from typing import Iterator, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from terrabstract.terrain import TerrainGrid, WalkMask, walkable_mask
from terrabstract.utils import (
    ContractError,
    GraphConfigError,
    GraphLoadError,
    Point3,
    SeedError,
    atomic_write,
    dump_document,
    load_document,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

InvalidReason = Literal["no_path", "vertical", "detour"]


class Direction(IntEnum):
    """Compass directions in the fixed order waypoints are expanded in."""

    N = 1
    NE = 2
    E = 3
    SE = 4
    S = 5
    SW = 6
    W = 7
    NW = 8

    @property
    def offset(self) -> tuple[int, int]:
        """Lattice step (di east, dj north)."""
        return _OFFSETS[self]

    @property
    def opposite(self) -> "Direction":
        return Direction((self.value + 3) % 8 + 1)

    @classmethod
    def from_offset(cls, di: int, dj: int) -> "Direction":
        return _BY_OFFSET[(di, dj)]


_OFFSETS = {
    Direction.N: (0, 1),
    Direction.NE: (1, 1),
    Direction.E: (1, 0),
    Direction.SE: (1, -1),
    Direction.S: (0, -1),
    Direction.SW: (-1, -1),
    Direction.W: (-1, 0),
    Direction.NW: (-1, 1),
}
_BY_OFFSET = {offset: d for d, offset in _OFFSETS.items()}


class GraphConfig(BaseModel):
    """Parameters of waypoint generation.

    Attributes:
        spacing: lattice distance between neighbouring waypoints in meters.
        slope_max_deg: slope limit used for the walkability mask.
        detour_max: largest allowed ratio of walkable path length to
            straight-line length across one edge.
        vstep_max: largest allowed height difference across one edge.
            Defaults to half the spacing.
        seed_x: world x of the lattice origin and of the first waypoint.
        seed_z: world z of the lattice origin and of the first waypoint.
    """

    model_config = ConfigDict(frozen=True)

    spacing: float = Field(2.0, gt=0)
    slope_max_deg: float = Field(45.0, gt=0, le=90)
    detour_max: float = Field(1.5, gt=1)
    vstep_max: float = Field(None, ge=0)  # type: ignore[assignment]
    seed_x: float = 0.0
    seed_z: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def _default_vstep(cls, data):
        if isinstance(data, dict) and data.get("vstep_max") is None:
            data = dict(data)
            data["vstep_max"] = 0.5 * data.get("spacing", 2.0)
        return data


@dataclass(frozen=True, slots=True)
class Waypoint:
    """A lattice node; (i, j) counts spacings east and north of the seed."""

    id: int
    i: int
    j: int
    x: float
    y: float
    z: float
    valid: bool

    @property
    def position(self) -> Point3:
        return Point3(self.x, self.y, self.z)

    @property
    def lattice(self) -> tuple[int, int]:
        return self.i, self.j


@dataclass(frozen=True, slots=True)
class Edge:
    """Directed edge between lattice neighbours; every edge has a reverse twin."""

    source: int
    target: int
    direction: Direction
    valid: bool
    reason: InvalidReason | None
    euclid_len: float
    walk_len: float

    def reversed(self) -> "Edge":
        return Edge(
            source=self.target,
            target=self.source,
            direction=self.direction.opposite,
            valid=self.valid,
            reason=self.reason,
            euclid_len=self.euclid_len,
            walk_len=self.walk_len,
        )


class WaypointGraph:
    """Waypoints with per-direction adjacency.

    Treated as immutable once built: `generate` and `fill_gaps` return new
    graphs.
    """

    def __init__(self, config: GraphConfig):
        self.config = config
        self.nodes: list[Waypoint] = []
        self._adjacency: list[list[Edge | None]] = []
        self._lattice: dict[tuple[int, int], int] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WaypointGraph):
            return NotImplemented
        return (
            self.config == other.config
            and self.nodes == other.nodes
            and self._adjacency == other._adjacency
        )

    def __repr__(self) -> str:
        return f"WaypointGraph(nodes={len(self.nodes)}, spacing={self.config.spacing})"

    def copy(self) -> "WaypointGraph":
        clone = WaypointGraph(self.config)
        clone.nodes = list(self.nodes)
        clone._adjacency = [list(slots) for slots in self._adjacency]
        clone._lattice = dict(self._lattice)
        return clone

    def node(self, node_id: int) -> Waypoint:
        if not 0 <= node_id < len(self.nodes):
            raise ContractError(f"unknown waypoint id {node_id}")
        return self.nodes[node_id]

    def node_at(self, i: int, j: int) -> Waypoint | None:
        node_id = self._lattice.get((i, j))
        return None if node_id is None else self.nodes[node_id]

    def edge(self, node_id: int, direction: Direction) -> Edge | None:
        return self._adjacency[node_id][direction - 1]

    def edges_from(self, node_id: int) -> Iterator[Edge]:
        for edge in self._adjacency[node_id]:
            if edge is not None:
                yield edge

    def edges(self) -> Iterator[Edge]:
        """All directed edges sorted by source id, then direction."""
        for slots in self._adjacency:
            for edge in slots:
                if edge is not None:
                    yield edge

    def valid_neighbours(self, node_id: int) -> Iterator[tuple[int, Edge]]:
        """Targets reachable over valid edges, in direction order."""
        for edge in self._adjacency[node_id]:
            if edge is not None and edge.valid and self.nodes[edge.target].valid:
                yield edge.target, edge

    @cached_property
    def positions(self) -> np.ndarray:
        """Array of shape (n, 3) with waypoint positions."""
        return np.array([(n.x, n.y, n.z) for n in self.nodes], dtype=float).reshape(
            -1, 3
        )

    @cached_property
    def valid_ids(self) -> np.ndarray:
        return np.array([n.id for n in self.nodes if n.valid], dtype=int)

    def components(self) -> list[list[int]]:
        """Connected groups of valid waypoints over valid edges."""
        ids = self.valid_ids
        if len(ids) == 0:
            return []
        rows, cols = [], []
        for edge in self.edges():
            if edge.valid:
                rows.append(edge.source)
                cols.append(edge.target)
        adjacency = csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(self.nodes),) * 2
        )
        _, labels = connected_components(adjacency, directed=False)
        groups: dict[int, list[int]] = {}
        for node_id in ids:
            groups.setdefault(int(labels[node_id]), []).append(int(node_id))
        return sorted(groups.values(), key=lambda group: group[0])

    def summary(self) -> dict:
        """Counts of nodes and edges by validity."""
        undirected = [e for e in self.edges() if e.source < e.target]
        reasons = {r: 0 for r in ("no_path", "vertical", "detour")}
        for edge in undirected:
            if not edge.valid:
                reasons[edge.reason] += 1  # type: ignore[index]
        return {
            "nodes": len(self.nodes),
            "valid_nodes": int(len(self.valid_ids)),
            "edges": len(undirected),
            "valid_edges": sum(e.valid for e in undirected),
            "invalid_edges": reasons,
            "components": len(self.components()),
        }

    def _add_node(self, i: int, j: int, y: float, valid: bool) -> Waypoint:
        cfg = self.config
        node = Waypoint(
            id=len(self.nodes),
            i=i,
            j=j,
            x=cfg.seed_x + i * cfg.spacing,
            y=y,
            z=cfg.seed_z + j * cfg.spacing,
            valid=valid,
        )
        self.nodes.append(node)
        self._adjacency.append([None] * 8)
        self._lattice[(i, j)] = node.id
        return node

    def _add_edge_pair(self, edge: Edge):
        self._adjacency[edge.source][edge.direction - 1] = edge
        twin = edge.reversed()
        self._adjacency[twin.source][twin.direction - 1] = twin


### Generation


def lattice_bounds(grid: TerrainGrid, cfg: GraphConfig) -> tuple[int, int, int, int]:
    """Inclusive (i_min, i_max, j_min, j_max) of lattice points inside the terrain."""
    extent = grid.extent
    tol = 1e-9
    i_min = math.ceil((extent.xmin - cfg.seed_x) / cfg.spacing - tol)
    i_max = math.floor((extent.xmax - cfg.seed_x) / cfg.spacing + tol)
    j_min = math.ceil((extent.zmin - cfg.seed_z) / cfg.spacing - tol)
    j_max = math.floor((extent.zmax - cfg.seed_z) / cfg.spacing + tol)
    return i_min, i_max, j_min, j_max


def lattice_point_walkable(
    grid: TerrainGrid, mask: WalkMask, cfg: GraphConfig, i: int, j: int
) -> bool:
    """Whether a waypoint at lattice (i, j) would be valid."""
    x = cfg.seed_x + i * cfg.spacing
    z = cfg.seed_z + j * cfg.spacing
    return grid.contains(x, z) and mask[grid.cell_of(x, z)]


def generate(grid: TerrainGrid, mask: WalkMask, cfg: GraphConfig) -> WaypointGraph:
    """Flood fill waypoints breadth-first from the seed point.

    Raises:
        GraphConfigError: spacing is below a quarter of the cell size.
        SeedError: the seed is outside the terrain or on unwalkable ground.
    """
    if cfg.spacing < grid.cell_size / 4:
        raise GraphConfigError(
            f"spacing {cfg.spacing} is smaller than a quarter of the terrain "
            f"cell size {grid.cell_size}"
        )
    if not grid.contains(cfg.seed_x, cfg.seed_z):
        raise SeedError(f"seed ({cfg.seed_x}, {cfg.seed_z}) is outside the terrain")
    if not mask[grid.cell_of(cfg.seed_x, cfg.seed_z)]:
        raise SeedError(f"seed ({cfg.seed_x}, {cfg.seed_z}) is on unwalkable ground")

    graph = WaypointGraph(cfg)
    _flood(graph, grid, mask, 0, 0)
    logger.info(f"Generated {len(graph)} waypoints from seed")
    return graph


def fill_gaps(graph: WaypointGraph, grid: TerrainGrid, mask: WalkMask) -> WaypointGraph:
    """Flood every walkable lattice point the graph does not cover yet.

    The lattice is swept row by row from south to north, west to east;
    new components get ids following the existing ones.
    """
    cfg = graph.config
    filled = graph.copy()
    i_min, i_max, j_min, j_max = lattice_bounds(grid, cfg)
    seeds = 0
    for j in range(j_min, j_max + 1):
        for i in range(i_min, i_max + 1):
            if (i, j) in filled._lattice:
                continue
            if lattice_point_walkable(grid, mask, cfg, i, j):
                _flood(filled, grid, mask, i, j)
                seeds += 1
    added = len(filled) - len(graph)
    if added:
        logger.info(f"Filled {added} waypoints in {seeds} gaps")
    return filled


def build_graph(
    grid: TerrainGrid, cfg: GraphConfig, mask: WalkMask | None = None
) -> WaypointGraph:
    """Walkability mask, flood fill from the seed and gap filling in one go."""
    if mask is None:
        mask = walkable_mask(grid, cfg.slope_max_deg)
    return fill_gaps(generate(grid, mask, cfg), grid, mask)


def _flood(graph: WaypointGraph, grid: TerrainGrid, mask: WalkMask, i: int, j: int):
    cfg = graph.config
    start = _create(graph, grid, mask, i, j)
    queue = deque([start.id])
    while queue:
        u = graph.nodes[queue.popleft()]
        for direction in Direction:
            di, dj = direction.offset
            ni, nj = u.i + di, u.j + dj
            v = graph.node_at(ni, nj)
            if v is None:
                x = cfg.seed_x + ni * cfg.spacing
                z = cfg.seed_z + nj * cfg.spacing
                if not grid.contains(x, z):
                    continue
                v = _create(graph, grid, mask, ni, nj)
                if v.valid:
                    queue.append(v.id)
            if graph.edge(u.id, direction) is None:
                graph._add_edge_pair(validate_edge(grid, mask, u, v, cfg))


def _create(graph: WaypointGraph, grid, mask, i: int, j: int) -> Waypoint:
    cfg = graph.config
    x = cfg.seed_x + i * cfg.spacing
    z = cfg.seed_z + j * cfg.spacing
    valid = mask[grid.cell_of(x, z)]
    return graph._add_node(i, j, grid.height_at(x, z), valid)


### Edge validation


def validate_edge(
    grid: TerrainGrid, mask: WalkMask, a: Waypoint, b: Waypoint, cfg: GraphConfig
) -> Edge:
    """Check the three edge rules between lattice neighbours a and b.

    Rules, in the order the failure reason is reported: a walkable path
    exists between their cells (`no_path`), the height difference is at most
    `vstep_max` (`vertical`), the walkable path is at most `detour_max` times
    the straight-line distance (`detour`).

    Raises:
        ContractError: a and b are not lattice neighbours.
    """
    di, dj = b.i - a.i, b.j - a.j
    if max(abs(di), abs(dj)) != 1:
        raise ContractError(
            f"waypoints {a.id} and {b.id} are not lattice neighbours ({di}, {dj})"
        )
    direction = Direction.from_offset(di, dj)
    euclid = math.dist(a.position, b.position)

    if a.valid and b.valid:
        walk = walk_length(grid, mask, grid.cell_of(a.x, a.z), grid.cell_of(b.x, b.z))
    else:
        walk = math.inf

    reason: InvalidReason | None = None
    if math.isinf(walk):
        reason = "no_path"
    elif abs(a.y - b.y) > cfg.vstep_max:
        reason = "vertical"
    elif walk / euclid > cfg.detour_max + 1e-12:
        reason = "detour"

    return Edge(
        source=a.id,
        target=b.id,
        direction=direction,
        valid=reason is None,
        reason=reason,
        euclid_len=euclid,
        walk_len=walk,
    )


def walk_length(
    grid: TerrainGrid, mask: WalkMask, start: tuple[int, int], goal: tuple[int, int]
) -> float:
    """Shortest 8-connected path over walkable cells between two cells.

    The search is confined to the bounding box of both cells widened by their
    Chebyshev span on every side. Returns inf when no path exists.
    """
    walkable = mask.walkable
    (c0, r0), (c1, r1) = start, goal
    if not (walkable[r0, c0] and walkable[r1, c1]):
        return math.inf
    span = max(abs(c1 - c0), abs(r1 - r0))
    cs = grid.cell_size
    if span == 0:
        return 0.0
    if span == 1:
        return cs * math.hypot(c1 - c0, r1 - r0)

    # an unobstructed octile path is as short as any 8-connected path can be
    if _octile_path_walkable(walkable, start, goal):
        return _octile_length(start, goal, cs)

    col_lo = max(min(c0, c1) - span, 0)
    col_hi = min(max(c0, c1) + span, grid.ncols - 1)
    row_lo = max(min(r0, r1) - span, 0)
    row_hi = min(max(r0, r1) + span, grid.nrows - 1)
    diagonal = cs * math.sqrt(2)

    dist = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, cell = heapq.heappop(heap)
        if cell == goal:
            return d
        if d > dist[cell]:
            continue
        c, r = cell
        for dc, dr in _CELL_STEPS:
            nc, nr = c + dc, r + dr
            if not (col_lo <= nc <= col_hi and row_lo <= nr <= row_hi):
                continue
            if not walkable[nr, nc]:
                continue
            nd = d + (diagonal if dc and dr else cs)
            if nd < dist.get((nc, nr), math.inf):
                dist[(nc, nr)] = nd
                heapq.heappush(heap, (nd, (nc, nr)))
    return math.inf


_CELL_STEPS = tuple(d.offset for d in Direction)


def _octile_length(start: tuple[int, int], goal: tuple[int, int], cs: float) -> float:
    dc, dr = abs(goal[0] - start[0]), abs(goal[1] - start[1])
    return cs * (math.sqrt(2) * min(dc, dr) + abs(dc - dr))


def _octile_path_walkable(
    walkable: np.ndarray, start: tuple[int, int], goal: tuple[int, int]
) -> bool:
    """Whether the diagonal-then-straight or straight-then-diagonal path is clear."""
    (c0, r0), (c1, r1) = start, goal
    sc, sr = int(np.sign(c1 - c0)), int(np.sign(r1 - r0))
    n_diag = min(abs(c1 - c0), abs(r1 - r0))
    n_straight = max(abs(c1 - c0), abs(r1 - r0)) - n_diag
    straight = (sc, 0) if abs(c1 - c0) > abs(r1 - r0) else (0, sr)
    diagonal = (sc, sr)
    for order in (
        [diagonal] * n_diag + [straight] * n_straight,
        [straight] * n_straight + [diagonal] * n_diag,
    ):
        c, r = c0, r0
        for dc, dr in order:
            c, r = c + dc, r + dr
            if not walkable[r, c]:
                break
        else:
            return True
    return False


def revalidate(graph: WaypointGraph, grid: TerrainGrid) -> list[str]:
    """Re-derive every validity flag from the terrain and list disagreements."""
    cfg = graph.config
    mask = walkable_mask(grid, cfg.slope_max_deg)
    mismatches = []
    for node in graph.nodes:
        expected = grid.contains(node.x, node.z) and mask[grid.cell_of(node.x, node.z)]
        if expected != node.valid:
            mismatches.append(
                f"waypoint {node.id}: valid={node.valid}, terrain says {expected}"
            )
    for edge in graph.edges():
        if edge.source > edge.target:
            continue
        a, b = graph.nodes[edge.source], graph.nodes[edge.target]
        check = validate_edge(grid, mask, a, b, cfg)
        if (check.valid, check.reason) != (edge.valid, edge.reason):
            mismatches.append(
                f"edge {edge.source}->{edge.target}: valid={edge.valid} "
                f"({edge.reason}), terrain says {check.valid} ({check.reason})"
            )
    return mismatches


### Serialization


class _NodeRecord(BaseModel):
    id: int
    i: int
    j: int
    x: float
    y: float
    z: float
    valid: bool


class _EdgeRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    source: int = Field(alias="from")
    target: int = Field(alias="to")
    dir: Literal["N", "NE", "E", "SE", "S", "SW", "W", "NW"]
    valid: bool
    reason: InvalidReason | None
    euclid_len: float
    walk_len: float


class _GraphDocument(BaseModel):
    format_version: int
    config: GraphConfig
    nodes: list[_NodeRecord]
    edges: list[_EdgeRecord]


def dump_graph(graph: WaypointGraph) -> str:
    """Graph as a versioned yaml document."""
    document = {
        "format_version": FORMAT_VERSION,
        "config": graph.config.model_dump(),
        "nodes": [
            {
                "id": n.id,
                "i": n.i,
                "j": n.j,
                "x": n.x,
                "y": n.y,
                "z": n.z,
                "valid": n.valid,
            }
            for n in graph.nodes
        ],
        "edges": [
            {
                "from": e.source,
                "to": e.target,
                "dir": e.direction.name,
                "valid": e.valid,
                "reason": e.reason,
                "euclid_len": e.euclid_len,
                "walk_len": e.walk_len,
            }
            for e in graph.edges()
        ],
    }
    return dump_document(document, flow_lists=True)


def save_graph(graph: WaypointGraph, path: Path | str):
    atomic_write(Path(path), dump_graph(graph))
    logger.info(f"Saved graph with {len(graph)} waypoints to {path}")


def load_graph(path: Path | str) -> WaypointGraph:
    """Read a graph file and check the graph invariants.

    Raises:
        GraphLoadError: unknown format version, schema violation, non-dense
            ids, edges between non-neighbours or asymmetric adjacency.
    """
    raw = load_document(Path(path))
    if not isinstance(raw, dict):
        raise GraphLoadError(f"{path}: not a graph document")
    version = raw.get("format_version")
    if version != FORMAT_VERSION:
        raise GraphLoadError(
            f"{path}: unsupported format_version {version!r}, expected {FORMAT_VERSION}"
        )
    try:
        document = _GraphDocument.model_validate(raw)
    except ValidationError as e:
        raise GraphLoadError(f"{path}: schema violation\n{e}") from e

    graph = WaypointGraph(document.config)
    for expected_id, record in enumerate(document.nodes):
        if record.id != expected_id:
            raise GraphLoadError(f"{path}: waypoint ids are not dense at {record.id}")
        if (record.i, record.j) in graph._lattice:
            raise GraphLoadError(f"{path}: duplicate lattice position of {record.id}")
        graph.nodes.append(Waypoint(**record.model_dump()))
        graph._adjacency.append([None] * 8)
        graph._lattice[(record.i, record.j)] = record.id

    n = len(graph.nodes)
    for record in document.edges:
        if not (0 <= record.source < n and 0 <= record.target < n):
            raise GraphLoadError(
                f"{path}: edge {record.source}->{record.target} has unknown endpoint"
            )
        direction = Direction[record.dir]
        a, b = graph.nodes[record.source], graph.nodes[record.target]
        if (b.i - a.i, b.j - a.j) != direction.offset:
            raise GraphLoadError(
                f"{path}: edge {a.id}->{b.id} does not point {direction.name}"
            )
        if record.valid != (record.reason is None):
            raise GraphLoadError(f"{path}: edge {a.id}->{b.id} has inconsistent reason")
        if record.valid and not (a.valid and b.valid):
            raise GraphLoadError(f"{path}: valid edge {a.id}->{b.id} has invalid end")
        if graph.edge(a.id, direction) is not None:
            raise GraphLoadError(f"{path}: duplicate edge {a.id}->{b.id}")
        graph._adjacency[a.id][direction - 1] = Edge(
            source=a.id,
            target=b.id,
            direction=direction,
            valid=record.valid,
            reason=record.reason,
            euclid_len=record.euclid_len,
            walk_len=record.walk_len,
        )

    for edge in graph.edges():
        twin = graph.edge(edge.target, edge.direction.opposite)
        if twin is None or twin.target != edge.source or twin.valid != edge.valid:
            raise GraphLoadError(
                f"{path}: edge {edge.source}->{edge.target} has no matching reverse edge"
            )

    logger.info(f"Loaded graph with {n} waypoints from {path}")
    return graph
