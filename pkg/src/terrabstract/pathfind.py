"""Shortest paths, action masks and discrete moves on a waypoint graph."""

import heapq
import logging
import math
from enum import IntEnum
from typing import Literal

from terrabstract.utils import ContractError, IllegalMoveError, NoPathError
from terrabstract.waygraph import Direction, WaypointGraph

logger = logging.getLogger(__name__)

CostMode = Literal["unit", "euclid"]
"""`unit` counts every valid edge as 1, `euclid` uses its euclidean length."""

COST_MODES: tuple[CostMode, ...] = ("unit", "euclid")


class Action(IntEnum):
    """The 9 discrete moves: stand still or step to one of 8 neighbours."""

    STAY = 0
    N = 1
    NE = 2
    E = 3
    SE = 4
    S = 5
    SW = 6
    W = 7
    NW = 8

    @property
    def direction(self) -> Direction | None:
        return None if self is Action.STAY else Direction(self.value)

    @property
    def opposite(self) -> "Action":
        if self is Action.STAY:
            return self
        return Action(Direction(self.value).opposite.value)

    @classmethod
    def from_step(cls, dx: int, dz: int) -> "Action":
        """Action for a unit step (dx, dz) in {-1, 0, 1}^2."""
        if (dx, dz) == (0, 0):
            return cls.STAY
        return cls(Direction.from_offset(dx, dz).value)


def _check_node(graph: WaypointGraph, node_id: int):
    if not (0 <= node_id < len(graph.nodes)) or not graph.nodes[node_id].valid:
        raise ContractError(f"{node_id} is not a valid waypoint id")


def action_mask(graph: WaypointGraph, node_id: int) -> list[bool]:
    """Which of the 9 actions are allowed at a waypoint.

    Staying is always allowed; a direction is allowed when its edge exists,
    is valid and leads to a valid waypoint.
    """
    _check_node(graph, node_id)
    mask = [True] + [False] * 8
    for target, edge in graph.valid_neighbours(node_id):
        mask[edge.direction] = True
    return mask


def apply_action(graph: WaypointGraph, node_id: int, action: int | Action) -> int:
    """Waypoint reached by taking an action.

    Raises:
        IllegalMoveError: the action is masked at this waypoint.
    """
    _check_node(graph, node_id)
    action = Action(action)
    if action is Action.STAY:
        return node_id
    edge = graph.edge(node_id, Direction(action.value))
    if edge is None or not edge.valid or not graph.nodes[edge.target].valid:
        raise IllegalMoveError(f"action {action.name} is masked at waypoint {node_id}")
    return edge.target


def edge_cost(edge, mode: CostMode) -> float:
    return 1.0 if mode == "unit" else edge.euclid_len


def distance_field(
    graph: WaypointGraph, source: int, mode: CostMode = "unit", stop: int | None = None
) -> dict[int, float]:
    """Dijkstra distances from `source` over valid edges.

    When `stop` is given, the search ends as soon as `stop` is settled; the
    returned distances are then exact for every node closer than `stop`.
    """
    _check_node(graph, source)
    dist = {source: 0.0}
    settled: set[int] = set()
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        if u == stop:
            break
        for v, edge in graph.valid_neighbours(u):
            nd = d + edge_cost(edge, mode)
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return {node: dist[node] for node in settled}


def _on_shortest(d_u: float, cost: float, d_v: float) -> bool:
    return math.isclose(d_v + cost, d_u, rel_tol=1e-12, abs_tol=1e-12)


def shortest_hops(
    graph: WaypointGraph, field: dict[int, float], node_id: int, mode: CostMode
) -> list[int]:
    """Neighbours lying on a shortest path to the field's source, by id."""
    d_u = field.get(node_id)
    if d_u is None or d_u == 0:
        return []
    hops = []
    for v, edge in graph.valid_neighbours(node_id):
        d_v = field.get(v)
        if d_v is not None and _on_shortest(d_u, edge_cost(edge, mode), d_v):
            hops.append(v)
    return sorted(hops)


def next_hop(
    graph: WaypointGraph, field: dict[int, float], node_id: int, mode: CostMode
):
    """Smallest-id neighbour one step closer to the field's source, or None."""
    hops = shortest_hops(graph, field, node_id, mode)
    return hops[0] if hops else None


def shortest_path(
    graph: WaypointGraph, src: int, dst: int, mode: CostMode = "unit"
) -> tuple[list[int], float]:
    """Cheapest path over valid edges.

    Among equally cheap paths the lexicographically smallest sequence of
    waypoint ids is returned.

    Raises:
        NoPathError: dst cannot be reached from src.
    """
    _check_node(graph, src)
    _check_node(graph, dst)
    if src == dst:
        return [src], 0.0

    # distances towards dst; edges are symmetric so this is the reverse field
    field = distance_field(graph, dst, mode, stop=src)
    if src not in field:
        raise NoPathError(f"waypoint {dst} is unreachable from {src}")

    path = [src]
    node = src
    while node != dst:
        hop = next_hop(graph, field, node, mode)
        if hop is None:  # pragma: no cover - field is exact along shortest paths
            raise NoPathError(f"lost the shortest path at waypoint {node}")
        path.append(hop)
        node = hop
    return path, field[src]


def path_cost(graph: WaypointGraph, path: list[int], mode: CostMode = "unit") -> float:
    """Cost of walking a sequence of neighbouring waypoints."""
    total = 0.0
    for u, v in zip(path, path[1:]):
        edge = graph.edge(u, _direction_between(graph, u, v))
        if edge is None or not edge.valid:
            raise NoPathError(f"no valid edge between waypoints {u} and {v}")
        total += edge_cost(edge, mode)
    return total


def _direction_between(graph: WaypointGraph, u: int, v: int) -> Direction:
    a, b = graph.nodes[u], graph.nodes[v]
    offset = (b.i - a.i, b.j - a.j)
    if max(abs(offset[0]), abs(offset[1])) != 1:
        raise NoPathError(f"waypoints {u} and {v} are not neighbours")
    return Direction.from_offset(*offset)
