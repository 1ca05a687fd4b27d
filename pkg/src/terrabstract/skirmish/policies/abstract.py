"""
Standard interface for skirmish policies.

All policies inherit from the abstract Policy class. The engine calls
`reset` at the start of every episode and `act` once per step.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Literal, Sequence

import numpy as np
from pydantic import BaseModel, PrivateAttr

from terrabstract.pathfind import Action, distance_field, shortest_hops
from terrabstract.utils import Point

if TYPE_CHECKING:
    from terrabstract.skirmish.engine import Arena

Team = Literal["blue", "red"]


@dataclass(frozen=True)
class AgentView:
    """What a team knows about one agent.

    `node` is the agent's waypoint in waypoint mode and None otherwise.
    """

    index: int
    x: float
    z: float
    node: int | None
    hits_taken: int
    alive: bool


@dataclass(frozen=True)
class Observation:
    """Observation handed to a team's policy.

    Attributes:
        own: every agent of the team, dead or alive, by index.
        enemies: living enemies in line of sight of a living teammate.
    """

    team: Team
    step: int
    move_mode: str
    target: Point
    own: tuple[AgentView, ...]
    enemies: tuple[AgentView, ...]

    @property
    def living(self) -> list[AgentView]:
        return [a for a in self.own if a.alive]


@dataclass(frozen=True)
class Order:
    """Instruction for one living agent.

    Attributes:
        move: Action code in waypoint mode, (dx, dz) in {-1, 0, 1}^2 in
            fine-grained mode.
        fire: whether the agent shoots at the enemy its aim assist picks.
    """

    move: int | tuple[int, int] = 0
    fire: bool = True


class Policy(BaseModel, ABC, validate_assignment=True):
    """Base class for skirmish policies.

    Attributes:
        policy: which policy this is.
        name: label used in win tables and ratings. Defaults to `policy`.
        pacifist: never fire.
    """

    policy: str
    name: str | None = None
    pacifist: bool = False

    _arena: Any = PrivateAttr(default=None)
    _team: Team = PrivateAttr(default="blue")
    _flags: list[str] = PrivateAttr(default_factory=list)
    _fields: dict[int, dict[int, float]] = PrivateAttr(default_factory=dict)

    @property
    def label(self) -> str:
        return self.name or self.policy

    @property
    def flags(self) -> list[str]:
        """Problems noticed during the current episode."""
        return list(self._flags)

    @property
    def arena(self) -> "Arena":
        assert self._arena is not None, "policy used before reset()"
        return self._arena

    @property
    def move_mode(self) -> str:
        """Move format of this policy's team in the current arena."""
        return self.arena.config.move_mode_of(self._team)

    def reset(self, arena: "Arena", team: Team):
        """Prepare for a new episode."""
        if self._arena is not arena:
            self._fields = {}
        self._arena = arena
        self._team = team
        self._flags = []
        self.prepare()

    def prepare(self):
        """Per-episode setup hook."""

    @abstractmethod
    def act(
        self,
        obs: Observation,
        masks: Sequence[Sequence[bool]],
        step: int,
        rng: np.random.Generator,
    ) -> list[Order]:
        """Return one order per living agent, in agent index order.

        `masks[k]` is the 9-action mask of the k-th living agent.
        """

    def flag(self, message: str):
        if message not in self._flags:
            self._flags.append(message)

    def unreachable(self, agent: AgentView, goal: int):
        self.flag(f"{self._team} agent {agent.index}: waypoint {goal} unreachable")

    ### Helpers for scripted movement

    def order(self, action: Action) -> Order:
        """Wrap an action in the move format of the current mode."""
        fire = not self.pacifist
        if self.move_mode == "waypoint":
            return Order(move=int(action), fire=fire)
        direction = action.direction
        return Order(move=(0, 0) if direction is None else direction.offset, fire=fire)

    def field_to(self, node: int) -> dict[int, float]:
        """Unit-cost distance field towards a waypoint, cached per arena."""
        if node not in self._fields:
            self._fields[node] = distance_field(self.arena.graph, node, "unit")
        return self._fields[node]

    def hop_action(self, node: int, goal: int) -> Action | None:
        """First action along a shortest path from node to goal.

        Among equally short paths the hop ending nearest to the goal wins,
        then the smallest id. STAY when already there, None when the goal is
        unreachable.
        """
        if node == goal:
            return Action.STAY
        field = self.field_to(goal)
        if node not in field:
            return None
        graph = self.arena.graph
        target = graph.nodes[goal]
        hop = min(
            shortest_hops(graph, field, node, "unit"),
            key=lambda v: (
                math.hypot(graph.nodes[v].x - target.x, graph.nodes[v].z - target.z),
                v,
            ),
        )
        a, b = graph.nodes[node], graph.nodes[hop]
        return Action.from_step(b.i - a.i, b.j - a.j)

    def step_towards(
        self, agent: AgentView, mask: Sequence[bool], aim: Point
    ) -> Action:
        """Unmasked fine-grained action that ends closest to `aim`."""
        stride = self.arena.stride
        best, best_dist = Action.STAY, math.hypot(aim.x - agent.x, aim.z - agent.z)
        for action in Action:
            direction = action.direction
            if direction is None or not mask[action]:
                continue
            dx, dz = direction.offset
            ex, ez = aim.x - agent.x - dx * stride, aim.z - agent.z - dz * stride
            dist = math.hypot(ex, ez)
            if dist < best_dist - 1e-12:
                best, best_dist = action, dist
        return best

    def move_towards(self, agent: AgentView, mask: Sequence[bool], goal: int) -> Order:
        """Order bringing an agent one step closer to a goal waypoint."""
        arena = self.arena
        if self.move_mode == "waypoint":
            action = self.hop_action(agent.node, goal)  # type: ignore[arg-type]
            if action is None:
                self.unreachable(agent, goal)
                action = Action.STAY
            elif not mask[action]:
                action = Action.STAY
            return self.order(action)

        node = arena.nearest_node(Point(agent.x, agent.z))
        action = self.hop_action(node, goal)
        if action is None:
            self.unreachable(agent, goal)
            return self.order(Action.STAY)
        if action is Action.STAY:
            aim = arena.node_point(goal)
        else:
            edge = arena.graph.edge(node, action.direction)  # type: ignore[arg-type]
            aim = arena.node_point(edge.target)  # type: ignore[union-attr]
        return self.order(self.step_towards(agent, mask, aim))
