"""Hand-written policies that stand in for trained teams."""

import logging
from typing import Literal, Sequence

import numpy as np
from pydantic import Field, PrivateAttr

from terrabstract.pathfind import Action
from terrabstract.skirmish.policies.abstract import Observation, Order, Policy
from terrabstract.utils import ContractError, Point

logger = logging.getLogger(__name__)


class GreedyAttacker(Policy):
    """Every agent follows the shortest path to the target.

    Attributes:
        target: where to go; defaults to the scenario target.
    """

    policy: Literal["greedy_attacker"] = "greedy_attacker"
    target: Point | None = None

    _goal: int = PrivateAttr(default=0)

    def prepare(self):
        self._goal = self.arena.nearest_node(self.target or self.arena.config.target)

    def act(self, obs: Observation, masks, step: int, rng) -> list[Order]:
        return [
            self.move_towards(agent, mask, self._goal)
            for agent, mask in zip(obs.living, masks)
        ]


class StaticDefender(Policy):
    """Agents hold assigned posts and shoot whatever comes in sight.

    Attributes:
        posts: positions to hold, assigned to agents round robin. Without
            posts every agent holds its start position.
    """

    policy: Literal["static_defender"] = "static_defender"
    posts: list[Point] | None = None

    _post_nodes: list[int] = PrivateAttr(default_factory=list)

    def prepare(self):
        posts = self.posts or []
        self._post_nodes = [self.arena.nearest_node(p) for p in posts]

    def act(self, obs: Observation, masks, step: int, rng) -> list[Order]:
        if not self._post_nodes:
            return [self.order(Action.STAY) for _ in obs.living]
        return [
            self.move_towards(
                agent, mask, self._post_nodes[agent.index % len(self._post_nodes)]
            )
            for agent, mask in zip(obs.living, masks)
        ]


class Patrol(Policy):
    """Agents walk a closed route of waypoints, one route node after another.

    Attributes:
        route: waypoint ids visited in order, then again from the start.
    """

    policy: Literal["patrol"] = "patrol"
    route: list[int] = Field(min_length=1)

    _cursor: dict[int, int] = PrivateAttr(default_factory=dict)

    def prepare(self):
        graph = self.arena.graph
        for node in self.route:
            if not (0 <= node < len(graph.nodes) and graph.nodes[node].valid):
                raise ContractError(f"patrol route contains invalid waypoint {node}")
        self._cursor = {}

    def act(self, obs: Observation, masks, step: int, rng) -> list[Order]:
        arena = self.arena
        orders = []
        for agent, mask in zip(obs.living, masks):
            cursor = self._cursor.get(agent.index, 0)
            if self._arrived(agent, self.route[cursor]):
                cursor = (cursor + 1) % len(self.route)
            self._cursor[agent.index] = cursor
            goal = self.route[cursor]
            if self.move_mode == "waypoint":
                orders.append(self.move_towards(agent, mask, goal))
            else:
                aim = arena.node_point(goal)
                orders.append(self.order(self.step_towards(agent, mask, aim)))
        return orders

    def _arrived(self, agent, node: int) -> bool:
        arena = self.arena
        if self.move_mode == "waypoint":
            return agent.node == node
        aim = arena.node_point(node)
        return np.hypot(aim.x - agent.x, aim.z - agent.z) <= arena.stride / 2


class Hold(Policy):
    """Nobody moves."""

    policy: Literal["hold"] = "hold"

    def act(self, obs: Observation, masks, step: int, rng) -> list[Order]:
        return [self.order(Action.STAY) for _ in obs.living]


class RandomWalk(Policy):
    """Each agent picks uniformly among its allowed actions."""

    policy: Literal["random_walk"] = "random_walk"

    def act(
        self, obs: Observation, masks: Sequence[Sequence[bool]], step: int, rng
    ) -> list[Order]:
        orders = []
        for mask in masks:
            allowed = [a for a in Action if mask[a]]
            orders.append(self.order(allowed[int(rng.integers(len(allowed)))]))
        return orders
