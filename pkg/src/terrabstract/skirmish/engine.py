"""
Deterministic differing-objectives skirmish.

Blue tries to bring any agent into the target area, red defends it. Every
step both policies order their living agents, moves are applied at the same
time, then every agent that was told to fire shoots at the nearest living
enemy it can see within range. Hits are applied after all shots are drawn.
An agent is eliminated once it has taken more than `hit_limit` hits.

The episode ends when a living blue agent is inside the target area (blue
wins), when all blue agents are eliminated (red wins) or when the step
budget runs out (red wins: the area was defended).
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, model_validator
from scipy.stats import norm

from terrabstract.pathfind import Action, action_mask, apply_action
from terrabstract.skirmish.policies import AgentView, Observation, Order, Policy
from terrabstract.skirmish.policies.abstract import Team
from terrabstract.skirmish.rng import policy_stream, shot_stream
from terrabstract.skirmish.scenario import ScenarioConfig
from terrabstract.terrain import TerrainGrid, WalkMask, line_of_sight, walkable_mask
from terrabstract.trajectory import nearest_waypoint
from terrabstract.utils import ContractError, Point, PolicyFault
from terrabstract.waygraph import WaypointGraph

logger = logging.getLogger(__name__)

EndReason = Literal["target_reached", "blue_eliminated", "timeout"]


def resolve_shot(
    rng: np.random.Generator,
    distance: float,
    aim_sigma: float,
    target_radius_hit: float,
) -> bool:
    """Draw the aim jitter of one shot and tell whether it hits.

    The jitter angle is normal with standard deviation `aim_sigma`; the shot
    hits when the lateral miss at the target's distance stays within
    `target_radius_hit`. Shots at distance zero always hit.
    """
    if distance < 0:
        raise ValueError("distance should be non-negative")
    theta = float(rng.normal(0.0, aim_sigma))
    if distance == 0:
        return True
    return abs(theta) <= math.atan2(target_radius_hit, distance)


def hit_probability(
    distance: float, aim_sigma: float, target_radius_hit: float
) -> float:
    """Closed form of the hit rate of `resolve_shot`."""
    if distance == 0 or aim_sigma == 0:
        return 1.0
    return float(2 * norm.cdf(math.atan2(target_radius_hit, distance) / aim_sigma) - 1)


@dataclass
class AgentState:
    team: Team
    index: int
    x: float
    z: float
    node: int | None = None
    hits_taken: int = 0
    hits_dealt: int = 0
    alive: bool = True

    def view(self) -> AgentView:
        return AgentView(
            index=self.index,
            x=self.x,
            z=self.z,
            node=self.node,
            hits_taken=self.hits_taken,
            alive=self.alive,
        )


class AgentRecord(BaseModel):
    team: Team
    index: int
    hits_dealt: int
    hits_taken: int
    alive_at_end: bool


class MatchResult(BaseModel):
    """Outcome of one episode."""

    winner: Team
    end_reason: EndReason
    steps: int
    blue_start: int
    red_start: int
    seed: int
    repeat: int = 0
    agents: list[AgentRecord]
    flags: list[str] = []

    @model_validator(mode="after")
    def _winner_matches_reason(self):
        if (self.winner == "blue") != (self.end_reason == "target_reached"):
            raise ValueError("blue wins exactly when the target is reached")
        return self


class Arena:
    """Terrain, graph and rules shared by the episodes of a tournament.

    Caches nearest-waypoint lookups, waypoint action masks and
    waypoint-to-waypoint line of sight.
    """

    def __init__(
        self,
        grid: TerrainGrid,
        graph: WaypointGraph,
        config: ScenarioConfig,
        mask: WalkMask | None = None,
    ):
        self.grid = grid
        self.graph = graph
        self.config = config
        self.mask = mask or walkable_mask(grid, graph.config.slope_max_deg)
        self.stride = config.agent_speed * config.step_dt
        self._nearest: dict[Point, int] = {}
        self._sight: dict[tuple[int, int], bool] = {}
        self._masks: dict[int, list[bool]] = {}

        for point in [*config.blue_starts, *config.red_starts, config.target]:
            if not grid.contains(*point):
                raise ContractError(f"{tuple(point)} is outside the terrain extent")
        starts_of: dict[Team, list[Point]] = {
            "blue": config.blue_starts,
            "red": config.red_starts,
        }
        for team, starts in starts_of.items():
            if config.move_mode_of(team) == "waypoint":
                for point in [*starts, config.target]:
                    self.nearest_node(Point(*point))

    def nearest_node(self, point: Point) -> int:
        point = Point(*point)
        if point not in self._nearest:
            if not self.grid.contains(*point):
                raise ContractError(f"{tuple(point)} is outside the terrain extent")
            y = self.grid.height_at(*point)
            self._nearest[point] = nearest_waypoint(self.graph, (point.x, y, point.z))
        return self._nearest[point]

    def node_point(self, node: int) -> Point:
        n = self.graph.nodes[node]
        return Point(n.x, n.z)

    def ground(self, x: float, z: float) -> float:
        return float(self.grid.heights_at(x, z))

    def height(self, agent: AgentState) -> float:
        if agent.node is not None:
            return self.graph.nodes[agent.node].y
        return self.ground(agent.x, agent.z)

    def distance(self, a: AgentState, b: AgentState) -> float:
        return math.dist((a.x, self.height(a), a.z), (b.x, self.height(b), b.z))

    def visible(self, a: AgentState, b: AgentState) -> bool:
        if a.node is not None and b.node is not None:
            key = (a.node, b.node)
            if key not in self._sight:
                self._sight[key] = self.grid_sight(a, b)
            return self._sight[key]
        return self.grid_sight(a, b)

    def grid_sight(self, a: AgentState, b: AgentState) -> bool:
        return line_of_sight(
            self.grid, Point(a.x, a.z), Point(b.x, b.z), self.config.eye_height
        )

    def fine_mask(self, x: float, z: float) -> list[bool]:
        """Fine-grained moves that stay on walkable terrain."""
        mask = [True]
        for action in list(Action)[1:]:
            dx, dz = action.direction.offset  # type: ignore[union-attr]
            nx, nz = x + dx * self.stride, z + dz * self.stride
            inside = self.grid.contains(nx, nz)
            mask.append(inside and self.mask[self.grid.cell_of(nx, nz)])
        return mask

    def node_mask(self, node: int) -> list[bool]:
        if node not in self._masks:
            self._masks[node] = action_mask(self.graph, node)
        return self._masks[node]

    def mask_of(self, agent: AgentState) -> list[bool]:
        if agent.node is not None:
            return list(self.node_mask(agent.node))
        return self.fine_mask(agent.x, agent.z)

    def spawn(self, team: Team, start: Point) -> list[AgentState]:
        agents = []
        for index in range(self.config.team_size):
            if self.config.move_mode_of(team) == "waypoint":
                node = self.nearest_node(start)
                x, z = self.node_point(node)
                agents.append(AgentState(team, index, x, z, node=node))
            else:
                agents.append(AgentState(team, index, start.x, start.z))
        return agents

    def run_episode(
        self,
        blue: Policy,
        red: Policy,
        episode_seed: int,
        blue_start: int = 0,
        red_start: int = 0,
        repeat: int = 0,
        transcript: list | None = None,
    ) -> MatchResult:
        """Play one episode; see the module docstring for the rules.

        Raises:
            PolicyFault: a policy returned a malformed set of orders.
        """
        cfg = self.config
        teams: dict[Team, list[AgentState]] = {
            "blue": self.spawn("blue", Point(*cfg.blue_starts[blue_start])),
            "red": self.spawn("red", Point(*cfg.red_starts[red_start])),
        }
        policies: dict[Team, Policy] = {"blue": blue, "red": red}
        streams = {team: policy_stream(episode_seed, team) for team in policies}
        for team, policy in policies.items():
            policy.reset(self, team)

        end_reason: EndReason = "timeout"
        step = 0
        while step < cfg.max_steps:
            step += 1
            orders = {
                team: self._ask(policy, team, teams, step, streams[team])
                for team, policy in policies.items()
            }
            for team, agents in teams.items():
                living = [a for a in agents if a.alive]
                for agent, order in zip(living, orders[team]):
                    self._move(agent, order)

            shots = self._fire(teams, orders, episode_seed, step)
            if transcript is not None:
                transcript.append(self._record(step, teams, shots))

            if any(self._in_target(a) for a in teams["blue"] if a.alive):
                end_reason = "target_reached"
                break
            if not any(a.alive for a in teams["blue"]):
                end_reason = "blue_eliminated"
                break

        result = MatchResult(
            winner="blue" if end_reason == "target_reached" else "red",
            end_reason=end_reason,
            steps=step,
            blue_start=blue_start,
            red_start=red_start,
            seed=episode_seed,
            repeat=repeat,
            agents=[
                AgentRecord(
                    team=a.team,
                    index=a.index,
                    hits_dealt=a.hits_dealt,
                    hits_taken=a.hits_taken,
                    alive_at_end=a.alive,
                )
                for team in ("blue", "red")
                for a in teams[team]  # type: ignore[index]
            ],
            flags=[*blue.flags, *red.flags],
        )
        logger.debug(
            f"Episode {blue_start}/{red_start}: {result.winner} after {step} steps "
            f"({end_reason})"
        )
        return result

    def _ask(
        self,
        policy: Policy,
        team: Team,
        teams: dict[Team, list[AgentState]],
        step: int,
        rng: np.random.Generator,
    ) -> list[Order]:
        own = teams[team]
        enemy_team: Team = "red" if team == "blue" else "blue"
        living = [a for a in own if a.alive]
        enemies = tuple(
            e.view()
            for e in teams[enemy_team]
            if e.alive and any(self.visible(a, e) for a in living)
        )
        obs = Observation(
            team=team,
            step=step,
            move_mode=self.config.move_mode_of(team),
            target=Point(*self.config.target),
            own=tuple(a.view() for a in own),
            enemies=enemies,
        )
        masks = [self.mask_of(a) for a in living]
        orders = policy.act(obs, masks, step, rng)
        self._check_orders(policy, orders, len(living), obs.move_mode)
        return list(orders)

    def _check_orders(self, policy: Policy, orders, expected: int, mode: str):
        if not isinstance(orders, (list, tuple)):
            raise PolicyFault(
                policy.label, f"expected a list of orders, got {orders!r}"
            )
        if len(orders) != expected:
            raise PolicyFault(
                policy.label, f"expected {expected} orders, got {len(orders)}"
            )
        for order in orders:
            if not isinstance(order, Order) or not isinstance(order.fire, bool):
                raise PolicyFault(policy.label, f"malformed order {order!r}")
            move = order.move
            if mode == "waypoint":
                ok = (
                    isinstance(move, int)
                    and not isinstance(move, bool)
                    and 0 <= move <= 8
                )
            else:
                ok = (
                    isinstance(move, tuple)
                    and len(move) == 2
                    and all(isinstance(m, int) and m in (-1, 0, 1) for m in move)
                )
            if not ok:
                raise PolicyFault(policy.label, f"invalid move {move!r}")

    def _move(self, agent: AgentState, order: Order):
        if agent.node is not None:
            action = Action(order.move)  # type: ignore[arg-type]
            if self.node_mask(agent.node)[action]:
                agent.node = apply_action(self.graph, agent.node, action)
                agent.x, agent.z = self.node_point(agent.node)
            return
        dx, dz = order.move  # type: ignore[misc]
        action = Action.from_step(dx, dz)
        if self.fine_mask(agent.x, agent.z)[action]:
            agent.x += dx * self.stride
            agent.z += dz * self.stride

    def _fire(self, teams, orders, seed: int, step: int) -> list[list]:
        cfg = self.config
        shots = []
        pending: list[tuple[AgentState, AgentState]] = []
        for team, agents in teams.items():
            enemies = teams["red" if team == "blue" else "blue"]
            living = [a for a in agents if a.alive]
            for shooter, order in zip(living, orders[team]):
                if not order.fire:
                    continue
                target, distance = self._aim(shooter, enemies)
                if target is None:
                    continue
                rng = shot_stream(seed, team, shooter.index, step)
                hit = resolve_shot(rng, distance, cfg.aim_sigma, cfg.target_radius_hit)
                shots.append([team, shooter.index, target.index, hit])
                if hit:
                    pending.append((shooter, target))

        for shooter, target in pending:
            shooter.hits_dealt += 1
            target.hits_taken += 1
        for agents in teams.values():
            for agent in agents:
                if agent.alive and agent.hits_taken > cfg.hit_limit:
                    agent.alive = False
        return shots

    def _aim(
        self, shooter: AgentState, enemies: Sequence[AgentState]
    ) -> tuple[AgentState | None, float]:
        """Nearest living enemy in sight and range with its distance.

        The lowest index wins ties.
        """
        best, best_dist = None, math.inf
        for enemy in enemies:
            if not enemy.alive:
                continue
            dist = self.distance(shooter, enemy)
            if dist > self.config.fire_range or dist >= best_dist:
                continue
            if self.visible(shooter, enemy):
                best, best_dist = enemy, dist
        return best, best_dist

    def _in_target(self, agent: AgentState) -> bool:
        tx, tz = self.config.target
        return math.hypot(agent.x - tx, agent.z - tz) <= self.config.target_radius

    @staticmethod
    def _record(step: int, teams, shots) -> dict:
        return {
            "step": step,
            "agents": [
                [a.team, a.index, a.x, a.z, a.hits_taken, a.alive]
                for agents in teams.values()
                for a in agents
            ],
            "shots": shots,
        }


def run_episode(
    grid: TerrainGrid,
    graph: WaypointGraph,
    cfg: ScenarioConfig,
    blue: Policy,
    red: Policy,
    episode_seed: int,
    blue_start: int = 0,
    red_start: int = 0,
    transcript: list | None = None,
) -> MatchResult:
    """Play a single episode on a fresh arena."""
    arena = Arena(grid, graph, cfg)
    return arena.run_episode(
        blue, red, episode_seed, blue_start, red_start, transcript=transcript
    )
