"""
Scenario configuration and recipes.

A scenario recipe is a yaml file with the rules under `config` and the
policies of both teams:

```yaml
config:
  blue_starts: [[2.0, 10.0], [2.0, 20.0]]
  red_starts: [[60.0, 12.0]]
  target: [70.0, 15.0]
  team_size: 4
blue:
  policy: greedy_attacker
red:
  policy: static_defender
```
"""

import logging
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, Field

from terrabstract.skirmish.policies import Policies
from terrabstract.skirmish.policies.abstract import Team
from terrabstract.utils import Point, atomic_write

logger = logging.getLogger(__name__)

MoveMode = Literal["waypoint", "finegrained"]


class ScenarioConfig(BaseModel):
    """Rules of a differing-objectives skirmish.

    Attributes:
        blue_starts: start positions (x, z) of the attacking team.
        red_starts: start positions (x, z) of the defending team.
        team_size: agents per team; all agents of a team share its start.
        target: centre (x, z) of the area blue tries to reach.
        target_radius: blue wins when an agent gets this close (horizontally).
        hit_limit: an agent is eliminated once it has taken more hits.
        max_steps: step budget; red wins when it runs out.
        fire_range: maximum shooting distance in meters.
        aim_sigma: standard deviation of the aim jitter in radians.
        target_radius_hit: lateral miss distance that still counts as a hit.
        move_mode: waypoint moves or fine-grained (dx, dz) moves.
        blue_move_mode: overrides `move_mode` for the attacking team.
        red_move_mode: overrides `move_mode` for the defending team.
        agent_speed: fine-grained movement speed in m/s.
        step_dt: duration of one step in seconds.
        rng_seed: default base seed when none is given on the command line.
        eye_height: height of the line of sight above the ground.
    """

    blue_starts: list[Point] = Field(min_length=1)
    red_starts: list[Point] = Field(min_length=1)
    team_size: int = Field(4, ge=1)
    target: Point
    target_radius: float = Field(2.0, gt=0)
    hit_limit: int = Field(5, ge=1)
    max_steps: int = Field(500, ge=1)
    fire_range: float = Field(30.0, gt=0)
    aim_sigma: float = Field(0.05, ge=0)
    target_radius_hit: float = Field(0.5, gt=0)
    move_mode: MoveMode = "waypoint"
    blue_move_mode: MoveMode | None = None
    red_move_mode: MoveMode | None = None
    agent_speed: float = Field(4.0, gt=0)
    step_dt: float = Field(0.5, gt=0)
    rng_seed: int = Field(0, ge=0, lt=2**64)
    eye_height: float = Field(1.7, ge=0)

    def move_mode_of(self, team: Team) -> MoveMode:
        override = self.blue_move_mode if team == "blue" else self.red_move_mode
        return override or self.move_mode


class Scenario(BaseModel):
    """Rules plus the policies of both teams."""

    config: ScenarioConfig
    blue: Policies
    red: Policies

    @classmethod
    def from_recipe(cls, recipe: Path | str):
        with open(recipe, "r") as raw_recipe:
            options = yaml.safe_load(raw_recipe)

        return cls(**options)

    def to_recipe(self):
        """Return the scenario as a recipe string."""
        return yaml.dump(self.model_dump(mode="json"), sort_keys=False)

    def save_recipe(self, path: Path | str):
        """Save the scenario as a recipe file."""
        atomic_write(Path(path), self.to_recipe())
