"""Policies that steer a team through a skirmish."""

from typing import Annotated, Union

import yaml
from pydantic import Field, TypeAdapter

from terrabstract.skirmish.policies.abstract import (
    AgentView,
    Observation,
    Order,
    Policy,
)
from terrabstract.skirmish.policies.scripted import (
    GreedyAttacker,
    Hold,
    Patrol,
    RandomWalk,
    StaticDefender,
)

Policies = Annotated[
    Union[
        GreedyAttacker,
        StaticDefender,
        Patrol,
        Hold,
        RandomWalk,
    ],
    Field(discriminator="policy"),
]

__all__ = [
    "AgentView",
    "GreedyAttacker",
    "Hold",
    "Observation",
    "Order",
    "Patrol",
    "Policies",
    "Policy",
    "RandomWalk",
    "StaticDefender",
    "load_policy",
]


def load_policy(recipe: str) -> Policy:
    """Load a policy formatted as (yaml) recipe.

    Args:
        recipe: the yaml representation of the policy.

    """
    model_dict = yaml.safe_load(recipe)

    policy_loader = TypeAdapter(Policies)
    policy = policy_loader.validate_python(model_dict)
    return policy  # type: ignore  # https://github.com/pydantic/pydantic/discussions/7094
