"""
Counter-based random streams for reproducible episodes.

All randomness comes from numpy's Philox4x64-10 generator. Streams are keyed
with SplitMix64 folds of the episode seed, the team and the agent index, and
the Philox counter is set to the step number, so every agent has its own
substream per step. Adding agents or steps never shifts the draws of others.
"""

import numpy as np

from terrabstract.utils import mix_seed

TEAM_CODES = {"blue": 1, "red": 2}
POLICY_STREAM = 0xFFFF


def episode_seed(
    base_seed: int, blue_start: int, red_start: int, repeat: int = 0
) -> int:
    """Seed of one tournament episode."""
    return mix_seed(base_seed, blue_start, red_start, repeat)


def shot_stream(seed: int, team: str, agent: int, step: int) -> np.random.Generator:
    """Generator for the shot an agent fires at a given step."""
    key = mix_seed(seed, TEAM_CODES[team], agent)
    return np.random.Generator(np.random.Philox(key=key, counter=step))


def policy_stream(seed: int, team: str) -> np.random.Generator:
    """Generator handed to a team's policy for a whole episode."""
    key = mix_seed(seed, TEAM_CODES[team], POLICY_STREAM)
    return np.random.Generator(np.random.Philox(key=key))
