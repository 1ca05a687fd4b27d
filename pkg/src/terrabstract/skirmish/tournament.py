"""Tournaments over every combination of blue and red start positions."""

import logging
from collections import Counter

from pydantic import BaseModel, computed_field

from terrabstract.skirmish.engine import Arena, MatchResult
from terrabstract.skirmish.policies import Policy
from terrabstract.skirmish.rng import episode_seed
from terrabstract.skirmish.scenario import ScenarioConfig
from terrabstract.terrain import TerrainGrid
from terrabstract.utils import EpisodeError, TerrabstractError, dump_document
from terrabstract.waygraph import WaypointGraph

logger = logging.getLogger(__name__)


class WinTable(BaseModel):
    """Results of a tournament, one row per episode in pair order.

    Attributes:
        blue: label of the blue policy.
        red: label of the red policy.
        base_seed: seed every episode seed was mixed from.
        episodes_per_pair: repetitions of each start pair.
        rows: episode results ordered by (blue_start, red_start, repeat).
    """

    blue: str
    red: str
    base_seed: int
    episodes_per_pair: int = 1
    rows: list[MatchResult]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def blue_wins(self) -> int:
        return sum(row.winner == "blue" for row in self.rows)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def red_wins(self) -> int:
        return sum(row.winner == "red" for row in self.rows)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def end_reasons(self) -> dict[str, int]:
        counts = Counter(row.end_reason for row in self.rows)
        return {
            reason: counts[reason]
            for reason in ("target_reached", "blue_eliminated", "timeout")
        }

    def pair_win_rates(self) -> dict[tuple[int, int], float]:
        """Fraction of blue wins per (blue_start, red_start)."""
        wins: Counter = Counter()
        played: Counter = Counter()
        for row in self.rows:
            key = (row.blue_start, row.red_start)
            played[key] += 1
            wins[key] += row.winner == "blue"
        return {key: wins[key] / played[key] for key in sorted(played)}

    def to_document(self) -> dict:
        return {
            "blue": self.blue,
            "red": self.red,
            "base_seed": self.base_seed,
            "episodes_per_pair": self.episodes_per_pair,
            "totals": {
                "episodes": len(self.rows),
                "blue_wins": self.blue_wins,
                "red_wins": self.red_wins,
                **self.end_reasons,
            },
            "pair_win_rates": [
                [b, r, rate] for (b, r), rate in self.pair_win_rates().items()
            ],
            "rows": [row.model_dump(mode="json") for row in self.rows],
        }

    def to_yaml(self) -> str:
        return dump_document(self.to_document(), flow_lists=True)

    @classmethod
    def from_document(cls, document: dict) -> "WinTable":
        derived = {"totals", "pair_win_rates"}
        fields = {k: v for k, v in document.items() if k not in derived}
        return cls.model_validate(fields)


def tournament(
    grid: TerrainGrid,
    graph: WaypointGraph,
    cfg: ScenarioConfig,
    blue: Policy,
    red: Policy,
    base_seed: int,
    episodes_per_pair: int = 1,
    transcript: list | None = None,
) -> WinTable:
    """Play every (blue start, red start) pair.

    Episode seeds are `episode_seed(base_seed, blue_start, red_start, repeat)`
    so each row can be replayed on its own.

    Args:
        transcript: if given, receives one record per step of every episode,
            each tagged with its start pair and repeat.

    Raises:
        EpisodeError: an episode failed; the error names the start pair.
    """
    if episodes_per_pair < 1:
        raise ValueError("episodes_per_pair should be at least 1")
    arena = Arena(grid, graph, cfg)
    rows = []
    for b in range(len(cfg.blue_starts)):
        for r in range(len(cfg.red_starts)):
            for repeat in range(episodes_per_pair):
                seed = episode_seed(base_seed, b, r, repeat)
                steps: list | None = [] if transcript is not None else None
                try:
                    result = arena.run_episode(
                        blue, red, seed, b, r, repeat=repeat, transcript=steps
                    )
                except TerrabstractError as e:
                    raise EpisodeError(b, r, e) from e
                rows.append(result)
                if transcript is not None:
                    transcript.extend(
                        {"blue_start": b, "red_start": r, "repeat": repeat, **record}
                        for record in steps  # type: ignore[union-attr]
                    )

    table = WinTable(
        blue=blue.label,
        red=red.label,
        base_seed=base_seed,
        episodes_per_pair=episodes_per_pair,
        rows=rows,
    )
    logger.info(
        f"Tournament {table.blue} vs {table.red}: {len(rows)} episodes, "
        f"blue {table.blue_wins}, red {table.red_wins}"
    )
    return table
