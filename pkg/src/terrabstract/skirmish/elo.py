"""
Elo ratings for skirmish policies.

A table is never mutated in place: `elo_update` returns a new table with the
update appended to its history, so any table can be rebuilt by replaying its
history from the initial ratings.

Example:

    >>> table = EloTable().register("a").register("b")
    >>> table = elo_update(table, "a", "b", 1)
    >>> table.ratings
    {'a': 1208.0, 'b': 1192.0}

"""

import logging
from typing import Iterable, Literal

from pydantic import BaseModel, Field

from terrabstract.config import CONFIG
from terrabstract.skirmish.tournament import WinTable
from terrabstract.utils import UnknownPolicyError, dump_document

logger = logging.getLogger(__name__)

Score = Literal[0, 0.5, 1]


class EloMatch(BaseModel):
    """One rated match: `a` scored `score_a` against `b`."""

    a: str
    b: str
    score_a: float


class EloTable(BaseModel):
    """Ratings of registered policies.

    Attributes:
        ratings: current rating per policy label.
        k_factor: maximum rating change per match.
        initial_rating: rating of newly registered policies.
        matches: number of rated matches per policy.
        history: every match rated so far, in order.
    """

    ratings: dict[str, float] = {}
    k_factor: float = Field(default_factory=lambda: CONFIG.elo_k_factor, gt=0)
    initial_rating: float = Field(default_factory=lambda: CONFIG.elo_initial_rating)
    matches: dict[str, int] = {}
    history: list[EloMatch] = []

    def register(self, policy: str) -> "EloTable":
        """Return a table that knows `policy`; registering twice is a no-op."""
        if policy in self.ratings:
            return self
        return self.model_copy(
            update={
                "ratings": {**self.ratings, policy: self.initial_rating},
                "matches": {**self.matches, policy: 0},
            }
        )

    def ranking(self) -> list[tuple[str, float]]:
        """Policies by descending rating, ties by label."""
        return sorted(self.ratings.items(), key=lambda item: (-item[1], item[0]))

    def to_yaml(self) -> str:
        document = {
            "k_factor": self.k_factor,
            "initial_rating": self.initial_rating,
            "ratings": [
                {"policy": name, "rating": rating, "matches": self.matches[name]}
                for name, rating in self.ranking()
            ],
            "history": [m.model_dump() for m in self.history],
        }
        return dump_document(document)


def expected_score(rating_a: float, rating_b: float) -> float:
    return 1 / (1 + 10 ** ((rating_b - rating_a) / 400))


def elo_update(
    table: EloTable, policy_a: str, policy_b: str, score_a: float
) -> EloTable:
    """Rate one match and return the updated table.

    Raises:
        UnknownPolicyError: either policy was never registered.
    """
    for policy in (policy_a, policy_b):
        if policy not in table.ratings:
            raise UnknownPolicyError(f"policy {policy!r} is not registered")
    if score_a not in (0, 0.5, 1):
        raise ValueError(f"score should be 0, 0.5 or 1, got {score_a}")

    ra, rb = table.ratings[policy_a], table.ratings[policy_b]
    delta = table.k_factor * (score_a - expected_score(ra, rb))
    ratings = {**table.ratings, policy_a: ra + delta}
    ratings[policy_b] = ratings[policy_b] - delta
    matches = {**table.matches}
    matches[policy_a] += 1
    matches[policy_b] += 1
    return table.model_copy(
        update={
            "ratings": ratings,
            "matches": matches,
            "history": [
                *table.history,
                EloMatch(a=policy_a, b=policy_b, score_a=score_a),
            ],
        }
    )


def replay(
    history: Iterable[EloMatch],
    k_factor: float | None = None,
    initial_rating: float | None = None,
) -> EloTable:
    """Rebuild a table from a match history."""
    table = EloTable(
        k_factor=k_factor if k_factor is not None else CONFIG.elo_k_factor,
        initial_rating=(
            initial_rating if initial_rating is not None else CONFIG.elo_initial_rating
        ),
    )
    for match in history:
        table = table.register(match.a).register(match.b)
        table = elo_update(table, match.a, match.b, match.score_a)
    return table


def rate_win_tables(
    tables: Iterable[WinTable], k_factor: float | None = None
) -> EloTable:
    """Rate tournament results episode by episode.

    The roles are asymmetric, so a policy is rated separately per side:
    the labels are `blue/<label>` and `red/<label>`.
    """
    table = EloTable() if k_factor is None else EloTable(k_factor=k_factor)
    n = 0
    for win_table in tables:
        blue, red = f"blue/{win_table.blue}", f"red/{win_table.red}"
        table = table.register(blue).register(red)
        for row in win_table.rows:
            table = elo_update(table, blue, red, 1 if row.winner == "blue" else 0)
            n += 1
    logger.info(f"Rated {n} episodes between {len(table.ratings)} policies")
    return table
