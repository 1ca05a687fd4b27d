import time

import pytest

from terrabstract import dummy
from terrabstract.skirmish.policies import GreedyAttacker, StaticDefender
from terrabstract.skirmish.scenario import ScenarioConfig
from terrabstract.skirmish.tournament import tournament
from terrabstract.waygraph import GraphConfig, build_graph


@pytest.fixture(scope="module")
def hills():
    return dummy.random_terrain(ncols=96, nrows=96, relief=3.0, seed=5)


@pytest.mark.performance
def test_build_graph_at_full_scale(hills):
    start = time.perf_counter()
    graph = build_graph(hills, GraphConfig(spacing=2.0))
    elapsed = time.perf_counter() - start
    assert len(graph.valid_ids) >= 1812
    assert elapsed < 1.0


@pytest.mark.performance
def test_tournament_at_full_scale(hills):
    graph = build_graph(hills, GraphConfig(spacing=2.0))
    cfg = ScenarioConfig(
        blue_starts=[(4.0, 8.0 * k + 4) for k in range(10)],
        red_starts=[(80.0, 8.0 * k + 4) for k in range(10)],
        team_size=4,
        target=(90.0, 48.0),
        max_steps=500,
    )
    start = time.perf_counter()
    table = tournament(hills, graph, cfg, GreedyAttacker(), StaticDefender(), 0)
    elapsed = time.perf_counter() - start
    assert len(table.rows) == 100
    assert elapsed < 10.0
