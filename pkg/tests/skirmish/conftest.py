import pytest

from terrabstract import dummy
from terrabstract.skirmish.scenario import ScenarioConfig
from terrabstract.waygraph import GraphConfig, build_graph


@pytest.fixture
def field(flat21, flat21_graph):
    """21 x 21 m of level ground with waypoints every 2 m."""
    return flat21, flat21_graph


@pytest.fixture
def corridor():
    """A 40 m strip of level ground holding a single row of 21 waypoints."""
    grid = dummy.flat_terrain(ncols=41, nrows=2)
    return grid, build_graph(grid, GraphConfig(spacing=2.0))


@pytest.fixture
def make_config():
    def _make(**overrides):
        options = dict(
            blue_starts=[(2.0, 10.0)],
            red_starts=[(18.0, 10.0)],
            team_size=1,
            target=(10.0, 10.0),
            target_radius=1.0,
            max_steps=50,
        )
        options.update(overrides)
        return ScenarioConfig(**options)

    return _make
