import pytest

from terrabstract import dummy
from terrabstract.waygraph import GraphConfig, build_graph

### Add a marker to skip slow performance tests
# https://docs.pytest.org/en/latest/example/simple.html#control-skipping-of-tests-according-to-command-line-option


def pytest_addoption(parser):
    # store_true sets option to True if options is passed, default is False
    parser.addoption(
        "--include-performance",
        action="store_true",
        help="Also run the timing checks at full scale.",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "performance: mark test as a timing check")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--include-performance"):
        return
    skip_performance = pytest.mark.skip(
        reason="need --include-performance option to run"
    )
    for item in items:
        if "performance" in item.keywords:
            item.add_marker(skip_performance)


### Terrains and graphs


@pytest.fixture
def flat3():
    """3x3 samples of level ground, 1 m apart."""
    return dummy.flat_terrain()


@pytest.fixture
def flat3_graph(flat3):
    return build_graph(flat3, GraphConfig(spacing=1.0))


@pytest.fixture
def flat21():
    return dummy.flat_terrain(ncols=21, nrows=21)


@pytest.fixture
def flat21_graph(flat21):
    return build_graph(flat21, GraphConfig(spacing=2.0))

