import math
from collections import deque
from itertools import combinations

import numpy as np
import pytest
import yaml
from scipy.sparse import lil_matrix
from scipy.sparse.csgraph import dijkstra

from terrabstract import dummy
from terrabstract.terrain import TerrainGrid, walkable_mask
from terrabstract.utils import (
    ContractError,
    GraphConfigError,
    GraphLoadError,
    SeedError,
)
from terrabstract.waygraph import (
    Direction,
    GraphConfig,
    Waypoint,
    build_graph,
    dump_graph,
    fill_gaps,
    generate,
    load_graph,
    revalidate,
    save_graph,
    validate_edge,
    walk_length,
)


def slope_census(grid, slope_max_deg):
    """Walkable samples, checked one neighbour pair at a time."""
    h = grid.heights
    walkable = np.ones(h.shape, dtype=bool)
    for r, c in np.ndindex(h.shape):
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                nr, nc = r + dr, c + dc
                if (dr, dc) == (0, 0) or not (
                    0 <= nr < h.shape[0] and 0 <= nc < h.shape[1]
                ):
                    continue
                run = grid.cell_size * math.hypot(dr, dc)
                rise = abs(h[r, c] - h[nr, nc])
                if math.degrees(math.atan2(rise, run)) > slope_max_deg + 1e-9:
                    walkable[r, c] = False
    return walkable


def lattice_census(grid, cfg):
    """Lattice points on walkable ground, from the nearest sample to each point."""
    walkable = slope_census(grid, cfg.slope_max_deg)
    xs = grid.origin_x + grid.cell_size * np.arange(grid.ncols)
    zs = grid.origin_z + grid.cell_size * np.arange(grid.nrows)
    reach = int(max(grid.width, grid.depth) / cfg.spacing) + 2
    census = set()
    for i in range(-reach, reach + 1):
        x = cfg.seed_x + i * cfg.spacing
        if not xs[0] - 1e-9 <= x <= xs[-1] + 1e-9:
            continue
        col = int(np.argmin(np.abs(xs - x)))
        for j in range(-reach, reach + 1):
            z = cfg.seed_z + j * cfg.spacing
            if not zs[0] - 1e-9 <= z <= zs[-1] + 1e-9:
                continue
            if walkable[int(np.argmin(np.abs(zs - z))), col]:
                census.add((i, j))
    return census


def walkable_seed(grid, walkable):
    """World position of the walkable sample closest to the middle of the map."""
    rows, cols = np.nonzero(walkable)
    assert len(rows), "no walkable ground at all"
    mid_r, mid_c = (grid.nrows - 1) / 2, (grid.ncols - 1) / 2
    k = int(np.argmin((rows - mid_r) ** 2 + (cols - mid_c) ** 2))
    return grid.cell_center(int(cols[k]), int(rows[k]))


def valid_lattice(graph):
    return {(n.i, n.j) for n in graph.nodes if n.valid}


def check_symmetry(graph):
    for edge in graph.edges():
        twin = graph.edge(edge.target, edge.direction.opposite)
        assert twin is not None
        assert twin.target == edge.source
        assert twin.valid == edge.valid


@pytest.fixture
def split_terrain():
    """Flat ground with a full north-south wall at x = 10."""
    return dummy.wall_terrain(ncols=21, nrows=21, wall_col=10)


@pytest.fixture
def u_terrain():
    """A short wall between x = 2 and x = 6 that has to be walked around."""
    return dummy.wall_terrain(
        ncols=13, nrows=13, wall_col=4, gap_rows=[*range(5), *range(8, 13)]
    )


def test_direction_opposites():
    for direction in Direction:
        assert direction.opposite.opposite is direction
        di, dj = direction.offset
        assert direction.opposite.offset == (-di, -dj)


def test_vstep_default():
    assert GraphConfig(spacing=3.0).vstep_max == 1.5
    assert GraphConfig(spacing=3.0, vstep_max=0.2).vstep_max == 0.2


def test_config_rejects_detour_below_one():
    with pytest.raises(ValueError):
        GraphConfig(detour_max=1.0)


def test_generate_flat_3x3(flat3):
    cfg = GraphConfig(spacing=1.0, seed_x=1.0, seed_z=1.0)
    graph = generate(flat3, walkable_mask(flat3, 45), cfg)
    assert len(graph) == 9
    assert all(n.valid for n in graph.nodes)

    lattice = [(n.i, n.j) for n in graph.nodes]
    expected = {
        frozenset((a, b))
        for a, b in combinations(lattice, 2)
        if max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1
    }
    edges = {
        frozenset((graph.nodes[e.source].lattice, graph.nodes[e.target].lattice))
        for e in graph.edges()
    }
    assert edges == expected
    summary = graph.summary()
    assert summary["edges"] == 20
    assert summary["valid_edges"] == 20
    check_symmetry(graph)


def test_generate_starts_at_seed(flat3):
    cfg = GraphConfig(spacing=1.0, seed_x=1.0, seed_z=1.0)
    graph = generate(flat3, walkable_mask(flat3, 45), cfg)
    first = graph.nodes[0]
    assert (first.i, first.j, first.x, first.z) == (0, 0, 1.0, 1.0)
    # neighbours follow in N, NE, E, ... order
    assert [(n.i, n.j) for n in graph.nodes[1:4]] == [(0, 1), (1, 1), (1, 0)]


def test_generate_seed_unwalkable():
    heights = np.zeros((3, 3))
    heights[1, 1] = 1.0
    grid = TerrainGrid(cell_size=1.0, origin_x=0, origin_z=0, heights=heights)
    with pytest.raises(SeedError):
        generate(grid, walkable_mask(grid, 30), GraphConfig(spacing=1.0))


def test_generate_seed_outside(flat3):
    with pytest.raises(SeedError):
        generate(flat3, walkable_mask(flat3, 45), GraphConfig(seed_x=5.0))


def test_generate_spacing_too_small():
    grid = dummy.flat_terrain(cell_size=4.0)
    with pytest.raises(GraphConfigError):
        generate(grid, walkable_mask(grid, 45), GraphConfig(spacing=0.5))


def lattice_bfs(census, start):
    seen = {start}
    queue = deque([start])
    while queue:
        i, j = queue.popleft()
        for di, dj in (d.offset for d in Direction):
            nxt = (i + di, j + dj)
            if nxt in census and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def test_generate_split_map(split_terrain):
    cfg = GraphConfig(spacing=2.0, seed_x=2.0, seed_z=2.0)
    graph = generate(split_terrain, walkable_mask(split_terrain, 45), cfg)
    census = lattice_census(split_terrain, cfg)
    assert valid_lattice(graph) == lattice_bfs(census, (0, 0))
    assert all(n.x < 10 for n in graph.nodes if n.valid)


def test_fill_gaps_split_map(split_terrain):
    cfg = GraphConfig(spacing=2.0, seed_x=2.0, seed_z=2.0)
    mask = walkable_mask(split_terrain, 45)
    first = generate(split_terrain, mask, cfg)
    graph = fill_gaps(first, split_terrain, mask)
    assert len(first) < len(graph)
    assert valid_lattice(graph) == lattice_census(split_terrain, cfg)
    assert len(valid_lattice(graph)) == 110
    assert len(graph.components()) == 2
    assert [n.id for n in graph.nodes] == list(range(len(graph)))
    check_symmetry(graph)


def test_fill_gaps_idempotent(split_terrain):
    cfg = GraphConfig(spacing=2.0)
    mask = walkable_mask(split_terrain, 45)
    graph = build_graph(split_terrain, cfg, mask)
    assert fill_gaps(graph, split_terrain, mask) == graph


def test_fill_gaps_complete_graph_unchanged(flat21, flat21_graph):
    mask = walkable_mask(flat21, 45)
    assert len(fill_gaps(flat21_graph, flat21, mask)) == len(flat21_graph)


@pytest.mark.parametrize("seed", range(20))
def test_graph_covers_lattice_census(seed):
    size = 24 + seed
    grid = dummy.random_terrain(ncols=size, nrows=size, relief=10.0, seed=seed)
    x, z = walkable_seed(grid, slope_census(grid, 30))
    cfg = GraphConfig(spacing=2.0, slope_max_deg=30, seed_x=x, seed_z=z)
    graph = build_graph(grid, cfg)
    assert valid_lattice(graph) == lattice_census(grid, cfg)
    check_symmetry(graph)
    assert revalidate(graph, grid) == []


def node(i, j, grid, spacing, node_id, y=None):
    x, z = i * spacing, j * spacing
    return Waypoint(
        id=node_id,
        i=i,
        j=j,
        x=x,
        y=grid.height_at(x, z) if y is None else y,
        z=z,
        valid=True,
    )


def test_validate_edge_flat(flat3):
    cfg = GraphConfig(spacing=1.0)
    a, b = node(0, 0, flat3, 1.0, 0), node(1, 0, flat3, 1.0, 1)
    edge = validate_edge(flat3, walkable_mask(flat3, 45), a, b, cfg)
    assert edge.valid
    assert edge.direction is Direction.E
    assert edge.walk_len / edge.euclid_len == pytest.approx(1.0, abs=1e-6)


def test_validate_edge_vertical():
    grid = dummy.ramp_terrain(slope_deg=30)
    rise = math.tan(math.radians(30))
    cfg = GraphConfig(spacing=1.0, vstep_max=rise - 0.1)
    mask = walkable_mask(grid, 45)
    a, b = node(2, 2, grid, 1.0, 0), node(3, 2, grid, 1.0, 1)
    edge = validate_edge(grid, mask, a, b, cfg)
    assert not edge.valid
    assert edge.reason == "vertical"
    # along the contour there is no height difference
    assert validate_edge(grid, mask, a, node(2, 3, grid, 1.0, 2), cfg).valid


def cell_graph(grid, walkable):
    """Sparse 8-connected graph over all walkable cells, indexed row-major."""
    adjacency = lil_matrix((grid.ncols * grid.nrows,) * 2)
    for r, c in zip(*np.nonzero(walkable)):
        for d in Direction:
            dc, dr = d.offset
            nc, nr = c + dc, r + dr
            if 0 <= nc < grid.ncols and 0 <= nr < grid.nrows and walkable[nr, nc]:
                weight = grid.cell_size * math.hypot(dc, dr)
                adjacency[r * grid.ncols + c, nr * grid.ncols + nc] = weight
    return adjacency.tocsr()


def grid_oracle(grid, mask, start, goal):
    """Dijkstra over all walkable cells."""
    distances = dijkstra(
        cell_graph(grid, mask.walkable), indices=start[1] * grid.ncols + start[0]
    )
    return distances[goal[1] * grid.ncols + goal[0]]


def test_validate_edge_detour(u_terrain):
    cfg = GraphConfig(spacing=4.0, detour_max=1.5)
    mask = walkable_mask(u_terrain, 45)
    a = Waypoint(id=0, i=0, j=0, x=2.0, y=0.0, z=6.0, valid=True)
    b = Waypoint(id=1, i=1, j=0, x=6.0, y=0.0, z=6.0, valid=True)
    edge = validate_edge(u_terrain, mask, a, b, cfg)
    assert not edge.valid
    assert edge.reason == "detour"
    assert edge.walk_len == pytest.approx(grid_oracle(u_terrain, mask, (2, 6), (6, 6)))
    assert edge.walk_len == pytest.approx(6 + 2 * math.sqrt(2))


def test_validate_edge_not_neighbours(flat3):
    cfg = GraphConfig(spacing=1.0)
    a, b = node(0, 0, flat3, 1.0, 0), node(2, 0, flat3, 1.0, 1)
    with pytest.raises(ContractError):
        validate_edge(flat3, walkable_mask(flat3, 45), a, b, cfg)


def test_walk_length_blocked(split_terrain):
    mask = walkable_mask(split_terrain, 45)
    assert walk_length(split_terrain, mask, (8, 5), (12, 5)) == math.inf


@pytest.mark.parametrize("seed", range(20))
def test_valid_edges_satisfy_rules(seed):
    grid = dummy.random_terrain(ncols=30, nrows=30, relief=8.0, seed=100 + seed)
    walkable = slope_census(grid, 35)
    x, z = walkable_seed(grid, walkable)
    cfg = GraphConfig(spacing=2.0, slope_max_deg=35, seed_x=x, seed_z=z)
    graph = build_graph(grid, cfg)
    cell = lambda n: grid.cell_of(n.x, n.z)  # noqa: E731
    sources = sorted({r * grid.ncols + c for c, r in map(cell, graph.nodes)})
    distances = dijkstra(cell_graph(grid, walkable), indices=sources)
    row_of = {index: k for k, index in enumerate(sources)}

    def oracle(a, b):
        (ca, ra), (cb, rb) = cell(a), cell(b)
        return distances[row_of[ra * grid.ncols + ca], rb * grid.ncols + cb]

    for n in graph.nodes:
        c, r = cell(n)
        assert n.valid == walkable[r, c]
    for edge in graph.edges():
        a, b = graph.nodes[edge.source], graph.nodes[edge.target]
        if not (a.valid and b.valid):
            assert not edge.valid
            continue
        shortest = oracle(a, b)
        # the edge search is boxed in, so it can only be longer
        assert edge.walk_len >= shortest - 1e-9
        if edge.valid:
            assert math.isfinite(shortest)
            assert abs(a.y - b.y) <= cfg.vstep_max
            assert edge.walk_len / edge.euclid_len <= cfg.detour_max + 1e-9
        elif edge.reason == "vertical":
            assert abs(a.y - b.y) > cfg.vstep_max
        elif edge.reason == "detour":
            assert edge.walk_len / edge.euclid_len > cfg.detour_max
        else:
            assert edge.walk_len == math.inf


@pytest.mark.parametrize("seed", range(20))
def test_walk_length_matches_cell_dijkstra(seed):
    grid = dummy.random_terrain(ncols=16, nrows=16, relief=6.0, seed=200 + seed)
    mask = walkable_mask(grid, 35)
    distances = dijkstra(cell_graph(grid, mask.walkable))
    rng = np.random.default_rng(seed)
    rows, cols = np.nonzero(mask.walkable)
    for _ in range(40):
        k0, k1 = rng.integers(len(rows), size=2)
        start, goal = (int(cols[k0]), int(rows[k0])), (int(cols[k1]), int(rows[k1]))
        walked = walk_length(grid, mask, start, goal)
        shortest = distances[
            start[1] * grid.ncols + start[0], goal[1] * grid.ncols + goal[0]
        ]
        span = max(abs(start[0] - goal[0]), abs(start[1] - goal[1]))
        box_is_whole_map = (
            min(start[0], goal[0]) - span <= 0
            and max(start[0], goal[0]) + span >= grid.ncols - 1
            and min(start[1], goal[1]) - span <= 0
            and max(start[1], goal[1]) + span >= grid.nrows - 1
        )
        if box_is_whole_map:
            assert walked == pytest.approx(shortest)
        else:
            assert walked >= shortest - 1e-9


def test_walk_length_open_ground_is_octile(flat21):
    mask = walkable_mask(flat21, 45)
    assert walk_length(flat21, mask, (0, 0), (20, 5)) == pytest.approx(
        5 * math.sqrt(2) + 15
    )
    assert walk_length(flat21, mask, (3, 17), (3, 2)) == pytest.approx(15.0)


def test_monotone_thresholds():
    grid = dummy.random_terrain(ncols=30, nrows=30, relief=3.0, seed=8)
    strict = build_graph(grid, GraphConfig(spacing=2.0, detour_max=1.2, vstep_max=0.3))
    loose = build_graph(grid, GraphConfig(spacing=2.0, detour_max=2.0, vstep_max=0.8))
    loose_valid = {(e.source, e.direction) for e in loose.edges() if e.valid}
    for edge in strict.edges():
        if edge.valid:
            assert (edge.source, edge.direction) in loose_valid


def test_dump_deterministic(split_terrain):
    cfg = GraphConfig(spacing=2.0)
    first = dump_graph(build_graph(split_terrain, cfg))
    second = dump_graph(build_graph(split_terrain, cfg))
    assert first == second


def test_save_load(tmp_path, flat3_graph):
    path = tmp_path / "flat.graph"
    save_graph(flat3_graph, path)
    loaded = load_graph(path)
    assert loaded.config == flat3_graph.config
    assert loaded.nodes == flat3_graph.nodes
    for ours, theirs in zip(flat3_graph.edges(), loaded.edges()):
        assert (ours.source, ours.target, ours.direction, ours.valid, ours.reason) == (
            theirs.source,
            theirs.target,
            theirs.direction,
            theirs.valid,
            theirs.reason,
        )
        assert theirs.euclid_len == pytest.approx(ours.euclid_len, abs=1e-6)
    assert dump_graph(loaded) == dump_graph(flat3_graph)


def edit_document(path, edit):
    with open(path) as f:
        document = yaml.safe_load(f)
    edit(document)
    with open(path, "w") as f:
        yaml.safe_dump(document, f)


def test_load_unknown_version(tmp_path, flat3_graph):
    path = tmp_path / "flat.graph"
    save_graph(flat3_graph, path)
    edit_document(path, lambda doc: doc.update(format_version=99))
    with pytest.raises(GraphLoadError, match="format_version"):
        load_graph(path)


def test_load_asymmetric(tmp_path, flat3_graph):
    path = tmp_path / "flat.graph"
    save_graph(flat3_graph, path)

    def break_one_edge(doc):
        doc["edges"][0].update(valid=False, reason="detour")

    edit_document(path, break_one_edge)
    with pytest.raises(GraphLoadError, match="reverse"):
        load_graph(path)


def test_load_schema_violation(tmp_path, flat3_graph):
    path = tmp_path / "flat.graph"
    save_graph(flat3_graph, path)
    edit_document(path, lambda doc: doc["nodes"][0].pop("x"))
    with pytest.raises(GraphLoadError, match="schema"):
        load_graph(path)


def test_revalidate_detects_tampering(flat3, flat3_graph):
    tampered = flat3_graph.copy()
    n = tampered.nodes[4]
    tampered.nodes[4] = Waypoint(
        id=n.id, i=n.i, j=n.j, x=n.x, y=n.y, z=n.z, valid=False
    )
    mismatches = revalidate(tampered, flat3)
    assert any(m.startswith("waypoint 4") for m in mismatches)


def test_line_graph():
    graph = dummy.line_graph(5)
    assert len(graph) == 5
    assert graph.summary()["valid_edges"] == 4
