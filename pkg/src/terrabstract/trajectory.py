"""
Fine-grained trajectories and how faithfully the waypoint graph reproduces them.

A trajectory is snapped by assigning every sample to its closest valid
waypoint and joining consecutive assignments with shortest paths. The
fidelity report compares distance travelled per sample interval (stepwise)
and per trajectory (roundwise).

Trajectory files are csv with a `t,x,y,z` header, one sample per row:

```
# t in seconds, positions in meters
t,x,y,z
0.0,1.2,0.0,3.4
0.5,1.9,0.0,3.1
```

Example:

    ```python
    from terrabstract.trajectory import analyze_corpus
    from terrabstract.waygraph import load_graph

    graph = load_graph("dust.graph")
    report = analyze_corpus(graph, sorted(Path("rounds").glob("*.csv")))
    report.aggregate.relative_difference_mean
    ```

"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from terrabstract.agreement import (
    BlandAltman,
    bland_altman,
    r_squared,
    relative_difference,
)
from terrabstract.pathfind import CostMode, shortest_path
from terrabstract.utils import (
    BoundingBox,
    ContractError,
    EmptyCorpusError,
    NoPathError,
    TerrabstractError,
    TrajectoryParseError,
    UndefinedMetricError,
    dump_document,
)
from terrabstract.waygraph import WaypointGraph

logger = logging.getLogger(__name__)

COLUMNS = ["t", "x", "y", "z"]
NOMINAL_DT = 0.5
"""Sampling interval of the source trajectories in seconds."""


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timestamped positions.

    Attributes:
        t: sample times in seconds, strictly increasing.
        xyz: positions of shape (n, 3) in meters.
        nominal_dt: intended sampling interval.
        name: where the trajectory came from.
    """

    t: np.ndarray = field(repr=False)
    xyz: np.ndarray = field(repr=False)
    nominal_dt: float = NOMINAL_DT
    name: str = ""

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        xyz = np.asarray(self.xyz, dtype=float).reshape(-1, 3)
        if len(t) != len(xyz):
            raise ValueError("t and xyz should have the same number of samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times should be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "xyz", xyz)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def step_lengths(self) -> np.ndarray:
        """Euclidean length of every sample-to-sample segment."""
        return np.linalg.norm(np.diff(self.xyz, axis=0), axis=1)


def load_trajectory(path: Path | str, nominal_dt: float = NOMINAL_DT) -> Trajectory:
    """Read a trajectory csv.

    Row numbers in errors count data rows from 1, not counting the header
    and comment lines.

    Raises:
        TrajectoryParseError: missing column, non-numeric or non-finite
            value, or time not strictly increasing.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, comment="#", skipinitialspace=True, dtype=str)
    except pd.errors.EmptyDataError as e:
        raise TrajectoryParseError(f"{path}: missing header t,x,y,z") from e
    df.columns = [str(c).strip() for c in df.columns]
    missing = [c for c in COLUMNS if c not in df.columns]
    if missing:
        raise TrajectoryParseError(f"{path}: missing column(s) {', '.join(missing)}")

    numeric = pd.DataFrame({c: pd.to_numeric(df[c], errors="coerce") for c in COLUMNS})
    values = numeric.to_numpy(dtype=float).reshape(-1, len(COLUMNS))
    bad = ~np.all(np.isfinite(values), axis=1)
    if bad.any():
        row = int(np.argmax(bad)) + 1
        raise TrajectoryParseError(f"{path}: missing or non-finite value", row)
    t = values[:, 0]
    backwards = np.diff(t) <= 0
    if backwards.any():
        row = int(np.argmax(backwards)) + 2
        raise TrajectoryParseError(f"{path}: time does not increase", row)

    logger.debug(f"Loaded {len(t)} samples from {path}")
    return Trajectory(t=t, xyz=values[:, 1:], nominal_dt=nominal_dt, name=path.name)


def nearest_waypoint(graph: WaypointGraph, point: Sequence[float]) -> int:
    """Id of the valid waypoint closest to (x, y, z); ties go to the lowest id."""
    return int(nearest_waypoints(graph, np.asarray(point, dtype=float)[None, :])[0])


def nearest_waypoints(graph: WaypointGraph, points: np.ndarray, chunk: int = 256):
    """Vectorized `nearest_waypoint` for an (n, 3) array of points."""
    ids = graph.valid_ids
    if len(ids) == 0:
        raise ContractError("graph has no valid waypoints")
    candidates = graph.positions[ids]
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    result = np.empty(len(points), dtype=int)
    for start in range(0, len(points), chunk):
        block = points[start : start + chunk]
        d2 = ((block[:, None, :] - candidates[None, :, :]) ** 2).sum(axis=2)
        # argmin returns the first minimum, ids are sorted ascending
        result[start : start + chunk] = ids[np.argmin(d2, axis=1)]
    return result


class SnappedPath(BaseModel):
    """A trajectory expressed on the waypoint graph.

    Attributes:
        assignments: closest waypoint of every sample.
        path: connected waypoint sequence without repeats.
        anchors: index into `path` where each sample's waypoint sits.
        mode: cost mode used to fill in skipped waypoints.
        out_of_extent: samples outside the graph's area, snapped anyway.
    """

    assignments: list[int]
    path: list[int]
    anchors: list[int]
    mode: CostMode
    out_of_extent: int = 0


def graph_area(graph: WaypointGraph) -> BoundingBox:
    valid = [graph.nodes[i] for i in graph.valid_ids]
    return BoundingBox.from_points(n.position for n in valid).padded(
        graph.config.spacing / 2
    )


def snap(
    graph: WaypointGraph, traj: Trajectory, mode: CostMode = "unit"
) -> SnappedPath:
    """Map a trajectory onto a connected waypoint path.

    Raises:
        NoPathError: two consecutive samples snap to disconnected parts of the
            graph; `sample_index` names the later sample.
    """
    if len(traj) == 0:
        return SnappedPath(assignments=[], path=[], anchors=[], mode=mode)

    assignments = [int(a) for a in nearest_waypoints(graph, traj.xyz)]
    area = graph_area(graph)
    outside = sum(not area.contains(x, z) for x, _, z in traj.xyz)
    if outside:
        logger.warning(f"{traj.name or 'trajectory'}: {outside} samples outside graph")

    segments: dict[tuple[int, int], list[int]] = {}
    path = [assignments[0]]
    anchors = [0]
    for k in range(1, len(assignments)):
        a, b = assignments[k - 1], assignments[k]
        if a != b:
            if (a, b) not in segments:
                try:
                    segments[(a, b)] = shortest_path(graph, a, b, mode)[0]
                except NoPathError as e:
                    raise NoPathError(
                        f"sample {k}: waypoint {b} is unreachable from {a}",
                        sample_index=k,
                    ) from e
            path.extend(segments[(a, b)][1:])
        anchors.append(len(path) - 1)

    return SnappedPath(
        assignments=assignments,
        path=path,
        anchors=anchors,
        mode=mode,
        out_of_extent=outside,
    )


class FidelityReport(BaseModel):
    """How closely a snapped path reproduces the distances of a trajectory.

    Differences are waypoint minus actual. r2 values are None when a series
    has no variance (or, for roundwise values of a single trajectory, when
    there is only one pair); the `*_defined` flags say so explicitly.
    """

    name: str = ""
    mode: CostMode
    samples: int
    out_of_extent: int = 0
    stepwise_actual: list[float]
    stepwise_waypoint: list[float]
    roundwise_actual: float
    roundwise_waypoint: float
    r2_stepwise: float | None
    r2_stepwise_defined: bool
    r2_roundwise: float | None = None
    r2_roundwise_defined: bool = False
    mean_diff_stepwise: float
    mean_diff_roundwise: float
    stepwise_agreement: BlandAltman
    relative_difference: float


def waypoint_distances(graph: WaypointGraph, snapped: SnappedPath) -> np.ndarray:
    """Euclidean path length walked on the graph between consecutive samples."""
    if len(snapped.path) < 2:
        return np.zeros(max(len(snapped.anchors) - 1, 0))
    pos = graph.positions[snapped.path]
    legs = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    along = np.concatenate([[0.0], np.cumsum(legs)])
    return np.diff(along[snapped.anchors])


def fidelity(
    traj: Trajectory, snapped: SnappedPath, graph: WaypointGraph
) -> FidelityReport:
    """Stepwise and roundwise agreement between a trajectory and its snapped path.

    Raises:
        UndefinedMetricError: fewer than two samples, or no distance travelled.
    """
    if len(traj) < 2:
        raise UndefinedMetricError(
            f"{traj.name or 'trajectory'}: fidelity needs at least 2 samples"
        )
    if len(snapped.anchors) != len(traj):
        raise ContractError("snapped path does not belong to this trajectory")

    actual = traj.step_lengths
    waypoint = waypoint_distances(graph, snapped)
    total_actual = float(actual.sum())
    total_waypoint = float(waypoint.sum())
    rel = relative_difference(total_actual, total_waypoint)
    r2 = r_squared(actual, waypoint)

    return FidelityReport(
        name=traj.name,
        mode=snapped.mode,
        samples=len(traj),
        out_of_extent=snapped.out_of_extent,
        stepwise_actual=actual.tolist(),
        stepwise_waypoint=waypoint.tolist(),
        roundwise_actual=total_actual,
        roundwise_waypoint=total_waypoint,
        r2_stepwise=r2,
        r2_stepwise_defined=r2 is not None,
        mean_diff_stepwise=float(np.mean(waypoint - actual)),
        mean_diff_roundwise=total_waypoint - total_actual,
        stepwise_agreement=bland_altman(actual, waypoint),
        relative_difference=rel,
    )


class CorpusAggregate(BaseModel):
    trajectories: int
    skipped: int
    errored: int
    relative_difference_mean: float
    relative_difference_std: float
    """Population standard deviation, as a fraction."""
    r2_stepwise: float | None
    r2_roundwise: float | None
    mean_diff_stepwise: float
    mean_diff_roundwise: float
    stepwise_agreement: BlandAltman
    roundwise_agreement: BlandAltman


class CorpusRecord(BaseModel):
    file: str
    status: str
    """`ok`, `skipped` (not enough movement or samples) or `error`."""
    message: str | None = None
    report: FidelityReport | None = None


class CorpusReport(BaseModel):
    mode: CostMode
    records: list[CorpusRecord]
    aggregate: CorpusAggregate

    def to_document(self) -> str:
        """Report as yaml: one record per input file plus the aggregate."""
        return dump_document(self.model_dump(), flow_lists=True)

    def to_frame(self) -> pd.DataFrame:
        """One row per analyzed trajectory, for printing."""
        rows = [
            {
                "file": r.file,
                "samples": r.report.samples,
                "actual": r.report.roundwise_actual,
                "waypoint": r.report.roundwise_waypoint,
                "rel_diff": r.report.relative_difference,
                "r2_step": r.report.r2_stepwise,
            }
            for r in self.records
            if r.report is not None
        ]
        return pd.DataFrame(rows)


def analyze_file(graph: WaypointGraph, path: Path, mode: CostMode) -> CorpusRecord:
    try:
        traj = load_trajectory(path)
        report = fidelity(traj, snap(graph, traj, mode), graph)
    except UndefinedMetricError as e:
        logger.warning(f"Skipping {path}: {e}")
        return CorpusRecord(file=str(path), status="skipped", message=str(e))
    except (TerrabstractError, OSError) as e:
        logger.warning(f"Could not analyze {path}: {e}")
        return CorpusRecord(file=str(path), status="error", message=str(e))
    return CorpusRecord(file=str(path), status="ok", report=report)


def analyze_corpus(
    graph: WaypointGraph, paths: Sequence[Path | str], mode: CostMode = "unit"
) -> CorpusReport:
    """Fidelity of every trajectory plus corpus-level aggregates.

    Pooled r2 and Bland-Altman values use all stepwise pairs of all
    trajectories, respectively one roundwise pair per trajectory.

    Raises:
        EmptyCorpusError: no trajectory could be analyzed.
    """
    records = [analyze_file(graph, Path(p), mode) for p in paths]
    reports = [r.report for r in records if r.report is not None]
    if not reports:
        raise EmptyCorpusError(
            f"none of the {len(records)} trajectories could be analyzed"
        )

    rel = np.array([r.relative_difference for r in reports])
    step_actual = np.concatenate([r.stepwise_actual for r in reports])
    step_waypoint = np.concatenate([r.stepwise_waypoint for r in reports])
    round_actual = np.array([r.roundwise_actual for r in reports])
    round_waypoint = np.array([r.roundwise_waypoint for r in reports])

    aggregate = CorpusAggregate(
        trajectories=len(reports),
        skipped=sum(r.status == "skipped" for r in records),
        errored=sum(r.status == "error" for r in records),
        relative_difference_mean=float(np.mean(rel)),
        relative_difference_std=float(np.std(rel)),
        r2_stepwise=r_squared(step_actual, step_waypoint),
        r2_roundwise=r_squared(round_actual, round_waypoint),
        mean_diff_stepwise=float(np.mean(step_waypoint - step_actual)),
        mean_diff_roundwise=float(np.mean(round_waypoint - round_actual)),
        stepwise_agreement=bland_altman(step_actual, step_waypoint),
        roundwise_agreement=bland_altman(round_actual, round_waypoint),
    )
    logger.info(
        f"Analyzed {aggregate.trajectories} trajectories: relative difference "
        f"{aggregate.relative_difference_mean:.4f} "
        f"+- {aggregate.relative_difference_std:.4f}"
    )
    return CorpusReport(mode=mode, records=records, aggregate=aggregate)
