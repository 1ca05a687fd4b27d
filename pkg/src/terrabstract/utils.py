import math
import os
import tempfile
from logging import getLogger
from pathlib import Path
from typing import Any, Iterable, NamedTuple

import yaml

logger = getLogger(__name__)

MASK64 = 0xFFFFFFFFFFFFFFFF


class Point(NamedTuple):
    """Horizontal world position in meters (x east, z north)."""

    x: float
    z: float


class Point3(NamedTuple):
    """World position in meters with y up."""

    x: float
    y: float
    z: float


class BoundingBox(NamedTuple):
    xmin: float
    zmin: float
    xmax: float
    zmax: float

    @classmethod
    def from_points(cls, points: Iterable[Point | Point3]):
        points = list(points)
        return cls(
            xmin=min(map(lambda p: p.x, points)),
            zmin=min(map(lambda p: p.z, points)),
            xmax=max(map(lambda p: p.x, points)),
            zmax=max(map(lambda p: p.z, points)),
        )

    def padded(self, margin: float) -> "BoundingBox":
        return BoundingBox(
            self.xmin - margin,
            self.zmin - margin,
            self.xmax + margin,
            self.zmax + margin,
        )

    def contains(self, x: float, z: float) -> bool:
        return self.xmin <= x <= self.xmax and self.zmin <= z <= self.zmax


### Exceptions


class TerrabstractError(Exception):
    """Base class for all errors raised by terrabstract."""


class TerrainParseError(TerrabstractError):
    """Terrain file does not match the expected format."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TerrainRangeError(TerrabstractError):
    """Query outside the terrain extent."""


class GraphConfigError(TerrabstractError):
    """Waypoint graph parameters are inconsistent with the terrain."""


class SeedError(TerrabstractError):
    """Graph seed point is not on walkable terrain."""


class ContractError(TerrabstractError):
    """A caller broke a precondition."""


class GraphLoadError(TerrabstractError):
    """Graph file is of the wrong version or violates the graph invariants."""


class IllegalMoveError(TerrabstractError):
    """Action is masked at the current waypoint."""


class NoPathError(TerrabstractError):
    """No valid path between two waypoints."""

    def __init__(self, message: str, sample_index: int | None = None):
        self.sample_index = sample_index
        super().__init__(message)


class TrajectoryParseError(TerrabstractError):
    """Trajectory csv does not match the expected format."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class UndefinedMetricError(TerrabstractError):
    """A statistic cannot be computed for the given input."""


class EmptyCorpusError(TerrabstractError):
    """None of the trajectories in a corpus could be analyzed."""


class PolicyFault(TerrabstractError):
    """A policy returned a malformed set of orders."""

    def __init__(self, policy: str, message: str):
        self.policy = policy
        super().__init__(f"policy {policy!r}: {message}")


class UnknownPolicyError(TerrabstractError):
    """Policy is not registered in the rating table."""


class EpisodeError(TerrabstractError):
    """An episode of a tournament failed."""

    def __init__(self, blue_start: int, red_start: int, cause: Exception):
        self.blue_start = blue_start
        self.red_start = red_start
        self.cause = cause
        super().__init__(
            f"episode blue_start={blue_start} red_start={red_start}: {cause}"
        )


### Deterministic documents


class _DocumentDumper(yaml.SafeDumper):
    """Yaml dumper with fixed float formatting so output is byte-stable."""


def _represent_float(dumper: yaml.SafeDumper, value: float):
    if math.isinf(value):
        text = ".inf" if value > 0 else "-.inf"
    elif math.isnan(value):
        text = ".nan"
    else:
        text = f"{value:.6f}"
    return dumper.represent_scalar("tag:yaml.org,2002:float", text)


_DocumentDumper.add_representer(float, _represent_float)


def dump_document(document: Any, flow_lists: bool = False) -> str:
    """Serialize plain python data to yaml with stable formatting.

    Args:
        document: dicts, lists and scalars only.
        flow_lists: write innermost collections in flow style ([a, b]).
    """
    return yaml.dump(
        document,
        Dumper=_DocumentDumper,
        sort_keys=False,
        default_flow_style=None if flow_lists else False,
        allow_unicode=True,
        width=4096,
    )


def load_document(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def _umask() -> int:
    umask = os.umask(0)
    os.umask(umask)
    return umask


def atomic_write(path: Path, text: str):
    """Write text to path through a temporary file and rename.

    The file gets the permissions `open` would give a new file under the
    current umask, not the owner-only mode of the temporary file.
    """
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug(f"Wrote {path}")


### 64-bit mixing


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer applied to x + golden gamma."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(seed: int, *words: int) -> int:
    """Fold integer words into a 64-bit seed.

    Example:

        >>> mix_seed(0) == splitmix64(0)
        True
        >>> mix_seed(7, 1, 2) == mix_seed(7, 2, 1)
        False

    """
    h = splitmix64(seed & MASK64)
    for word in words:
        h = splitmix64(h ^ (word & MASK64))
    return h


def dump_line(record: Any) -> str:
    """Serialize a record as a single line of flow-style yaml."""
    return yaml.dump(
        record,
        Dumper=_DocumentDumper,
        sort_keys=False,
        default_flow_style=True,
        width=2**31,
    ).rstrip("\n")
