import math
import os
import stat

import pytest
import yaml

from terrabstract.utils import (
    BoundingBox,
    EpisodeError,
    NoPathError,
    Point,
    Point3,
    atomic_write,
    dump_document,
    dump_line,
    mix_seed,
    splitmix64,
)


def test_splitmix64_reference_value():
    # first output of a SplitMix64 generator started at 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_mix_seed_is_order_sensitive():
    assert mix_seed(1, 2, 3) == mix_seed(1, 2, 3)
    assert mix_seed(1, 2, 3) != mix_seed(1, 3, 2)
    assert mix_seed(1, 2) != mix_seed(1, 2, 0)
    assert 0 <= mix_seed(2**64 - 1, -1) < 2**64


def test_bounding_box():
    box = BoundingBox.from_points([Point(1, 5), Point3(-2, 9, 3), Point(4, 0)])
    assert box == BoundingBox(-2, 0, 4, 5)
    assert box.contains(0, 0)
    assert not box.contains(4.5, 0)
    assert box.padded(1).contains(4.5, 0)


def test_dump_document_floats():
    text = dump_document({"a": 0.1, "b": math.inf, "c": [1, 2]})
    assert text == "a: 0.100000\nb: .inf\nc:\n- 1\n- 2\n"


def test_dump_document_flow_lists():
    text = dump_document({"rows": [{"xz": [1.5, 2.0]}]}, flow_lists=True)
    assert "[1.500000, 2.000000]" in text
    assert yaml.safe_load(text) == {"rows": [{"xz": [1.5, 2.0]}]}


def test_dump_line():
    record = {"step": 3, "agents": [["blue", 0, 1.5, 2.0, 0, True]], "shots": []}
    line = dump_line(record)
    assert "\n" not in line
    assert yaml.safe_load(line) == record


def test_atomic_write(tmp_path):
    path = tmp_path / "out.yaml"
    path.write_text("old")
    atomic_write(path, "new\n")
    assert path.read_text() == "new\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.yaml"]


@pytest.mark.parametrize("umask", [0o022, 0o077, 0o002])
def test_atomic_write_follows_umask(tmp_path, umask):
    previous = os.umask(umask)
    try:
        atomic_write(tmp_path / "out.yaml", "text")
    finally:
        os.umask(previous)
    mode = stat.S_IMODE((tmp_path / "out.yaml").stat().st_mode)
    assert mode == 0o666 & ~umask


def test_atomic_write_missing_dir(tmp_path):
    with pytest.raises(OSError):
        atomic_write(tmp_path / "nope" / "out.yaml", "text")


def test_error_context():
    cause = NoPathError("no path", sample_index=4)
    error = EpisodeError(2, 7, cause)
    assert str(error) == "episode blue_start=2 red_start=7: no path"
    assert error.cause is cause
