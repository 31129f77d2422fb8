import numpy as np
import pytest

from stochsoliton.errors import InvalidArgument
from stochsoliton.snapshots import read_snapshot, write_snapshot
from stochsoliton.spectral_grid import Field, Grid


def test_round_trip_exact(tmp_path, rng):
    grid = Grid(256, 30.0)
    vals = rng.normal(size=256) + 1j * rng.normal(size=256)
    f = Field(grid, vals)
    path = tmp_path / "field.snap"
    write_snapshot(path, f, t=3.25)
    g, t = read_snapshot(path)
    assert t == 3.25
    assert g.grid == grid
    assert np.array_equal(g.values, f.values)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.snap"
    path.write_bytes(b"NOTAFILE" + bytes(64))
    with pytest.raises(InvalidArgument):
        read_snapshot(path)


def test_truncated_payload_rejected(tmp_path):
    grid = Grid(64, 5.0)
    path = tmp_path / "field.snap"
    write_snapshot(path, Field.zero(grid), t=0.0)
    data = path.read_bytes()
    path.write_bytes(data[:-16])
    with pytest.raises(InvalidArgument):
        read_snapshot(path)
