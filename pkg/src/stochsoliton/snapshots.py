"""Binary field snapshots with exact round-trip.

Layout (little-endian): 8-byte magic, uint32 version, uint32 n_points,
float64 half_length, float64 t, then n_points interleaved (re, im) float64
pairs.  Used for restart, caching of expensive spectra and reproducibility
checks.
"""

import struct

import numpy as np

from .errors import InvalidArgument
from .spectral_grid import Field, Grid

MAGIC = b"SOLFLD01"
VERSION = 1
_HEADER = struct.Struct("<8sII dd")


def write_snapshot(path, field: Field, t: float):
    vals = field.values
    inter = np.empty(2 * vals.size)
    inter[0::2] = vals.real
    inter[1::2] = vals.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, field.grid.n_points,
                              field.grid.half_length, t))
        fh.write(inter.astype("<f8").tobytes())


def read_snapshot(path):
    """Returns (field, t)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, n, half_length, t = _HEADER.unpack(head)
        if magic != MAGIC:
            raise InvalidArgument(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise InvalidArgument(f"{path}: unsupported version {version}")
        data = np.frombuffer(fh.read(16 * n), dtype="<f8")
    if data.size != 2 * n:
        raise InvalidArgument(f"{path}: truncated payload")
    vals = data[0::2] + 1j * data[1::2]
    return Field(Grid(n, half_length), vals), float(t)
