"""CSV readers and writers for grid paths.

Single paths use a ``t,value`` header; batches use a wide layout
``t,path_0,...,path_{N-1}``.  Values are written with 17 significant digits so
a round trip is exact.
"""

import csv
import io

import numpy as np

from .errors import InvalidPathError
from .holder import GridPath


def _fmt(x):
    return repr(float(x))


def _check_grid(times, rtol=1e-9):
    n = times.size - 1
    if n < 1 or n & (n - 1):
        raise InvalidPathError(f"{times.size} rows is not 2**level + 1")
    t0, t1 = times[0], times[-1]
    if not t1 > t0:
        raise InvalidPathError("times must be ascending")
    expected = t0 + (t1 - t0) * np.arange(n + 1) / n
    if np.max(np.abs(times - expected)) > rtol * (t1 - t0):
        raise InvalidPathError("times are not uniformly spaced on a dyadic grid")
    return float(t0), float(t1), n.bit_length() - 1


def gridpath_to_csv(path):
    buf = io.StringIO()
    buf.write("t,value\n")
    for t, v in zip(path.times, path.values):
        buf.write(f"{_fmt(t)},{_fmt(v)}\n")
    return buf.getvalue()


def write_gridpath_csv(path, filename):
    with open(filename, "w", newline="") as fh:
        fh.write(gridpath_to_csv(path))


def read_gridpath_csv(filename):
    """Read a ``t,value`` CSV, verifying uniform dyadic spacing (rtol 1e-9)."""
    with open(filename, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "value"]:
        raise InvalidPathError(f"{filename}: expected header 't,value'")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InvalidPathError(f"{filename}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != 2:
        raise InvalidPathError(f"{filename}: every row needs two columns")
    t0, t1, level = _check_grid(data[:, 0])
    return GridPath(t0, t1, level, data[:, 1])


def write_paths_csv(t0, t1, level, paths, filename):
    """Write an ``(n_paths, 2**level + 1)`` array in the wide layout."""
    paths = np.atleast_2d(paths)
    times = t0 + (t1 - t0) * np.arange(2**level + 1) / 2**level
    with open(filename, "w", newline="") as fh:
        fh.write(",".join(["t"] + [f"path_{i}" for i in range(paths.shape[0])]) + "\n")
        for j, t in enumerate(times):
            fh.write(",".join([_fmt(t)] + [_fmt(v) for v in paths[:, j]]) + "\n")


def read_paths_csv(filename):
    """Inverse of :func:`write_paths_csv`; returns a list of GridPaths."""
    with open(filename, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if header[0] != "t" or any(h != f"path_{i}" for i, h in enumerate(header[1:])):
        raise InvalidPathError(f"{filename}: expected header 't,path_0,...'")
    data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    t0, t1, level = _check_grid(data[:, 0])
    return [GridPath(t0, t1, level, data[:, k]) for k in range(1, data.shape[1])]
