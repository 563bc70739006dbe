"""Grid-sampled paths and their Hölder coefficients.

A :class:`GridPath` stores a real function at the ``2**level + 1`` nodes of a
uniform dyadic grid on ``[t0, t1]``.  Everything else in the package consumes
paths in this form: drivers, fBm samples, SDE solutions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePathError, GridError, InvalidPathError


# Above this many nodes the exact all-pairs coefficient gets slow (O(N^2)).
EXACT_MAX_NODES = 2**14 + 1


@dataclass(frozen=True, eq=False)
class GridPath:
    """Values of a function at the nodes ``t0 + i (t1 - t0) / 2**level``."""

    t0: float
    t1: float
    level: int
    values: np.ndarray

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise InvalidPathError(f"need t1 > t0, got [{self.t0}, {self.t1}]")
        if int(self.level) != self.level or self.level < 0:
            raise InvalidPathError(f"level must be a non-negative integer, got {self.level}")
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size != 2**self.level + 1:
            raise InvalidPathError(
                f"level {self.level} needs {2**self.level + 1} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidPathError("path contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "t1", float(self.t1))
        object.__setattr__(self, "level", int(self.level))
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, func, t0=0.0, t1=1.0, level=10):
        """Sample ``func`` (vectorized over a time array) on the dyadic grid."""
        times = t0 + (t1 - t0) * np.arange(2**level + 1) / 2**level
        return cls(t0, t1, level, np.broadcast_to(func(times), times.shape))

    @property
    def n_cells(self):
        return 2**self.level

    @property
    def cell(self):
        """Width of one grid cell."""
        return (self.t1 - self.t0) / 2**self.level

    @property
    def times(self):
        return self.t0 + (self.t1 - self.t0) * np.arange(2**self.level + 1) / 2**self.level

    def node_index(self, t, rtol=1e-9):
        """Index of the node at time ``t``; off-grid times are an error."""
        x = (t - self.t0) / self.cell
        i = int(round(x))
        if abs(x - i) > rtol * max(1.0, abs(x)) or not 0 <= i <= self.n_cells:
            raise GridError(f"time {t} is not a node of the level-{self.level} grid on "
                            f"[{self.t0}, {self.t1}]; paths are not interpolated")
        return i

    def same_grid(self, other):
        return (self.level == other.level and np.isclose(self.t0, other.t0, rtol=1e-12, atol=1e-15)
                and np.isclose(self.t1, other.t1, rtol=1e-12, atol=1e-15))

    def coarsen(self, level):
        """Restriction to the coarser dyadic sub-grid of the given level."""
        if not 0 <= level <= self.level:
            raise GridError(f"cannot coarsen level {self.level} to level {level}")
        return GridPath(self.t0, self.t1, level, self.values[:: 2 ** (self.level - level)])

    def segment(self, i0, i1):
        """Sub-path on nodes ``i0..i1``; the node count there must be ``2**k + 1``."""
        m = i1 - i0
        if m <= 0 or m & (m - 1):
            raise GridError(f"segment of {m} cells is not a power of two")
        return GridPath(self.t0 + i0 * self.cell, self.t0 + i1 * self.cell,
                        int(m).bit_length() - 1, self.values[i0:i1 + 1])

    def with_values(self, values):
        return GridPath(self.t0, self.t1, self.level, values)

    def __add__(self, other):
        if not self.same_grid(other):
            raise GridError("paths live on different grids")
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        if not self.same_grid(other):
            raise GridError("paths live on different grids")
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__


@dataclass(frozen=True)
class HolderEstimate:
    """A certificate ``|f(t2) - f(t1)| <= coefficient * |t2 - t1|**beta``."""

    beta: float
    coefficient: float

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.coefficient < 0:
            raise ValueError("coefficient must be non-negative")


def _check_beta(beta):
    if not 0 < beta <= 1:
        raise ValueError(f"Hölder exponent must lie in (0, 1], got {beta}")


def holder_coefficient_values(values, cell, beta, mode="exact"):
    """Hölder-``beta`` quotient of raw node values spaced ``cell`` apart.

    ``mode="exact"`` scans every lag (all node pairs); ``mode="dyadic"`` only
    the power-of-two lags, which gives a lower bound in O(N log N).
    """
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidPathError("path contains non-finite values")
    n = v.size
    if n < 2:
        raise InvalidPathError("need at least two nodes")
    if mode == "exact":
        lags = range(1, n)
    elif mode == "dyadic":
        lags = [2**j for j in range(int(n - 1).bit_length()) if 2**j < n]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    best = 0.0
    for d in lags:
        m = np.max(np.abs(v[d:] - v[:-d]))
        if m > 0.0:
            best = max(best, m / (d * cell) ** beta)
    return float(best)


def holder_coefficient(path, beta, mode="auto"):
    """Max over node pairs of ``|f(t2) - f(t1)| / |t2 - t1|**beta``.

    Parameters
    ----------
    path : GridPath
    beta : float
        Exponent in (0, 1].
    mode : {"auto", "exact", "dyadic"}
        ``auto`` is exact up to ``EXACT_MAX_NODES`` nodes and dyadic beyond.
    """
    _check_beta(beta)
    if mode == "auto":
        mode = "exact" if path.values.size <= EXACT_MAX_NODES else "dyadic"
    return holder_coefficient_values(path.values, path.cell, beta, mode)


def holder_norm_values(values, cell, beta, mode="exact"):
    v = np.asarray(values, dtype=float)
    return float(np.max(np.abs(v))) + holder_coefficient_values(v, cell, beta, mode)


def holder_norm(path, beta, mode="auto"):
    """``max|f| + holder_coefficient(f, beta)``."""
    return float(np.max(np.abs(path.values))) + holder_coefficient(path, beta, mode)


def in_ball(path, beta, K, mode="auto"):
    """True iff the path's Hölder-``beta`` coefficient is at most ``K``."""
    if K < 0:
        raise ValueError("ball radius K must be non-negative")
    return holder_coefficient(path, beta, mode) <= K


def estimate_holder_exponent(path, statistic="mean"):
    """Regression estimate of the Hölder exponent across dyadic scales.

    At scale ``k = 1..level`` the increments over cells of width
    ``2**-k (t1 - t0)`` are summarized (mean of absolute values by default, or
    their maximum), and the exponent is the least-squares slope of the log2 of
    that statistic against ``-k``.

    The maximum tracks the worst-case definition but carries a downward bias of
    roughly 0.15 for Gaussian paths, because the largest of ``2**k`` Gaussian
    increments grows like ``sqrt(2 k log 2)``.  The mean is unbiased for fBm.
    Linear paths give exactly 1 either way.
    """
    if path.level < 4:
        raise ValueError(f"need level >= 4 for a scale regression, got {path.level}")
    if statistic not in ("mean", "max"):
        raise ValueError(f"unknown statistic {statistic!r}")
    v = path.values
    ks = np.arange(1, path.level + 1, dtype=float)
    stats = np.empty_like(ks)
    for j, k in enumerate(ks):
        lag = 2 ** (path.level - int(k))
        inc = np.abs(v[lag::lag] - v[:-lag:lag])
        stats[j] = inc.mean() if statistic == "mean" else inc.max()
    if np.any(stats == 0.0):
        raise DegeneratePathError("path has a scale with zero increments (constant path?)")
    x = -ks
    y = np.log2(stats)
    xc = x - x.mean()
    return float(np.sum(xc * (y - y.mean())) / np.sum(xc * xc))
