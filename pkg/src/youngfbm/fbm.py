"""Fractional Brownian motion: covariance kernel and exact path sampling.

The process with exponent ``alpha`` in (-1, 1) has covariance
``C (s**(1+a) + t**(1+a) - |s-t|**(1+a))``, so ``E xi(1)**2 = 2C`` (not 1).
Paths are drawn exactly on dyadic grids from the stationary increment
covariance, either by Cholesky factorization of its Toeplitz matrix or by
circulant embedding; both produce the same Gaussian law.

Randomness is keyed by ``(seed, path_index)`` through a Philox counter-based
generator, so any replica can be regenerated on its own (to rounding: a
batched Cholesky product may differ in the last bit) and batches do not
depend on ordering or thread count.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import gamma as gamma_fn

from .errors import FactorizationError
from .holder import GridPath

# Levels up to this use Cholesky; above it the circulant backend.
CHOLESKY_MAX_LEVEL = 10


def kernel_constant(alpha):
    """Normalizing constant ``C`` of the covariance.

    ``C = -Gamma(1-a)/a * cos((1+a) pi/2) / ((1+a) pi/2)``, with the limit
    value 1 at ``alpha = 0`` (ordinary Brownian motion).
    """
    alpha = float(alpha)
    if not -1 < alpha < 1:
        raise ValueError(f"fBm exponent must satisfy |alpha| < 1, got {alpha}")
    if alpha == 0.0:
        return 1.0
    half = (1 + alpha) * math.pi / 2
    return float(-gamma_fn(1 - alpha) / alpha * math.cos(half) / half)


def hurst(alpha):
    return (1 + alpha) / 2


def covariance(alpha, s, t):
    """``E xi(s) xi(t)``; vectorized over ``s`` and ``t``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("times must be non-negative")
    e = 1 + alpha
    out = kernel_constant(alpha) * (s**e + t**e - np.abs(s - t) ** e)
    return out if out.ndim else float(out)


def increment_covariance(alpha, s, t, u, v):
    """``E (xi(t) - xi(s)) (xi(v) - xi(u))`` for ``s < t``, ``u < v``."""
    if not (np.all(np.less(s, t)) and np.all(np.less(u, v))):
        raise ValueError("need s < t and u < v")
    e = 1 + alpha
    out = kernel_constant(alpha) * (np.abs(np.subtract(t, u)) ** e + np.abs(np.subtract(s, v)) ** e
                                    - np.abs(np.subtract(t, v)) ** e - np.abs(np.subtract(s, u)) ** e)
    return out if np.ndim(out) else float(out)


def increment_autocovariance(alpha, n, cell):
    """Covariance of unit-lag increments at lags ``0..n-1`` on cells of width ``cell``."""
    k = np.arange(n, dtype=float)
    e = 1 + alpha
    return kernel_constant(alpha) * cell**e * (np.abs(k + 1) ** e + np.abs(k - 1) ** e - 2 * k**e)


def covariance_matrix(alpha, times):
    """Node covariance matrix ``E xi(t_i) xi(t_j)``."""
    t = np.asarray(times, dtype=float)
    return covariance(alpha, t[:, None], t[None, :])


@dataclass(frozen=True)
class FbmSpec:
    """Parameters of an fBm sample on ``[0, horizon]`` at dyadic ``level``."""

    alpha: float
    horizon: float = 1.0
    level: int = 10
    seed: int = 0

    def __post_init__(self):
        if not -1 < self.alpha < 1:
            raise ValueError(f"fBm exponent must satisfy |alpha| < 1, got {self.alpha}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if int(self.level) != self.level or self.level < 1:
            raise ValueError("level must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def kernel_constant(self):
        return kernel_constant(self.alpha)

    @property
    def n_cells(self):
        return 2**self.level


def replica_generator(seed, index):
    """Independent Philox stream for replica ``index`` under ``seed``."""
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(index) << 64)))


def cholesky_with_jitter(cov, what="covariance"):
    """Lower Cholesky factor; one retry with jitter ``1e-12 * max diag``.

    An all-zero matrix yields a zero factor.
    """
    cov = np.asarray(cov, dtype=float)
    scale = float(np.max(np.diag(cov))) if cov.size else 0.0
    if scale == 0.0 and not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(cov + 1e-12 * scale * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError:
        lam = float(np.min(np.linalg.eigvalsh(cov)))
        raise FactorizationError(
            f"{what} matrix is not positive definite even after jitter "
            f"(smallest eigenvalue {lam:.3e})", min_eigenvalue=lam) from None


@lru_cache(maxsize=4)
def _cholesky_factor(alpha, level, horizon):
    n = 2**level
    acov = increment_autocovariance(alpha, n, horizon / n)
    return cholesky_with_jitter(toeplitz(acov), "fBm increment")


@lru_cache(maxsize=4)
def _circulant_sqrt_eigs(alpha, level, horizon):
    n = 2**level
    acov = increment_autocovariance(alpha, n + 1, horizon / n)
    row = np.concatenate([acov, acov[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise FactorizationError(
            "circulant embedding has a negative eigenvalue", min_eigenvalue=float(lam.min()))
    return np.sqrt(np.clip(lam, 0.0, None) / row.size)


def resolve_method(level, method="auto"):
    if method == "auto":
        return "cholesky" if level <= CHOLESKY_MAX_LEVEL else "circulant"
    if method not in ("cholesky", "circulant"):
        raise ValueError(f"unknown sampling method {method!r}")
    return method


def standard_normals(seed, indices, size):
    """Row ``r`` holds ``size`` normals from the stream of replica ``indices[r]``."""
    return np.stack([replica_generator(seed, i).standard_normal(size) for i in indices])


def increments_from_normals(alpha, level, horizon, z):
    """Map standard normals (``2**level`` per row) to exact fBm increments by Cholesky."""
    factor = _cholesky_factor(alpha, level, horizon)
    return z[:, :2**level] @ factor.T


def circulant_increments(alpha, level, horizon, seed, indices):
    """Exact increments by circulant embedding.

    With ``w = sqrt(lam / M) (a + i b)`` for independent standard normal
    vectors ``a``, ``b``, the real and imaginary parts of ``fft(w)`` are
    independent with the embedded covariance, so one transform serves replicas
    ``2j`` (real part) and ``2j + 1`` (imaginary part), both drawn from the
    stream of ``j``.
    """
    idx = np.asarray(indices, dtype=np.int64)
    root = _circulant_sqrt_eigs(alpha, level, horizon)
    m = root.size
    pairs, inv = np.unique(idx // 2, return_inverse=True)
    z = standard_normals(seed, pairs, 2 * m)
    y = np.fft.fft(root * (z[:, :m] + 1j * z[:, m:]), axis=1)[:, :2**level]
    return np.where((idx % 2 == 0)[:, None], y.real[inv], y.imag[inv])


def sample_batch(spec, indices, method="auto", scale=1.0):
    """Node values for the replicas in ``indices``, shape ``(len, 2**level + 1)``."""
    method = resolve_method(spec.level, method)
    if method == "cholesky":
        z = standard_normals(spec.seed, indices, 2**spec.level)
        inc = increments_from_normals(spec.alpha, spec.level, spec.horizon, z)
    else:
        inc = circulant_increments(spec.alpha, spec.level, spec.horizon, spec.seed, indices)
    out = np.zeros((inc.shape[0], inc.shape[1] + 1))
    np.cumsum(inc, axis=1, out=out[:, 1:])
    if scale != 1.0:
        out *= scale
    return out


def sample_path(spec, index=0, method="auto"):
    """One exact fBm path with ``xi(0) = 0``; deterministic in ``(spec, index)``."""
    values = sample_batch(spec, [index], method)[0]
    return GridPath(0.0, spec.horizon, spec.level, values)


def batch_size_for(level):
    """Fixed chunk size so memory stays bounded; depends only on the level."""
    return int(max(64, min(4096, 2**22 // 2**level)))


def sample_paths(spec, n_paths, start=0, method="auto", threads=1):
    """Array of ``n_paths`` replicas ``start..start+n_paths-1``."""
    return np.concatenate(list(iter_batches(spec, n_paths, start, method, threads)), axis=0)


def iter_batches(spec, n_paths, start=0, method="auto", threads=1, func=None):
    """Yield replica batches in index order, optionally mapped through ``func``.

    The chunking depends only on the level, so results are identical for any
    ``threads`` value.
    """
    method = resolve_method(spec.level, method)
    size = batch_size_for(spec.level)
    chunks = [list(range(a, min(a + size, start + n_paths)))
              for a in range(start, start + n_paths, size)]

    def work(idx):
        block = sample_batch(spec, idx, method)
        return block if func is None else func(block)

    if threads <= 1:
        for idx in chunks:
            yield work(idx)
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(work, chunks)
