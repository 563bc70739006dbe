"""Second moments and maxima tail bounds for integrals against fBm.

Variance functional
-------------------
For a deterministic integrand ``f``,

    q_f(s, t) = C a (a+1) int_s^t int_s^t f(u) f(v) |u - v|**(a-1) du dv

is the variance of ``int_s^t f dxi``.  Pass ``raw=True`` anywhere to drop the
factor ``C a (a+1)``.

The double integral is evaluated by product integration: ``f`` is replaced by
its piecewise-linear interpolant on a uniform grid, and the kernel is
integrated against it in closed form.  Writing the interpolant (extended by
zero) through its second distributional derivative, a sum of point masses and
dipoles at the knots, the quadratic form reduces to evaluations of the
antiderivatives

    K2(w) = |w|**(1+a) / (a (a+1))
    K3(w) = sign(w) |w|**(2+a) / (a (a+1) (a+2))
    K4(w) = |w|**(3+a) / (a (a+1) (a+2) (a+3))

at knot differences.  Linear integrands are integrated exactly; smooth ones
converge at second order, and the grid is doubled until the relative change
drops below ``1e-8``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import matmul_toeplitz
from scipy.special import erfc

from .errors import FactorizationError, HypothesisError, PreconditionError, QuadratureError
from .fbm import cholesky_with_jitter, kernel_constant, replica_generator
from .holder import GridPath

SQRT_HALF_PI = math.sqrt(math.pi / 2)


@dataclass(frozen=True)
class DeterministicIntegrand:
    """A time-only integrand on [0, 1].

    ``f`` should accept a numpy array; scalar-only callables are vectorized.
    ``beta`` is recorded for reference only (the L^{2/(1+beta)} class), it
    does not enter any computed formula.
    """

    f: object
    name: str = "custom"
    beta: float = None
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        try:
            y = np.asarray(self.f(x), dtype=float)
        except (TypeError, ValueError):
            y = np.vectorize(lambda v: float(self.f(v)))(x)
        return np.broadcast_to(y, x.shape).astype(float)

    def positive_part(self):
        return DeterministicIntegrand(lambda x: np.maximum(self(x), 0.0), f"{self.name}+")

    def negative_part(self):
        return DeterministicIntegrand(lambda x: np.maximum(-self(x), 0.0), f"{self.name}-")

    def abs(self):
        return DeterministicIntegrand(lambda x: np.abs(self(x)), f"|{self.name}|")


def as_integrand(f):
    return f if isinstance(f, DeterministicIntegrand) else DeterministicIntegrand(f)


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise HypothesisError(f"need 0 < alpha < 1 for the variance functional, got {alpha}")


def variance_constant(alpha, raw=False):
    """``C a (a+1)``, or 1 when ``raw``."""
    return 1.0 if raw else kernel_constant(alpha) * alpha * (alpha + 1)


class _Antiderivatives:
    def __init__(self, alpha):
        self.a = alpha
        self.p2 = alpha * (alpha + 1)
        self.p3 = self.p2 * (alpha + 2)
        self.p4 = self.p3 * (alpha + 3)

    def k2(self, w):
        return np.abs(w) ** (1 + self.a) / self.p2

    def k3(self, w):
        return np.sign(w) * np.abs(w) ** (2 + self.a) / self.p3

    def k4(self, w):
        return np.abs(w) ** (3 + self.a) / self.p4


def _qf_fixed(fv, s, t, alpha):
    """Raw double integral of the interpolant through ``fv`` on a uniform grid of [s, t]."""
    n = fv.size - 1
    h = (t - s) / n
    kern = _Antiderivatives(alpha)
    slopes = np.diff(fv) / h
    a = np.diff(np.concatenate([[0.0], slopes, [0.0]]))
    offsets = h * np.arange(n + 1)
    col = kern.k4(offsets)
    if n <= 2048:
        ta = np.convolve(a, np.concatenate([col[:0:-1], col]), mode="valid")
    else:
        ta = matmul_toeplitz(col, a)
    quad = float(a @ ta)
    b0, bn = fv[0], -fv[-1]
    cross = 2.0 * (b0 * float(a @ kern.k3(offsets)) + bn * float(a @ kern.k3(offsets - (t - s))))
    dip = -2.0 * b0 * bn * float(kern.k2(t - s))
    return quad + cross + dip


def qf_at_level(f, s, t, alpha, level, raw=False):
    """``q_f(s, t)`` on a fixed grid of ``2**level`` cells, no refinement."""
    _check_alpha(alpha)
    if s == t:
        return 0.0
    s, t = min(s, t), max(s, t)
    f = as_integrand(f)
    x = s + (t - s) * np.arange(2**level + 1) / 2**level
    return variance_constant(alpha, raw) * _qf_fixed(f(x), s, t, alpha)


def qf(f, s, t, alpha, quad_level=16, raw=False, rtol=1e-8, start_level=5):
    """Variance functional ``q_f(s, t)`` with automatic grid refinement.

    Parameters
    ----------
    f : callable or DeterministicIntegrand
    s, t : float
        Integration square ``[s, t]**2`` (order does not matter).
    alpha : float
        fBm exponent in (0, 1).
    quad_level : int
        Finest grid ``2**quad_level`` cells tried before giving up.
    raw : bool
        Omit the constant ``C a (a+1)``.

    Raises
    ------
    QuadratureError
        If successive refinements still differ by more than ``rtol`` at the cap.
    """
    _check_alpha(alpha)
    if s == t:
        return 0.0
    s, t = min(s, t), max(s, t)
    f = as_integrand(f)
    const = variance_constant(alpha, raw)
    prev = raw_prev = None
    prev_prev = None
    for level in range(min(start_level, quad_level), quad_level + 1):
        x = s + (t - s) * np.arange(2**level + 1) / 2**level
        fv = f(x)
        raw_val = const * _qf_fixed(fv, s, t, alpha)
        # the interpolation error is O(h**2): one Richardson step
        val = raw_val if raw_prev is None else raw_val + (raw_val - raw_prev) / 3
        raw_prev = raw_val
        if prev is not None:
            # absolute floor: rounding level of the |f|-majorant of q
            ref = const * float(np.max(np.abs(fv))) ** 2 * 2 * (t - s) ** (1 + alpha) / (alpha * (alpha + 1))
            if abs(val - prev) <= rtol * max(abs(val), abs(prev)) or abs(val - prev) <= 1e-13 * ref:
                return val
        prev_prev, prev = prev, val
    raise QuadratureError(
        f"q_f did not converge by level {quad_level}: last values {prev_prev!r}, {prev!r}",
        last_values=(prev_prev, prev))


def variance_of_integral(f, t, alpha, quad_level=16, raw=False):
    """``E (int_0^t f dxi)**2``; the same number as ``qf(f, 0, t, alpha)``."""
    return qf(f, 0.0, t, alpha, quad_level=quad_level, raw=raw)


def cell_gram(f, t0, t1, n_cells, alpha, sub=8, raw=False):
    """Covariances of ``int f dxi`` over the cells of a uniform grid.

    Entry ``(k, l)`` is ``C a (a+1)`` times the double integral over cell ``k``
    times cell ``l``, with ``f`` interpolated linearly on ``sub`` sub-cells
    per cell.  The matrix sums to ``q_f(t0, t1)`` at the same resolution.
    """
    _check_alpha(alpha)
    f = as_integrand(f)
    n = int(n_cells)
    hf = (t1 - t0) / (n * sub)
    x = t0 + hf * np.arange(n * sub + 1)
    fv = f(x)
    q = np.arange(sub + 1)
    F = fv[np.arange(n)[:, None] * sub + q[None, :]]
    A = np.diff(np.pad(np.diff(F, axis=1) / hf, ((0, 0), (1, 1))), axis=1)
    b0, bs = F[:, 0], -F[:, -1]
    kern = _Antiderivatives(alpha)
    G = np.empty((n, n))
    for d in range(n):
        delta = (q[:, None] - q[None, :] - d * sub) * hf
        m4, m3, m2 = kern.k4(delta), kern.k3(delta), kern.k2(delta)
        Ak, Al = A[: n - d], A[d:]
        val = np.einsum("kq,kq->k", Ak @ m4, Al)
        val += (Ak @ m3[:, 0]) * b0[d:] + (Ak @ m3[:, -1]) * bs[d:]
        val -= b0[: n - d] * (Al @ m3[0, :]) + bs[: n - d] * (Al @ m3[-1, :])
        val -= (b0[: n - d] * b0[d:] * m2[0, 0] + b0[: n - d] * bs[d:] * m2[0, -1]
                + bs[: n - d] * b0[d:] * m2[-1, 0] + bs[: n - d] * bs[d:] * m2[-1, -1])
        k = np.arange(n - d)
        G[k, k + d] = val
        G[k + d, k] = val
    return variance_constant(alpha, raw) * G


def integrand_covariance(f, level, horizon, alpha, sub=8, raw=False):
    """Covariance of ``X(t_i) = int_0^{t_i} f dxi`` at nodes ``t_1..t_N``."""
    G = cell_gram(f, 0.0, horizon, 2**level, alpha, sub, raw)
    return np.cumsum(np.cumsum(G, axis=0), axis=1)


def integrand_factor(f, level, horizon, alpha, sub=8, raw=False):
    cov = integrand_covariance(f, level, horizon, alpha, sub, raw)
    return cholesky_with_jitter(cov, "integrand covariance")


def sample_from_factor(factor, seed, indices, scale=1.0):
    """Rows ``X(t_0..t_N)`` with ``X(0) = 0`` for each replica index."""
    n = factor.shape[0]
    z = np.stack([replica_generator(seed, i).standard_normal(n) for i in indices])
    out = np.zeros((len(indices), n + 1))
    out[:, 1:] = z @ factor.T
    if scale != 1.0:
        out *= scale
    return out


def sample_deterministic_integral(f, level, horizon, alpha, seed, n_paths, sub=8, start=0):
    """Exact Gaussian draws of the path ``t -> int_0^t f dxi`` on a dyadic grid.

    Returns a list of GridPaths on ``[0, horizon]``; replica ``i`` depends only
    on ``(seed, start + i)``.
    """
    if not 0 < horizon <= 1:
        raise ValueError("horizon must lie in (0, 1]")
    factor = integrand_factor(f, level, horizon, alpha, sub)
    rows = sample_from_factor(factor, seed, range(start, start + n_paths))
    return [GridPath(0.0, horizon, level, r) for r in rows]


def gaussian_upper_tail(x):
    """``int_x^inf sqrt(2/pi) exp(-u**2/2) du = erfc(x / sqrt 2)``."""
    return float(erfc(x / math.sqrt(2.0)))


def slepian_tail_bound(f, lam, r=1.0, alpha=0.5, quad_level=16, raw=False, q_scale=1.0):
    """Slepian/reflection bound on ``P(max_{t<=1} int_0^t f dxi > lam)``.

    ``erfc(lam r / sqrt(2 q_{f+})) + erfc(lam (1-r) / sqrt(2 q_{f-}))``, with
    ``q`` over ``[0, 1]``; a part whose integrand vanishes is dropped.
    ``q_scale`` multiplies both variances (used for rescaled drivers).
    """
    if not lam > 0:
        raise PreconditionError("lambda must be positive")
    if not 0 <= r <= 1:
        raise ValueError("split r must lie in [0, 1]")
    f = as_integrand(f)
    q_plus = q_scale * qf(f.positive_part(), 0.0, 1.0, alpha, quad_level, raw)
    q_minus = q_scale * qf(f.negative_part(), 0.0, 1.0, alpha, quad_level, raw)
    return _slepian_from_q(q_plus, q_minus, lam, r)


def _slepian_from_q(q_plus, q_minus, lam, r):
    total = 0.0
    if q_plus > 0:
        total += gaussian_upper_tail(lam * r / math.sqrt(q_plus))
    if q_minus > 0:
        total += gaussian_upper_tail(lam * (1 - r) / math.sqrt(q_minus))
    return total


def optimize_slepian_split(f, lam, alpha=0.5, n_grid=1001, quad_level=16, raw=False,
                           q_scale=1.0):
    """Grid search of the split ``r`` in [0, 1]; returns ``(r_star, bound)``."""
    f = as_integrand(f)
    q_plus = q_scale * qf(f.positive_part(), 0.0, 1.0, alpha, quad_level, raw)
    q_minus = q_scale * qf(f.negative_part(), 0.0, 1.0, alpha, quad_level, raw)
    rs = np.linspace(0.0, 1.0, n_grid)
    vals = np.array([_slepian_from_q(q_plus, q_minus, lam, r) for r in rs])
    best = int(np.argmin(vals))
    return float(rs[best]), float(vals[best])


def fernique_threshold(m):
    """Smallest admissible ``lam = sqrt(1 + log m**4)``."""
    return math.sqrt(1 + 4 * math.log(m))


def _refine_argmax(f, s, t, h, alpha, raw, rounds=3, level=12):
    best = (qf_at_level(f, s, t, alpha, level, raw), s, t)
    width = h
    for _ in range(rounds):
        _, s0, t0 = best
        for si in np.linspace(max(0.0, s0 - width), min(1.0, s0 + width), 9):
            for ti in np.linspace(max(0.0, t0 - width), min(1.0, t0 + width), 9):
                if ti > si:
                    v = qf_at_level(f, si, ti, alpha, level, raw)
                    if v > best[0]:
                        best = (v, si, ti)
        width /= 4
    return best[0]


def fernique_constant(f, m, alpha, grid=128, sub=16, raw=False, refine=True, q_scale=1.0):
    """The metric-entropy constant ``c`` of the Fernique-type bound.

    ``c = sup sqrt(q_f(s,t)) + (2 + sqrt 2) int_1^inf sup_{|s-t| < m**(-x**2)} sqrt(q_f(s,t)) dx``

    Sups are taken over the ``(grid+1)**2`` node pairs of [0, 1] (the global
    one refined locally around the argmax), which can only underestimate the
    true sup.  The inner sup is interpolated linearly between grid
    separations and the outer integral taken by the trapezoid rule; below one
    grid cell the bound
    ``q_f(s,t) <= ||f||_inf**2 q_1(s,t) = ||f||_inf**2 2C |s-t|**(1+a)`` is
    integrated in closed form.
    """
    if int(m) != m or m < 2:
        raise PreconditionError("m must be an integer >= 2")
    f = as_integrand(f)
    G = q_scale * cell_gram(f, 0.0, 1.0, grid, alpha, sub, raw)
    S = np.zeros((grid + 1, grid + 1))
    S[1:, 1:] = np.cumsum(np.cumsum(G, axis=0), axis=1)
    d = np.diag(S)
    Q = d[None, :] + d[:, None] - S - S.T
    h = 1.0 / grid
    i, j = np.unravel_index(int(np.argmax(Q)), Q.shape)
    top = float(Q[i, j])
    if refine and top > 0:
        top = max(top, q_scale * _refine_argmax(f, h * min(i, j), h * max(i, j), h, alpha, raw))
    sup_all = math.sqrt(max(top, 0.0))

    by_sep = np.array([np.max(np.diagonal(Q, k)) for k in range(grid + 1)])
    env = np.sqrt(np.maximum(np.maximum.accumulate(by_sep), 0.0))
    logm = math.log(m)

    def x_of(delta):
        return math.sqrt(math.log(1.0 / delta) / logm)

    # sup over separations below delta, interpolated linearly between grid separations
    x_cell = max(1.0, x_of(h)) if h < 1.0 / m else 1.0
    xs = np.linspace(1.0, x_cell, 4097)
    env_x = np.interp(m ** (-xs**2), h * np.arange(grid + 1), env)
    integral = float(np.sum(0.5 * (env_x[1:] + env_x[:-1]) * np.diff(xs)))
    # below one cell: q <= ||f||^2 * (variance constant) * 2 delta^(1+a) / (a(a+1))
    fmax = float(np.max(np.abs(f(np.linspace(0.0, 1.0, grid * sub + 1)))))
    amp = fmax * math.sqrt(q_scale * variance_constant(alpha, raw) * 2 / (alpha * (alpha + 1)))
    c = (1 + alpha) / 2 * logm
    integral += amp * 0.5 * math.sqrt(math.pi / c) * float(erfc(math.sqrt(c) * x_cell))
    return sup_all + (2 + math.sqrt(2)) * integral


def fernique_tail_bound(f, lam, m=2, alpha=0.5, grid=128, sub=16, raw=False, inflate=1.0,
                        q_scale=1.0, c=None):
    """Fernique-type bound on ``P(max |int_0^t f dxi| > lam)``.

    ``(5/2) m**2 int_{lam/c}^inf exp(-x**2/2) dx``, valid for integer
    ``m >= 2`` and ``lam >= sqrt(1 + log m**4)``.  ``inflate`` scales ``c`` up
    to cover the grid underestimate of the sups.
    """
    if int(m) != m or m < 2:
        raise PreconditionError("m must be an integer >= 2")
    threshold = fernique_threshold(m)
    if lam < threshold:
        raise PreconditionError(
            f"lambda={lam} is below sqrt(1 + log m^4) = {threshold:.4f} for m={m}")
    if c is None:
        c = fernique_constant(f, m, alpha, grid, sub, raw, q_scale=q_scale)
    c *= inflate
    if c == 0:
        return 0.0
    return 2.5 * m * m * SQRT_HALF_PI * float(erfc(lam / (c * math.sqrt(2.0))))


@dataclass(frozen=True)
class TailBoundParams:
    """Inputs of the series bound for ``max_t int_0^t f(tau, xi(tau)) dxi``.

    ``f00 = |f(0,0)|``; ``ft`` and ``fx`` are sup-bounds of the partial
    derivatives; ``delta = (1+alpha)/2 - gamma``.
    """

    gamma: float
    delta: float
    f00: float
    ft: float
    fx: float
    lam: float

    @classmethod
    def from_alpha(cls, alpha, gamma, f00, ft, fx, lam):
        return cls(gamma, (1 + alpha) / 2 - gamma, abs(f00), abs(ft), abs(fx), lam)

    def __post_init__(self):
        if min(self.f00, self.ft, self.fx) < 0:
            raise ValueError("f00, ft, fx are magnitudes and must be non-negative")


def maxf_nu(params):
    """Hölder-coefficient threshold ``nu`` solving ``A L + fx L**2/(2**(2g) - 2) = lam``.

    Computed in the cancellation-free form ``2 lam / (sqrt(A**2 + B) + A)``,
    which equals the quadratic-root expression and stays finite as ``fx -> 0``.
    """
    g = params.gamma
    A = params.f00 + params.ft / (2 ** (g + 1) - 2)
    B = 4 * params.fx * params.lam / (2 ** (2 * g) - 2)
    denom = math.sqrt(A * A + B) + A
    return math.inf if denom == 0 else 2 * params.lam / denom


def maxf_tail_bound(params, alpha, series_tol=1e-16, n_max=10_000):
    """Series bound on ``P(max_{t<=1} int_0^t f(tau, xi) dxi > lam)``.

    ``((2**g+1)/(2**g-1)) sqrt(2/pi) sum_n 2**((1-delta) n) / nu
    * exp(-((2**g-1)/(2**g+1)) nu**2 2**(2 n delta - 1))``

    Terms are accumulated in log space and summation stops once terms are
    decreasing and smaller than ``series_tol`` times the partial sum.
    """
    g = params.gamma
    if not 0.5 < g < (1 + alpha) / 2:
        raise HypothesisError(f"need 1/2 < gamma < (1+alpha)/2 = {(1 + alpha) / 2}, got {g}")
    delta = (1 + alpha) / 2 - g
    if not math.isclose(delta, params.delta, rel_tol=1e-9, abs_tol=1e-12):
        raise HypothesisError(f"delta={params.delta} inconsistent with (1+alpha)/2 - gamma={delta}")
    if not params.lam > 0:
        raise PreconditionError("lambda must be positive")
    nu = maxf_nu(params)
    if math.isinf(nu):
        return 0.0
    rho = (2**g - 1) / (2**g + 1)
    terms = []
    prev = -math.inf
    for n in range(1, n_max + 1):
        log_term = (1 - delta) * n * math.log(2) - math.log(nu) - rho * nu * nu * 2.0 ** (2 * n * delta - 1)
        if log_term > 700:
            return math.inf
        term = math.exp(log_term)
        terms.append(term)
        if log_term < prev and term < series_tol * math.fsum(terms):
            return math.sqrt(2 / math.pi) / rho * math.fsum(terms)
        prev = log_term
    raise HypothesisError(f"series did not converge within {n_max} terms (delta={delta})")
