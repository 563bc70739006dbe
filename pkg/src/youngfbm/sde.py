"""Pathwise solver for ``dX = b(t, X) dt + sigma(t, X) dg`` with a Hölder driver.

The solution is built step by step.  On each step ``[s, s + eps]`` the map

    (F X)(t) = X(s) + int_s^t b(tau, X) dtau + int_s^t sigma(tau, X) dg

is a contraction of the Hölder ball of radius ``K`` once ``eps`` satisfies two
explicit inequalities (:func:`lhs_ball` <= K and :func:`lhs_contraction` <=
theta).  The step length is the largest whole number of grid cells meeting
both, and the fixed point is found by Picard iteration.  Integrals are full
depth dyadic sums, i.e. left Riemann sums on the driver's grid.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import GridError, HypothesisError, PicardError, StepTooCoarseError
from .holder import GridPath, holder_coefficient, holder_coefficient_values
from .pathio import write_gridpath_csv
from .young import running_integral_values


@dataclass(frozen=True)
class CoefficientField:
    """Drift ``b`` and diffusion ``sigma`` with the constants the step rule needs.

    All evaluators take ``(t, x)`` arrays.  ``B`` is a Lipschitz constant of
    ``b``; ``S`` one shared by ``sigma``, ``sigma_t`` and ``sigma_x``.
    ``bound_b`` and ``bound_sigma``, when given, replace the pointwise values
    ``|b(s, X(s))|`` and ``|sigma(s, X(s))|`` in the step rule, for
    coefficients that are only controlled on a working region.
    """

    b: object
    sigma: object
    B: float
    S: float
    sigma_t: object = None
    sigma_x: object = None
    bound_b: float = None
    bound_sigma: float = None
    name: str = "custom"

    def __post_init__(self):
        if self.B < 0 or self.S < 0:
            raise ValueError("Lipschitz constants B and S must be non-negative")

    def eval_b(self, t, x):
        return np.broadcast_to(np.asarray(self.b(t, x), dtype=float), np.shape(x))

    def eval_sigma(self, t, x):
        return np.broadcast_to(np.asarray(self.sigma(t, x), dtype=float), np.shape(x))

    def b_size(self, s, x):
        return self.bound_b if self.bound_b is not None else abs(float(self.eval_b(s, x)))

    def sigma_size(self, s, x):
        return self.bound_sigma if self.bound_sigma is not None else abs(float(self.eval_sigma(s, x)))


ZERO_FIELD = CoefficientField(lambda t, x: 0.0, lambda t, x: 0.0, 0.0, 0.0,
                              lambda t, x: 0.0, lambda t, x: 0.0, name="zero")


@dataclass(frozen=True)
class SolverConfig:
    """Exponents, ball radius and Picard controls.

    ``K`` and ``L`` may be left as ``None`` and are then measured from the
    driver (see :meth:`resolve`).
    """

    beta: float
    gamma: float
    K: float = None
    L: float = None
    contraction_margin: float = 0.9
    picard_tol: float = 1e-10
    max_picard_iters: int = 200
    L_safety: float = 1.1

    def __post_init__(self):
        if not 0.5 < self.gamma <= 1:
            raise HypothesisError(f"need 1/2 < gamma <= 1, got gamma={self.gamma}")
        if not self.gamma > self.beta > 1 - self.gamma:
            raise HypothesisError(
                f"need gamma > beta > 1 - gamma, got beta={self.beta}, gamma={self.gamma}")
        if not 0 < self.contraction_margin < 1:
            raise ValueError("contraction_margin must lie in (0, 1)")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if self.K is not None and not self.K > 0:
            raise ValueError("K must be positive")
        if self.L is not None and self.L < 0:
            raise ValueError("L must be non-negative")

    def resolve(self, coeffs, g, x0, T=None):
        """Fill in ``K`` and ``L`` from the driver on ``[g.t0, g.t0 + T]``.

        ``L`` is the grid Hölder-``gamma`` coefficient of ``g`` times
        ``L_safety``; ``K`` is twice the Hölder-``beta`` coefficient of the
        driver-only integral ``sigma(0, x0) (g - g(0))``, floored at 1.
        """
        seg = g if T is None else g.segment(0, g.node_index(g.t0 + T))
        L, K = self.L, self.K
        if L is None:
            L = self.L_safety * holder_coefficient(seg, self.gamma)
        if K is None:
            s0 = abs(float(coeffs.eval_sigma(g.t0, x0)))
            K = max(1.0, 2.0 * s0 * holder_coefficient(seg, self.beta)) if s0 else 1.0
        return replace(self, K=float(K), L=float(L))


def default_config(alpha, **kwargs):
    """Config for an fBm driver with exponent ``alpha``.

    ``gamma = (1+alpha)/2 - 0.05`` sits just below the driver's regularity.
    ``beta = 1 - gamma + min(0.05, (2 gamma - 1)/4)`` stays close to the
    lower limit, which keeps ``eps**(gamma-beta)`` small in the step rule.
    """
    gamma = (1 + alpha) / 2 - 0.05
    beta = 1 - gamma + min(0.05, (2 * gamma - 1) / 4)
    return SolverConfig(beta=kwargs.pop("beta", beta), gamma=kwargs.pop("gamma", gamma), **kwargs)


def _dyadic_gap(beta, gamma):
    gap = 2.0 ** (beta + gamma) - 2.0
    if not gap > 0:
        raise HypothesisError(f"beta+gamma <= 1 (to rounding): beta={beta}, gamma={gamma}")
    return gap


def lhs_ball(eps, b_size, sigma_size, B, S, L, K, beta, gamma):
    """Left side of the ball-preservation condition; ``F`` maps the ball into itself when ``<= K``."""
    gap = _dyadic_gap(beta, gamma)
    eb = eps**beta
    drift = (b_size + B * (eps + K * eb)) * eps ** (1 - gamma)
    noise = L * (1 + eb / gap) * (sigma_size + S * (1 + eb) * (eps ** (1 - beta) + K))
    return eps ** (gamma - beta) * (1 + eb) * (drift + noise)


def lhs_contraction(eps, B, S, L, K, beta, gamma):
    """Lipschitz constant of ``F`` on the ball at step length ``eps``."""
    gap = _dyadic_gap(beta, gamma)
    eb = eps**beta
    return (eps ** (gamma - beta) * (1 + eb)
            * (B * eps ** (1 - gamma) + L * S * (2 + eps ** (1 - beta) + K) * (1 + eb / gap)))


def step_size(s, x_s, coeffs, L, config, remaining, cell=None):
    """Largest admissible step ``eps <= remaining``.

    With ``cell`` given, ``eps`` is a whole number of cells (rounded down) and
    at least one cell; otherwise it is found by bisection on the reals.  Both
    left sides increase with ``eps``, so bisection is exact.

    Raises
    ------
    StepTooCoarseError
        If even a single cell violates the conditions.
    """
    if not remaining > 0:
        raise ValueError("remaining time must be positive")
    K, theta = config.K, config.contraction_margin
    bs, ss = coeffs.b_size(s, x_s), coeffs.sigma_size(s, x_s)
    args = (coeffs.B, coeffs.S, L, K, config.beta, config.gamma)

    def ok(eps):
        return (lhs_ball(eps, bs, ss, *args) <= K
                and lhs_contraction(eps, *args) <= theta)

    if cell is None:
        if ok(remaining):
            return float(remaining)
        lo, hi = 0.0, float(remaining)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if ok(mid) else (lo, mid)
        return lo
    n_max = int(round(remaining / cell))
    if ok(n_max * cell):
        return n_max * cell
    if not ok(cell):
        raise StepTooCoarseError(
            f"step conditions fail at one grid cell ({cell:.3g}) from s={s}: "
            f"ball side {lhs_ball(cell, bs, ss, *args):.3g} vs K={K}, "
            f"contraction {lhs_contraction(cell, *args):.3g} vs {theta}; "
            "refine the grid or enlarge K", reached=s)
    lo, hi = 1, n_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (mid, hi) if ok(mid * cell) else (lo, mid)
    return lo * cell


def _coef(v, cell, beta):
    n = v.size
    if n > 64:
        return holder_coefficient_values(v, cell, beta)
    idx = np.arange(n)
    lag = np.abs(idx[:, None] - idx[None, :])
    lag[lag == 0] = 1
    return float(np.max(np.abs(v[:, None] - v[None, :]) / (lag * cell) ** beta))


def _norm(v, cell, beta):
    return float(np.max(np.abs(v))) + _coef(v, cell, beta)


@dataclass(frozen=True)
class StepResult:
    """Fixed point on one step; ``values`` are the nodes ``s .. s + eps``.

    Steps cover arbitrary cell counts, so the values are a plain array rather
    than a GridPath.
    """

    s: float
    eps: float
    values: np.ndarray
    iters: int
    residual: float
    contraction: float


def _picard_operator(a, times, gv, h, coeffs):
    def F(X):
        tl, xl = times[:-1], X[:-1]
        inc = coeffs.eval_b(tl, xl) * h + coeffs.eval_sigma(tl, xl) * np.diff(gv)
        out = np.empty_like(X)
        out[0] = a
        np.cumsum(inc, out=out[1:])
        out[1:] += a
        return out
    return F


def picard_solve_step(a, s, eps, coeffs, g, config, init="constant"):
    """Fixed point of ``F`` on ``[s, s + eps]`` by Picard iteration.

    ``init`` is ``"constant"`` (``X0 = a``) or ``"ramp"`` (a line from ``a``
    rising to half the ball radius).  Every iterate is checked to lie in the
    Hölder ball of radius ``config.K``.

    Raises
    ------
    PicardError
        If an iterate leaves the ball or the iteration limit is reached.
    """
    K = config.K
    if K is None:
        raise ValueError("config.K is unset; call config.resolve first")
    i0 = g.node_index(s)
    i1 = g.node_index(s + eps)
    if i1 <= i0:
        raise GridError("step must span at least one cell")
    h = g.cell
    times = g.t0 + h * np.arange(i0, i1 + 1)
    gv = g.values[i0:i1 + 1]
    F = _picard_operator(float(a), times, gv, h, coeffs)
    beta = config.beta
    if init == "constant":
        X = np.full(times.size, float(a))
    elif init == "ramp":
        X = a + 0.5 * K * eps**beta * (times - times[0]) / (times[-1] - times[0])
    else:
        raise ValueError(f"unknown Picard start {init!r}")

    prev_diff = None
    contraction = math.nan
    for it in range(1, config.max_picard_iters + 1):
        X_new = F(X)
        if _coef(X_new, h, beta) > K * (1 + 1e-12):
            raise PicardError(
                f"Picard iterate {it} left the Hölder ball (coefficient "
                f"{_coef(X_new, h, beta):.4g} > K={K}) on [{s}, {s + eps}]; "
                "the driver's Hölder data are probably underestimated")
        diff = _norm(X_new - X, h, beta)
        if prev_diff is not None:
            contraction = diff / prev_diff if prev_diff > 0 else 0.0
        X = X_new
        if diff < config.picard_tol:
            residual = _norm(X - F(X), h, beta)
            return StepResult(float(s), float(eps), X, it, residual, contraction)
        prev_diff = diff
    raise PicardError(f"Picard iteration did not reach tol {config.picard_tol} in "
                      f"{config.max_picard_iters} iterations on [{s}, {s + eps}]")


@dataclass(frozen=True)
class StepRecord:
    s: float
    eps: float
    iters: int
    residual: float
    contraction: float
    lam: float

    def to_dict(self):
        return {"s": self.s, "eps": self.eps, "iters": self.iters, "residual": self.residual,
                "contraction": None if math.isnan(self.contraction) else self.contraction,
                "lambda": self.lam}


@dataclass
class Solution:
    path: GridPath
    steps: list
    config: SolverConfig
    x0: float
    coeffs_name: str = "custom"
    extra: dict = field(default_factory=dict)


def solve(x0, T, coeffs, g, config, init="constant"):
    """Solve on ``[g.t0, g.t0 + T]`` by chaining contraction steps.

    ``T`` must be a node of ``g`` a power-of-two number of cells from ``g.t0``
    so that the solution is again a GridPath.

    Raises
    ------
    StepTooCoarseError
        With ``reached`` set to the time the solution got to.
    """
    iT = g.node_index(g.t0 + T)
    if iT <= 0 or iT & (iT - 1):
        raise GridError(f"T={T} spans {iT} cells; need a power of two")
    config = config.resolve(coeffs, g, x0, T)
    h = g.cell
    args = (coeffs.B, coeffs.S, config.L, config.K, config.beta, config.gamma)
    values = np.empty(iT + 1)
    values[0] = x0
    steps = []
    i = 0
    while i < iT:
        s = g.t0 + i * h
        try:
            eps = step_size(s, values[i], coeffs, config.L, config, (iT - i) * h, cell=h)
        except StepTooCoarseError as exc:
            raise StepTooCoarseError(str(exc), reached=s) from None
        n = int(round(eps / h))
        res = picard_solve_step(values[i], s, n * h, coeffs, g, config, init=init)
        values[i + 1:i + n + 1] = res.values[1:]
        steps.append(StepRecord(s, n * h, res.iters, res.residual, res.contraction,
                                lhs_contraction(n * h, *args)))
        i += n
    path = GridPath(g.t0, g.t0 + T, int(iT).bit_length() - 1, values)
    return Solution(path, steps, config, float(x0), coeffs.name)


def verify_solution(sol, coeffs, g, config=None):
    """Largest residual of the integral equation at the solution's nodes."""
    X = sol.path
    gseg = g.segment(0, g.node_index(X.t1)) if X.t1 < g.t1 else g
    if not X.same_grid(gseg):
        raise GridError("solution and driver grids differ")
    t = X.times
    xv = X.values
    drift = running_integral_values(np.asarray(coeffs.eval_b(t, xv)), t)
    noise = running_integral_values(np.asarray(coeffs.eval_sigma(t, xv)), gseg.values)
    return float(np.max(np.abs(xv - X.values[0] - drift - noise)))


def driver_hash(g):
    return hashlib.sha256(np.ascontiguousarray(g.values).tobytes()).hexdigest()


def solution_diagnostics(sol, g):
    return {
        "steps": [st.to_dict() for st in sol.steps],
        "config": asdict(sol.config),
        "x0": sol.x0,
        "coefficients": sol.coeffs_name,
        "driver_hash": driver_hash(g),
        **sol.extra,
    }


def write_solution(sol, g, csv_path, json_path):
    """Write the solution path CSV and the diagnostics JSON."""
    write_gridpath_csv(sol.path, csv_path)
    with open(json_path, "w") as fh:
        json.dump(solution_diagnostics(sol, g), fh, indent=2, sort_keys=True)
        fh.write("\n")
