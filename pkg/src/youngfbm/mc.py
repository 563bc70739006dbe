"""Monte Carlo tails of maxima of stochastic integrals, checked against the bounds.

Three experiment kinds are supported:

``driver-max``
    the fBm path itself;
``deterministic-integrand``
    ``X(t) = int_0^t f dxi`` for a time-only ``f``, sampled exactly as a
    Gaussian vector;
``state-dependent-integrand``
    ``X(t) = int_0^t f(tau, xi(tau)) dxi(tau)`` along sampled fBm paths, as a
    running dyadic (left Riemann) sum.

Under ``normalization="rescaled"`` the driver is divided by ``sqrt(2C)`` so
that ``Var xi(1) = 1``; the analytic bounds are adjusted to match where they
depend on the variance (Slepian, Fernique) and used as is otherwise.
"""

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import beta as beta_dist

from .catalog import state_integrand, time_integrand
from .errors import PreconditionError
from .fbm import FbmSpec, batch_size_for, kernel_constant, sample_batch
from .gauss import (TailBoundParams, fernique_constant, fernique_tail_bound,
                    fernique_threshold, integrand_factor, maxf_tail_bound,
                    optimize_slepian_split, sample_from_factor, slepian_tail_bound)

KINDS = ("driver-max", "deterministic-integrand", "state-dependent-integrand")
BOUND_KINDS = ("slepian", "fernique", "maxf")
# which functional of the path each bound controls
BOUND_STATISTIC = {"slepian": "max", "fernique": "absmax", "maxf": "max"}


@dataclass(frozen=True)
class ExperimentSpec:
    """A seeded Monte Carlo experiment.

    ``integrand`` is a catalog description (ignored for ``driver-max``).
    ``bound`` holds parameters of the analytic bound: ``r`` (a number or
    ``"optimize"``) for Slepian, ``m`` and ``inflate`` for Fernique,
    ``gamma`` for the series bound.
    """

    kind: str
    alpha: float
    level: int
    n_paths: int
    seed: int
    lambda_grid: tuple
    integrand: object = "const:c=1"
    normalization: str = "paper"
    bound: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.n_paths < 100:
            raise ValueError("n_paths must be at least 100")
        grid = tuple(float(x) for x in self.lambda_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda_grid must be non-empty and strictly ascending")
        if self.normalization not in ("paper", "rescaled"):
            raise ValueError("normalization must be 'paper' or 'rescaled'")
        if int(self.level) != self.level or self.level < 1:
            raise ValueError("level must be a positive integer")
        object.__setattr__(self, "lambda_grid", grid)
        object.__setattr__(self, "bound", dict(self.bound))

    def to_dict(self):
        d = asdict(self)
        d["lambda_grid"] = list(self.lambda_grid)
        return d

    @classmethod
    def from_dict(cls, d):
        allowed = set(cls.__dataclass_fields__)
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown experiment fields {sorted(unknown)}")
        return cls(**d)

    @property
    def driver_scale(self):
        return 1 / math.sqrt(2 * kernel_constant(self.alpha)) if self.normalization == "rescaled" else 1.0


@dataclass
class TailBoundReport:
    """Analytic bound and empirical tail over a threshold grid.

    ``verdict`` entries are ``"pass"``, ``"fail"``, ``"skipped"`` (bound
    precondition not met) or ``None`` when no bound was computed.
    """

    alpha: float
    bound_kind: str
    lambdas: list
    empirical: list
    ci_upper: list
    n_paths: int
    seed: int
    normalization: str
    level: int
    kind: str
    statistic: str
    gamma: float = None
    params: dict = field(default_factory=dict)
    analytic: list = None
    verdict: list = None

    @property
    def passed(self):
        if self.verdict is None:
            return None
        return all(v != "fail" for v in self.verdict)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "analytic", "empirical", "ci_upper", "verdict"])
        for i, lam in enumerate(self.lambdas):
            a = "" if self.analytic is None or self.analytic[i] is None else repr(self.analytic[i])
            v = "" if self.verdict is None else self.verdict[i]
            w.writerow([repr(lam), a, repr(self.empirical[i]), repr(self.ci_upper[i]), v])
        return buf.getvalue()


def clopper_pearson_upper(k, n, confidence=0.99):
    """One-sided exact binomial upper confidence bound for ``k`` successes in ``n``."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if k == n:
        return 1.0
    return float(beta_dist.ppf(confidence, k + 1, n - k))


def survival_counts(maxima, lambdas):
    """Number of maxima strictly above each threshold, from one sorted sample."""
    srt = np.sort(np.asarray(maxima))
    return srt.size - np.searchsorted(srt, np.asarray(lambdas, dtype=float), side="right")


def _path_functional(values, statistic):
    if statistic == "max":
        return values.max(axis=1)
    if statistic == "absmax":
        return np.abs(values).max(axis=1)
    raise ValueError(f"unknown statistic {statistic!r}")


def _batch_maker(spec, level):
    """Return ``work(indices) -> rows of X on the level grid``."""
    scale = spec.driver_scale
    if spec.kind == "deterministic-integrand":
        integrand, _, _ = time_integrand(spec.integrand)
        factor = integrand_factor(integrand, level, 1.0, spec.alpha)
        return lambda idx: sample_from_factor(factor, spec.seed, idx, scale)
    # driver paths; state-dependent integrals are formed per level afterwards
    fspec = FbmSpec(spec.alpha, 1.0, level, spec.seed)
    return lambda idx: sample_batch(fspec, idx, scale=scale)


def _integrate_rows(spec, rows, level):
    """Running left sums ``sum f(t_i, xi_i) (xi_{i+1} - xi_i)`` row by row."""
    f, _, _, _ = state_integrand(spec.integrand)
    t = np.arange(rows.shape[1]) / 2**level
    vals = np.broadcast_to(f(t[None, :-1], rows[:, :-1]), rows[:, :-1].shape)
    out = np.zeros_like(rows)
    np.cumsum(vals * np.diff(rows, axis=1), axis=1, out=out[:, 1:])
    return out


def sample_maxima(spec, statistic, levels=None, threads=1):
    """Path maxima in replica order, one array per requested level.

    All levels share the same underlying paths: the finest level is sampled
    and coarser ones read off its sub-grid, so differences between levels are
    pure resolution effects.
    """
    levels = sorted(set(levels or [spec.level]))
    fine = levels[-1]
    work = _batch_maker(spec, fine)

    def job(idx):
        rows = work(idx)
        res = {}
        for lvl in levels:
            sub = rows[:, ::2 ** (fine - lvl)]
            if spec.kind == "state-dependent-integrand":
                sub = _integrate_rows(spec, sub, lvl)
            res[lvl] = _path_functional(sub, statistic)
        return res

    size = batch_size_for(fine)
    chunks = [list(range(a, min(a + size, spec.n_paths))) for a in range(0, spec.n_paths, size)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    return {lvl: np.concatenate([p[lvl] for p in parts]) for lvl in levels}


def _tail_from_maxima(maxima, lambdas):
    n = maxima.size
    counts = survival_counts(maxima, lambdas)
    empirical = [float(k) / n for k in counts]
    ci = [clopper_pearson_upper(int(k), n) for k in counts]
    return empirical, ci


def empirical_max_tail(spec, statistic="max", threads=1):
    """Empirical survival function of the path maximum, with 99% upper bounds."""
    maxima = sample_maxima(spec, statistic, threads=threads)[spec.level]
    empirical, ci = _tail_from_maxima(maxima, spec.lambda_grid)
    return TailBoundReport(spec.alpha, None, list(spec.lambda_grid), empirical, ci,
                           spec.n_paths, spec.seed, spec.normalization, spec.level,
                           spec.kind, statistic, params={"integrand": spec.integrand})


def _time_integrand_for(spec):
    if spec.kind == "driver-max":
        return time_integrand("const:c=1")
    if spec.kind == "deterministic-integrand":
        return time_integrand(spec.integrand)
    raise PreconditionError("Slepian and Fernique bounds need a time-only integrand")


def analytic_bounds(spec, bound_kind):
    """Analytic bound per threshold (``None`` where a precondition fails) and the parameters used."""
    lambdas = spec.lambda_grid
    opts = dict(spec.bound)
    q_scale = spec.driver_scale**2
    if bound_kind == "slepian":
        integrand, _, _ = _time_integrand_for(spec)
        r = opts.get("r", 1.0)
        out, rs = [], []
        for lam in lambdas:
            if r == "optimize":
                r_star, val = optimize_slepian_split(integrand, lam, spec.alpha, q_scale=q_scale)
                rs.append(r_star)
                out.append(val)
            else:
                out.append(slepian_tail_bound(integrand, lam, float(r), spec.alpha, q_scale=q_scale))
        return out, {"r": rs if r == "optimize" else float(r)}
    if bound_kind == "fernique":
        integrand, _, _ = _time_integrand_for(spec)
        m = int(opts.get("m", 2))
        inflate = float(opts.get("inflate", 1.05))
        c = fernique_constant(integrand, m, spec.alpha, q_scale=q_scale)
        threshold = fernique_threshold(m)
        out = [fernique_tail_bound(integrand, lam, m, spec.alpha, inflate=inflate, c=c)
               if lam >= threshold else None for lam in lambdas]
        return out, {"m": m, "inflate": inflate, "c": c, "threshold": threshold}
    if bound_kind == "maxf":
        if "gamma" not in opts:
            raise PreconditionError("the series bound needs bound.gamma")
        gamma = float(opts["gamma"])
        if spec.kind == "driver-max":
            f00, ft, fx = 1.0, 0.0, 0.0
        elif spec.kind == "deterministic-integrand":
            _, f00, ft = time_integrand(spec.integrand)
            fx = 0.0
        else:
            _, f00, ft, fx = state_integrand(spec.integrand)
        out = [maxf_tail_bound(TailBoundParams.from_alpha(spec.alpha, gamma, f00, ft, fx, lam),
                               spec.alpha) for lam in lambdas]
        return out, {"gamma": gamma, "f00": f00, "ft": ft, "fx": fx}
    raise ValueError(f"bound_kind must be one of {BOUND_KINDS}, got {bound_kind!r}")


def dominance_report(spec, bound_kind, threads=1):
    """Empirical tail and analytic bound side by side, with a verdict per threshold.

    A threshold passes when the bound is at least the 99% upper confidence
    limit of the empirical tail; thresholds outside the bound's validity are
    ``"skipped"``.
    """
    statistic = BOUND_STATISTIC[bound_kind]
    report = empirical_max_tail(spec, statistic, threads)
    analytic, params = analytic_bounds(spec, bound_kind)
    report.bound_kind = bound_kind
    report.analytic = analytic
    report.params.update(params)
    report.gamma = params.get("gamma")
    report.verdict = ["skipped" if a is None else ("pass" if a >= ci else "fail")
                      for a, ci in zip(analytic, report.ci_upper)]
    return report


def resolution_stability(spec, statistic="max", delta_level=2, threads=1):
    """Relative change of the empirical tail when the grid is refined.

    Returns a dict with both tails and ``rel_change`` per threshold,
    ``|p_fine - p_coarse| / max(p_fine, p_coarse)`` (0 when both are 0).
    """
    fine = spec.level + delta_level
    maxima = sample_maxima(spec, statistic, [spec.level, fine], threads)
    coarse_tail, _ = _tail_from_maxima(maxima[spec.level], spec.lambda_grid)
    fine_tail, _ = _tail_from_maxima(maxima[fine], spec.lambda_grid)
    rel = [0.0 if pf == 0 and pc == 0 else abs(pf - pc) / max(pf, pc)
           for pc, pf in zip(coarse_tail, fine_tail)]
    return {"levels": [spec.level, fine], "lambdas": list(spec.lambda_grid),
            "coarse": coarse_tail, "fine": fine_tail, "rel_change": rel,
            "max_rel_change": max(rel)}
