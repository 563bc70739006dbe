"""Stieltjes integrals of Hölder paths via nested dyadic sums.

For paths ``f`` and ``g`` on a common dyadic grid the integral over ``[s, t]``
is written as a coarse term ``f(s) (g(t) - g(s))`` plus one correction per
refinement level ``k``: the sum over the ``2**(k-1)`` pairs of adjacent
sub-intervals of (increment of ``f`` on the left half) times (increment of
``g`` on the right half).  Truncating after ``depth`` levels reproduces the
left Riemann sum on ``2**depth`` cells; the discarded levels form a geometric
series whose size is controlled by the Hölder data of the two operands.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePathError, GridError, HypothesisError
from .holder import GridPath, estimate_holder_exponent, holder_coefficient_values


@dataclass(frozen=True)
class HolderData:
    """Exponents and coefficients certifying ``f in C^beta`` and ``g in C^gamma``."""

    beta: float
    Kf: float
    gamma: float
    Kg: float

    def check(self):
        if self.beta + self.gamma <= 1:
            raise HypothesisError(
                f"beta+gamma <= 1 (beta={self.beta}, gamma={self.gamma}); "
                "the dyadic series is only controlled when beta+gamma > 1")
        if self.Kf < 0 or self.Kg < 0:
            raise ValueError("Hölder coefficients must be non-negative")


@dataclass(frozen=True)
class IntegralResult:
    value: float
    depth_used: int
    truncation_bound: float


def _gap_constant(beta, gamma):
    # 2^(beta+gamma) - 2, the denominator in the dyadic summation bounds
    if beta + gamma <= 1:
        raise HypothesisError(f"beta+gamma <= 1 (beta={beta}, gamma={gamma})")
    return 2.0 ** (beta + gamma) - 2.0


def truncation_bound(holder, length, depth):
    """Size of the levels ``k > depth`` of the dyadic series.

    ``(Kf Kg / 2) length**(b+g) 2**((depth+1)(1-b-g)) / (1 - 2**(1-b-g))``
    """
    holder.check()
    if length <= 0:
        raise ValueError("interval length must be positive")
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if holder.Kf == 0 or holder.Kg == 0:
        return 0.0
    e = holder.beta + holder.gamma
    return (0.5 * holder.Kf * holder.Kg * length**e
            * 2.0 ** ((depth + 1) * (1 - e)) / (1 - 2.0 ** (1 - e)))


def level_increment_bound(holder, length, depth):
    """Bound on the single level ``depth + 1`` term (the step from depth d to d+1)."""
    holder.check()
    e = holder.beta + holder.gamma
    return 0.5 * holder.Kf * holder.Kg * length**e * 2.0 ** ((depth + 1) * (1 - e))


def max_depth(i_s, i_t):
    """Deepest dyadic level that stays on the grid between node indices."""
    m = i_t - i_s
    if m <= 0:
        raise GridError("need s < t")
    return (m & -m).bit_length() - 1


def level_terms(f, g, i_s, i_t, depth):
    """Per-level correction sums ``k = 1..depth`` between two node indices."""
    fv, gv = f.values, g.values
    m = i_t - i_s
    out = []
    for k in range(1, depth + 1):
        step = m >> k
        left = np.arange(i_s, i_t, 2 * step)
        df = fv[left + step] - fv[left]
        dg = gv[left + 2 * step] - gv[left + step]
        out.append(df * dg)
    return out


def _measured_holder(f, g, i_s, i_t):
    def one(p):
        seg = p.values[i_s:i_t + 1]
        if np.all(seg == seg[0]):
            return 1.0, 0.0
        try:
            e = estimate_holder_exponent(p) if p.level >= 4 else 1.0
        except DegeneratePathError:
            e = 1.0
        e = float(min(max(e, 1e-3), 1.0))
        return e, holder_coefficient_values(seg, p.cell, e,
                                            mode="exact" if seg.size <= 4097 else "dyadic")

    beta, kf = one(f)
    gamma, kg = one(g)
    return HolderData(beta, kf, gamma, kg)


def young_integrate(f, g, s, t, depth=None, holder=None):
    """Dyadic-sum Stieltjes integral of ``f`` against ``g`` over ``[s, t]``.

    Parameters
    ----------
    f, g : GridPath
        Integrand and integrator on the same grid.
    s, t : float
        Grid nodes with ``s < t``.
    depth : int, optional
        Number of refinement levels; defaults to the deepest level the grid
        resolves between ``s`` and ``t``.
    holder : HolderData, optional
        Hölder data used for the truncation bound.  Without it, exponents are
        estimated from the paths and coefficients measured on ``[s, t]``.  Grid
        coefficients can underestimate the true ones, so that bound is only
        indicative; if the estimated exponents sum to at most 1 the bound is
        reported as ``inf``.

    Returns
    -------
    IntegralResult
    """
    if not f.same_grid(g):
        raise GridError("f and g must share a grid")
    i_s, i_t = f.node_index(s), f.node_index(t)
    dmax = max_depth(i_s, i_t)
    if depth is None:
        depth = dmax
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if depth > dmax:
        raise GridError(f"depth {depth} exceeds the grid resolution between s={s} and t={t}; "
                        f"max feasible depth is {dmax}")
    coarse = f.values[i_s] * (g.values[i_t] - g.values[i_s])
    terms = level_terms(f, g, i_s, i_t, depth)
    value = math.fsum([coarse] + [x for lvl in terms for x in lvl.tolist()])

    length = (i_t - i_s) * f.cell
    if holder is None:
        holder = _measured_holder(f, g, i_s, i_t)
        if holder.Kf == 0 or holder.Kg == 0:
            bound = 0.0
        elif holder.beta + holder.gamma <= 1:
            bound = math.inf
        else:
            bound = truncation_bound(holder, length, depth)
    else:
        bound = truncation_bound(holder, length, depth)
    return IntegralResult(value, depth, bound)


def running_integral(f, g):
    """``int_{t0}^{t_j} f dg`` at every node ``j``, at full grid depth.

    Splitting ``[t0, t_j]`` into the dyadic blocks of the binary expansion of
    ``j``, each block's full-depth dyadic sum is its left Riemann sum, so the
    running integral is the cumulative left Riemann sum.
    """
    if not f.same_grid(g):
        raise GridError("f and g must share a grid")
    return running_integral_values(f.values, g.values)


def running_integral_values(fv, gv):
    out = np.empty(np.shape(fv)[-1])
    out[0] = 0.0
    np.cumsum(fv[:-1] * np.diff(gv), out=out[1:])
    return out


def sup_bound(L, normX, beta, gamma, s, t):
    """Upper bound on ``|int_s^t X dg|`` for ``g in C_L^gamma`` and ``||X||_beta <= normX``.

    ``L normX (t-s)**gamma (1 + (t-s)**beta / (2**(beta+gamma) - 2))``
    """
    if not t > s:
        raise ValueError("need t > s")
    d = _gap_constant(beta, gamma)
    ell = t - s
    return L * normX * ell**gamma * (1 + ell**beta / d)


def holder_bound_of_integral(L, normX, beta, gamma, eps):
    """Sup and Hölder-norm bounds for ``t -> int_s^t X dg`` on ``[s, s+eps]``.

    Returns ``(sup_part, holder_part)`` where ``holder_part`` bounds the full
    ``||.||_beta`` norm of the integral.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = _gap_constant(beta, gamma)
    tail = 1 + eps**beta / d
    sup_part = L * normX * eps**gamma * tail
    holder_part = L * normX * eps ** (gamma - beta) * (1 + eps**beta) * tail
    return sup_part, holder_part


def drift_holder_bound(sup_norm, beta, eps):
    """``||int_s^t X dtau||_beta <= ||X||_inf eps**(1-beta) (1 + eps**beta)``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return sup_norm * eps ** (1 - beta) * (1 + eps**beta)


@dataclass(frozen=True)
class ScalarField:
    """A function ``u(t, x)`` with its partial derivatives, all vectorized."""

    u: object
    u_t: object
    u_x: object


def change_of_variables_check(field, e, f, g, eta0, depth=None):
    """Largest defect of the first-order chain rule along a Stieltjes path.

    Builds ``eta = eta0 + int e ds + int f dg`` on the grid and returns
    ``max_t |u(t, eta) - u(0, eta0) - int (u_t + u_x e) ds - int u_x f dg|``.
    ``depth`` selects a coarser dyadic level for all integrals.
    """
    if not (e.same_grid(f) and f.same_grid(g)):
        raise GridError("e, f and g must share a grid")
    if depth is not None:
        if depth > g.level:
            raise GridError(f"depth {depth} exceeds the grid level {g.level}")
        e, f, g = e.coarsen(depth), f.coarsen(depth), g.coarsen(depth)
    t = g.times
    clock = GridPath(g.t0, g.t1, g.level, t)
    eta = eta0 + running_integral(e, clock) + running_integral(f, g)
    ux = np.broadcast_to(field.u_x(t, eta), t.shape)
    ut = np.broadcast_to(field.u_t(t, eta), t.shape)
    lhs = np.broadcast_to(field.u(t, eta), t.shape) - field.u(t[0], eta0)
    rhs = (running_integral_values(ut + ux * e.values, t)
           + running_integral_values(ux * f.values, g.values))
    return float(np.max(np.abs(lhs - rhs)))
