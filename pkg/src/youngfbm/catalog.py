"""Named integrands and SDE coefficients usable from JSON specs and the CLI.

A description is either a string ``"name:key=value,key=value"`` or a dict
``{"name": ..., key: value}``.
"""

import math

import numpy as np

from .gauss import DeterministicIntegrand
from .sde import CoefficientField


def parse_description(desc):
    """Normalize a description into ``(name, params)``."""
    if isinstance(desc, dict):
        params = {k: v for k, v in desc.items() if k != "name"}
        if "name" not in desc:
            raise ValueError(f"description {desc!r} has no 'name'")
        return desc["name"], {k: float(v) for k, v in params.items()}
    name, _, rest = str(desc).partition(":")
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"expected key=value in {desc!r}, got {item!r}")
        params[key.strip()] = float(value)
    return name.strip(), params


def _take(params, defaults, what):
    unknown = set(params) - set(defaults)
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)} for {what}; "
                         f"allowed: {sorted(defaults)}")
    return {**defaults, **params}


# ---- time-only integrands ---------------------------------------------------

TIME_INTEGRANDS = {
    "const": {"c": 1.0},
    "linear": {"c0": 0.0, "c1": 1.0},
    "sin": {"amp": 1.0, "freq": 2 * math.pi, "phase": 0.0},
    "bump": {"center": 0.5, "width": 0.1, "height": 1.0},
}


def _bump(center, width, height):
    def f(t):
        u = (np.asarray(t, dtype=float) - center) / width
        out = np.zeros_like(u)
        inside = np.abs(u) < 1
        out[inside] = height * np.exp(1 - 1 / (1 - u[inside] ** 2))
        return out
    return f


def time_integrand(desc):
    """Build a :class:`DeterministicIntegrand` from a description.

    Also returns ``(f00, ft)``: ``|f(0)|`` and a sup-bound on ``|f'|`` over
    [0, 1], used when the integrand feeds the series bound.
    """
    name, params = parse_description(desc)
    if name not in TIME_INTEGRANDS:
        raise ValueError(f"unknown integrand {name!r}; choose from {sorted(TIME_INTEGRANDS)}")
    p = _take(params, TIME_INTEGRANDS[name], name)
    if name == "const":
        c = p["c"]
        f, ft = (lambda t: np.full(np.shape(t), c)), 0.0
    elif name == "linear":
        c0, c1 = p["c0"], p["c1"]
        f, ft = (lambda t: c0 + c1 * np.asarray(t, dtype=float)), abs(c1)
    elif name == "sin":
        amp, freq, phase = p["amp"], p["freq"], p["phase"]
        f, ft = (lambda t: amp * np.sin(freq * np.asarray(t, dtype=float) + phase)), abs(amp * freq)
    else:
        f = _bump(p["center"], p["width"], p["height"])
        # max of |d/du exp(1 - 1/(1-u^2))| is 2.17036 (numerically), rounded up
        ft = 2.1704 * abs(p["height"]) / p["width"]
    integrand = DeterministicIntegrand(f, name, params=p)
    return integrand, abs(float(integrand(np.array([0.0]))[0])), ft


# ---- state-dependent integrands f(t, x) ------------------------------------

STATE_INTEGRANDS = {"affine": {"c0": 1.0, "ct": 0.0, "cx": 0.0}}


def state_integrand(desc):
    """``(f, f00, ft, fx)`` for ``f(t, x)`` given by a description.

    Time-only names are accepted too (``fx = 0``).
    """
    name, params = parse_description(desc)
    if name in TIME_INTEGRANDS:
        integrand, f00, ft = time_integrand(desc)
        return (lambda t, x: integrand(t) + 0 * x), f00, ft, 0.0
    if name not in STATE_INTEGRANDS:
        raise ValueError(f"unknown integrand {name!r}; choose from "
                         f"{sorted(STATE_INTEGRANDS) + sorted(TIME_INTEGRANDS)}")
    p = _take(params, STATE_INTEGRANDS[name], name)
    c0, ct, cx = p["c0"], p["ct"], p["cx"]
    return (lambda t, x: c0 + ct * t + cx * x), abs(c0), abs(ct), abs(cx)


# ---- SDE coefficients -------------------------------------------------------

COEFFICIENTS = {
    "constant": {"c": 0.0},
    "linear": {"a": 1.0, "c": 0.0},
    "sinusoidal-t": {"amp": 1.0, "freq": 1.0, "phase": 0.0, "c": 0.0},
    "logistic-x": {"A": 1.0, "k": 1.0, "x0": 0.0},
}


def coefficient(desc):
    """Return ``(func, d_t, d_x, S)`` for one coefficient.

    ``S`` is a common Lipschitz constant of the function and its two partial
    derivatives, jointly in ``(t, x)``.

    - ``constant``: ``c``
    - ``linear``: ``a x + c``
    - ``sinusoidal-t``: ``c + amp sin(freq t + phase)``
    - ``logistic-x``: ``A / (1 + exp(-k (x - x0)))``
    """
    name, params = parse_description(desc)
    if name not in COEFFICIENTS:
        raise ValueError(f"unknown coefficient {name!r}; choose from {sorted(COEFFICIENTS)}")
    p = _take(params, COEFFICIENTS[name], name)
    zero = lambda t, x: 0.0 * np.asarray(x, dtype=float)
    if name == "constant":
        c = p["c"]
        return (lambda t, x: c + zero(t, x)), zero, zero, 0.0
    if name == "linear":
        a, c = p["a"], p["c"]
        return (lambda t, x: a * np.asarray(x, dtype=float) + c), zero, (lambda t, x: a + zero(t, x)), abs(a)
    if name == "sinusoidal-t":
        amp, freq, phase, c = p["amp"], p["freq"], p["phase"], p["c"]
        func = lambda t, x: c + amp * np.sin(freq * np.asarray(t, dtype=float) + phase) + zero(t, x)
        d_t = lambda t, x: amp * freq * np.cos(freq * np.asarray(t, dtype=float) + phase) + zero(t, x)
        return func, d_t, zero, max(abs(amp * freq), abs(amp) * freq**2)
    A, k, x0 = p["A"], p["k"], p["x0"]

    def func(t, x):
        return A / (1 + np.exp(-k * (np.asarray(x, dtype=float) - x0)))

    def d_x(t, x):
        s = 1 / (1 + np.exp(-k * (np.asarray(x, dtype=float) - x0)))
        return A * k * s * (1 - s)

    # |A k^2 s(1-s)(1-2s)| peaks at 1/(6 sqrt 3)
    return func, zero, d_x, max(abs(A * k) / 4, abs(A) * k * k / (6 * math.sqrt(3)))


def coefficient_field(b_desc, sigma_desc, bound_b=None, bound_sigma=None):
    """CoefficientField from two catalog descriptions."""
    b, _, _, B = coefficient(b_desc)
    sigma, s_t, s_x, S = coefficient(sigma_desc)
    name = f"b={_canon(b_desc)};sigma={_canon(sigma_desc)}"
    return CoefficientField(b, sigma, B, S, s_t, s_x, bound_b, bound_sigma, name)


def _canon(desc):
    name, params = parse_description(desc)
    return name + (":" + ",".join(f"{k}={v!r}" for k, v in sorted(params.items())) if params else "")
