"""Solve dX = X dg on one fBm driver and compare with exp(g(T) - g(0))."""

import math

from youngfbm.catalog import coefficient_field
from youngfbm.fbm import FbmSpec, sample_path
from youngfbm.sde import default_config, solve

g = sample_path(FbmSpec(0.7, 1.0, 14, 3), 0)
sol = solve(1.0, 1.0, coefficient_field("constant:c=0", "linear:a=1"), g, default_config(0.7))
exact = math.exp(g.values[-1] - g.values[0])
print(f"steps {len(sol.steps)}  X(T) {sol.path.values[-1]:.6f}  exp(dg) {exact:.6f}")
