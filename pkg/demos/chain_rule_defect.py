"""Compare g(T)^2 - g(0)^2 with twice the dyadic integral of g against itself.

At full grid depth the gap equals the discrete quadratic variation of the
path, which shrinks like 2**(-level * alpha).
"""

import numpy as np

from youngfbm.fbm import FbmSpec, sample_path
from youngfbm.young import young_integrate

for level in (8, 10, 12, 14):
    g = sample_path(FbmSpec(0.7, 1.0, level, 1), 0)
    lhs = g.values[-1] ** 2 - g.values[0] ** 2
    rhs = 2 * young_integrate(g, g, 0.0, 1.0).value
    qv = float(np.sum(np.diff(g.values) ** 2))
    print(f"level {level:2d}: defect {abs(lhs - rhs):.3e}  quadratic variation {qv:.3e}")
