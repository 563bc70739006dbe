"""Random smooth test functions with exact derivatives and Lipschitz bounds."""

import numpy as np


class Smooth:
    """``a0 + a1 t + a2 t^2 + sum_k (b_k sin(w_k t) + c_k cos(w_k t))``."""

    def __init__(self, rng, n_modes=3, max_freq=6.0):
        self.a = rng.standard_normal(3)
        self.b = rng.standard_normal(n_modes)
        self.c = rng.standard_normal(n_modes)
        self.w = rng.uniform(0.5, max_freq, n_modes)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        wt = np.multiply.outer(t, self.w)
        return self.a[0] + self.a[1] * t + self.a[2] * t**2 + (np.sin(wt) @ self.b + np.cos(wt) @ self.c)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        wt = np.multiply.outer(t, self.w)
        return self.a[1] + 2 * self.a[2] * t + (np.cos(wt) @ (self.b * self.w) - np.sin(wt) @ (self.c * self.w))

    def lipschitz(self, length=1.0):
        """Sup of |f'| on an interval of the given length starting at 0."""
        return abs(self.a[1]) + 2 * abs(self.a[2]) * length + float(np.sum(self.w * (np.abs(self.b) + np.abs(self.c))))
