"""Pathwise stochastic calculus with Hölder drivers and fractional Brownian motion.

Modules
-------
holder  grid paths, Hölder coefficients and exponent estimates
young   dyadic-sum Stieltjes integrals with truncation bounds
fbm     fBm covariance and exact path sampling
sde     contraction-step solver for dX = b dt + sigma dg
gauss   variance functional q_f and tail bounds for maxima
mc      Monte Carlo tails and dominance reports
cli     command-line entry point
"""

__version__ = "0.1.0"

from .errors import (DegeneratePathError, FactorizationError, GridError, HypothesisError,
                     InvalidPathError, PicardError, PreconditionError, QuadratureError,
                     StepTooCoarseError, YoungFbmError)
from .holder import (GridPath, HolderEstimate, estimate_holder_exponent, holder_coefficient,
                     holder_norm, in_ball)
from .young import (HolderData, IntegralResult, change_of_variables_check,
                    holder_bound_of_integral, sup_bound, truncation_bound, young_integrate)
from .fbm import FbmSpec, covariance, increment_covariance, kernel_constant, sample_path
from .sde import (CoefficientField, Solution, SolverConfig, default_config, picard_solve_step,
                  solve, step_size, verify_solution)
from .gauss import (DeterministicIntegrand, TailBoundParams, fernique_tail_bound,
                    maxf_tail_bound, qf, sample_deterministic_integral, slepian_tail_bound,
                    variance_of_integral)
from .mc import ExperimentSpec, TailBoundReport, dominance_report, empirical_max_tail
