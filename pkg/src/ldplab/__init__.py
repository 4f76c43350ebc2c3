"""Numerical laboratory for small-noise large deviations of monotone SPDEs.

The package discretizes variational SPDEs ``dX = A(t, X) dt + eps B(t, X) dW``
on a 1D grid, audits the structural hypotheses their well-posedness rests on,
integrates skeleton and controlled stochastic paths, approximates the rate
function by optimal control and checks small-noise asymptotics by Monte Carlo.
"""

__version__ = "0.1.0"

from .spaces import SpaceDiscretization  # noqa: E402
from .models import HypothesisProfile, Model, builtin_model, builtin_models  # noqa: E402
from .dynamics import (Control, SchemeOptions, TimeGrid, Trajectory,  # noqa: E402
                       simulate_controlled_spde, solve_galerkin_level, solve_skeleton)
from .rate import RateProblem, rate_endpoint  # noqa: E402
from .montecarlo import estimate_exceedance, fit_ldp_slope  # noqa: E402

__all__ = [
    "SpaceDiscretization", "HypothesisProfile", "Model", "builtin_model", "builtin_models",
    "Control", "SchemeOptions", "TimeGrid", "Trajectory", "simulate_controlled_spde",
    "solve_galerkin_level", "solve_skeleton", "RateProblem", "rate_endpoint",
    "estimate_exceedance", "fit_ldp_slope",
]
