"""Boundary-density method for the information rate of self-exciting point processes."""

__version__ = "0.1.0"

from .core import (BretpModel, OdeOptions, DEFAULT_OPTIONS, phi, solve_flow, survival,
                   conditional_intensity, find_crossings, integrate_flow)
from .errors import *  # noqa: F401,F403
from .models import (RandomTelegraphParams, DonsoffParams, HawkesParams, GammaFilterParams,
                     CtmcInput, random_telegraph_model, dark_current_model, donsoff_model,
                     hawkes_model, gamma_filter_model, snyder_model, renewal_model,
                     exponential_renewal, tabulated_renewal, build_model, load_model)
from .solver import (Partition, BoundaryMatrix, BoundaryDensity, AcidDistribution,
                     build_boundary_matrix, solve_boundary_density, boundary_density, acid_pdf,
                     acid, direct_fixed_point, wasserstein1)
from .inforate import (MiRateResult, mi_rate, rt_closed_form_rate, rt_partial_derivatives,
                       gain_derivative, gain_limit, nullcline_slope, convexity,
                       diagonal_crossing, trace_nullcline, constrained_optimum, phase_plane)
