"""Numerical laboratory for the radial defocusing semilinear wave equation.

Solves phi_tt = laplacian(phi) - |phi|^{p-1} phi in radial symmetry for d >= 3
and measures, at desk scale, the global decay structure of its solutions:
integrated local energy decay, energy-flux decay along a hybrid null
foliation, uniform r-weighted energy bounds, critical spacetime norms, and
scattering to linear waves.
"""

from .model import Interval, ModelParams, admissible_gamma0_window, critical_exponent, scattering_threshold
from .solver import (
    BlowUpError,
    Grid,
    InitialDataSpec,
    SolverState,
    SpacetimeRecord,
    evolve,
    make_initial_data,
    rhs,
)
from .geometry import CoverageError, RegionSpec, SliceSpec, integrate_region, integrate_slice, sample_slice
from .functionals import (
    FunctionalSeries,
    energy_flux,
    exterior_flux_series,
    iled_bulk,
    iled_bulk_region,
    rweighted_bulk_and_flux,
    spacetime_norm,
    weighted_initial_energy,
)
from .multipliers import CurrentEvaluation, MultiplierSpec, audit_identity, boundary_density, bulk_density
from .scattering import dalembert_oracle_d3, linear_propagate, scatter_cauchy, sobolev_norm_radial_d3
from .analysis import convergence_order, fit_power_law, plateau_check

__version__ = "0.1.0"
