"""Decay estimates for 2-D magnetic Schrodinger operators.

Computes the averaged-flux Agmon-type metric of a magnetic field, simulates
the magnetic heat semigroup through its Feynman-Kac-Ito representation,
solves the Dirichlet eigenproblem of the gauge-covariant discretization, and
verifies the exponential decay of eigenfunctions against the metric.
"""

__version__ = "0.1.0"

from .agmon import (AgmonParams, AgmonResult, BetaBarQuery, ConcaveBound,
                    ConfineBound, NU1_DISC, OptimizerSpec, agmon_distance,
                    agmon_weight, beta_bar, carmona_bound, classically_allowed,
                    corollary_bounds, path_length_functional, weight_profile)
from .fields import (ScalarField2D, VectorField2D, constant_field, concave_field,
                     curl_check, gaussian_bump_field, gauge_shifted, grid_field,
                     kato_lp_check, landau_gauge, radial_quadratic_field,
                     split_field, transversal_gauge)
from .geometry import (Domain, Grid2D, Polyline, boundary_distance, make_grid,
                       polyline_length, resample)
from .heatkernel import (FkiQuery, fki_apply, fki_kernel_estimate, free_kernel,
                         mehler_kernel)
from .paths import (MCEstimate, PathBundle, Sampling, bundle_from_positions,
                    dump_paths, ito_line_integral, levy_area, sample_bridge,
                    sample_brownian)
from .spectral import (PeierlsOperator, SpectralResult, build_peierls,
                       ground_state_profile, lowest_eigenpairs)
from .verify import (BoundReport, constant_field_suite, fujita_constant,
                     reparametrization_report, verify_decay)
