"""Spectral simulator and verification harness for incompressible tangential
surface flow with variable viscosity on closed surfaces.

The solver runs in the divergence-free toroidal harmonic basis on the sphere,
where the degree-1 block is exactly the space of Killing fields (rigid
rotations); the torus is supported for static analysis.  The package tracks
the quantitative long-time laws of the flow: the exact Killing-component
dynamics, exponential non-Killing decay with rate set by the Korn constant,
the discrete energy ledger, continuous dependence on data, and the
backward-uniqueness quotient.
"""

__version__ = "0.1.0"

from .errors import (CheckpointError, ConfigError, ConsistencyError,
                     DivergenceError, GeometryError, GridMismatchError,
                     ParameterError)
from .geometry import (SurfaceGrid, TangentialField, TangentialTensor,
                       ViscosityField, build_sphere_grid, build_torus_grid,
                       covariant_derivative, h1_norm, l2_inner, l2_norm,
                       rate_of_strain, strain_norm, surface_divergence,
                       surface_gradient, tangential_project)
from .harmonics import (SpectralState, SphereTransform, dealias_rule,
                        get_transform, mode_index, random_band_limited)
from .killing import (KillingBasis, killing_basis, killing_coefficients,
                      korn_constant, pk_project)
from .operators import (StokesForm, assemble_stokes, convective_term,
                        forcing_apply, stokes_apply)
from .forcing import ForcingSpec, hypothesis_check, make_catalog_forcing
from .timestepper import (SimState, StepperConfig, cfl_estimate, run,
                          step_imex, step_rk4)
from .diagnostics import (DiagnosticsRecord, check_killing_identity,
                          check_monotonicity, continuous_dependence_ratio,
                          fit_decay_rate, lambda_series, record)
from .harness import (CheckpointMeta, RunReport, Scenario, execute_scenario,
                      load_checkpoint, load_config, parse_config_text,
                      run_ensemble, save_checkpoint)
from .scenarios import get_scenario, list_scenarios, run_scenario
