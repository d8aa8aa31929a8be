"""Radial solver and diagnostics for Delta^2 u = K(|x|) e^{4u} on R^4."""

from .radial import (OMEGA_3, DivergentTailError, InvalidGridError,
                     QuadratureRule, RadialField, RadialGrid, TailModel,
                     TailRequiredError, make_grid, radial_laplacian,
                     reconstruct_from_laplacian, scale_field)
from .kernel import (RadialKernel, assemble_operator, dump_operator,
                     kernel_closed_form, kernel_oracle, load_operator)
from .curvature import (LAMBDA_SPHERE, CurvatureProfile, K_constant,
                        K_one_minus, K_one_plus, K_regularized, Thresholds,
                        lambda_star, mass_within, split_volumes,
                        thresholds_for, total_curvature)
from .solver import (BlowUpError, SolutionRecord, SolveSpec, check_window,
                     continuation_path, epsilon_schedule,
                     gaussian_lambda_schedule, lambda_schedule,
                     laplacian_at_origin, residual,
                     rescale_to_unit_coefficient, rescaled_blowup_profile,
                     rho_schedule, solve)
from .shooting import ShootState, finite_total_curvature_probe, shoot
from .diagnostics import (DiagnosticsReport, KelvinField, asymptotic_slope,
                          blowup_rescale, diagnose, differential_residual,
                          kelvin_transform, loglog_coefficient,
                          pohozaev_check, pohozaev_consistent)
from .experiments import ExperimentConfig, ExperimentResult, run_experiment

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
