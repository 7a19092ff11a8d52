"""Quotient intensity models for phase retrieval.

Losses and their derivatives, gradient descent from random initialization,
empirical landscape certification, closed-form expectation oracles, and a
CLI harness for the experiments.
"""

from .errors import (ConfigError, DimensionMismatch, DomainError, NonFinite,
                     QimlabError, SingularDenominator, ZeroDimension, ZeroSignal)
from .losses import (LossEval, PolarDerivatives, PolarPoint, QimModel,
                     descent_direction, dir_curvature, dist_mod_phase, gradient,
                     hessian_matrix, hessian_vector_product, loss, polar_eval,
                     polar_point)
from .measurements import (IntensityData, SensingEnsemble, add_amplitude_noise,
                           adjoint_map, forward_map, gen_cdp_ensemble,
                           gen_gaussian_ensemble, intensities, load_ensemble,
                           save_ensemble)
from .optim import (GdConfig, RunResult, default_config, export_trajectory_csv,
                    gradient_descent, random_init, spectral_init,
                    wirtinger_flow_baseline)
from .landscape import (BasinCensus, LandscapeReport, basin_census,
                        convexity_near_truth, curvature_at_zero,
                        equator_curvature_check, radial_sign_scan,
                        run_landscape_suite)
from .oracles import (OracleReport, Qim2Coefficients, asymptotic_series_g,
                      erfc_bounds_check, erfcx, erfcx_quadrature,
                      mc_expectation_2d, qim2_expected_coeffs, qim2_expected_f,
                      run_oracle_suite)

__version__ = "0.1.0"
