"""Short-time tail asymptotics for state-dependent jump-diffusions.

Public surface: model specification and validation, adaptive quadrature,
the second-order tail expansion, the share-measure option expansion, the
thinned Monte Carlo engine, the reparameterization validators, and a CLI.
"""

from .errors import (CalibrationError, ConfigurationError, DivergenceError,
                     EvaluationError, JumptailError, MomentConditionError,
                     QuadratureError, RootFindError)
from .model import (JumpIntensity, JumpTransform, ModelSpec, SmoothField,
                    TruncationConfig, ValidationReport, b_eps, constant_field,
                    gamma_bar, gamma_inverse, lambda_eps, model_a, model_b,
                    model_from_description, sigma_hat_eps,
                    stable_like_intensity, thinning_indicator,
                    validate_assumptions)
from .quadrature import (QuadratureResult, integrate_double, integrate_interval,
                         integrate_punctured, integrate_semi_infinite)
from .expansion import (ExpansionResult, check_eps_compatible, d_term,
                        default_truncation, drift_sensitivity, j_term, p1,
                        tail_expansion, tail_expansion_identity_r,
                        vol_sensitivity)
from .sharemeasure import (OptionExpansion, calibrate_drift,
                           check_exponential_moment,
                           implied_intensity_from_curvature,
                           leading_term_direct, martingale_residual,
                           otm_price_expansion, share_transform,
                           vol_effect_on_price)
from .montecarlo import (OptionEstimate, SimConfig, TailEstimate,
                         estimate_option, estimate_tail, path_rng,
                         sample_jump_size, sample_jump_times, simulate_path)
from .equivalence import (DeltaBoundReport, ReparamContext, delta,
                          delta_bound_check, delta_inverse,
                          kernel_equivalence_error, psi, psi_bar,
                          psi_bar_inverse, psi_inverse)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
