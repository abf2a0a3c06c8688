"""Random embedding ensembles, isometry constants, and width estimation."""

__version__ = "0.1.0"

from .ensembles import (APPROX_SPARSE, COLUMN_NORMALIZED, DENSE_GAUSSIAN,
                        DENSE_RADEMACHER, EXACT_SPARSE, ColumnMatrix,
                        EnsembleSpec, column_norms, dump_matrix, matvec,
                        normalize_columns_conditional, parse_matrix,
                        sample_matrix)
from .errors import BudgetError, ParameterError, ResampleExhaustedError
from .rng import SeedPath
from .testsets import (TestSet, build_set, distortion_sup, distortion_values,
                       embedded_norms, load_finite_csv, rad_diam,
                       save_finite_csv, sup_linear)
from .complexity import (WidthEstimate, closed_form_complexity,
                         estimate_complexity, estimate_width)
from .isometry import (DistortionReport, Psi2Fit, empirical_psi2,
                       increment_sample, isometry_trials)
from .oracles import (ExactValue, binom_central_moments, binom_sqrt_deviation,
                      chi_square, choose_n_for_lower_bound,
                      collision_probability, enumerate_exact_sparse,
                      exact_mgf_small, quadrature, scalar_psi2_closed_form)
from .experiments import (ExperimentConfig, ExperimentReport, emit_report,
                          load_report_json, parse_report_csv, report_to_csv,
                          run_experiment)
