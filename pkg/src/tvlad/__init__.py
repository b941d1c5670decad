"""Local self-weighted LAD estimation and bootstrap inference for tvAR models."""
from .bootstrap import (BootstrapEnsemble, ChiSquareReport, ConfidenceRegion, MultiplierSpec,
                        bonferroni_schedule, bootstrap_covariance, bootstrap_replicates,
                        confidence_region, equivalence_test, wald_test)
from .diagnostics import HillCurve, hill_curve, hill_estimate
from .estimator import (ESTIMATOR_MENU, EstimationConfig, LocalDesign, LocalFitResult,
                        bias_corrected_estimate, bias_term_montecarlo, default_bandwidth,
                        lswlade_at, lswlade_grid)
from .experiments import (StudyConfig, StudyTable, run_coverage_study, run_mae_study,
                          run_size_power_study)
from .innovations import InnovationSpec, tail_quantile_a, truncated_mean_b
from .process import TvModel, TvSeries, ar2_model, equivalence_model, example1_model, simulate_tvar
from .solver import WladProblem, WladResult, solve_wlad
from .weights import EPANECHNIKOV, KernelSpec, WeightSpec, weight_value

__version__ = "0.1.0"
