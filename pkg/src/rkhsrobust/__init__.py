"""Regularised kernel ERM, probability metrics and robustness experiments."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .config import ConfigError, ExperimentConfig, LambdaSchedule, load_config, parse_config, reference_path
from .distributions import (DiscreteDistribution, empirical, empirical_from_indices, load_csv, make_rng,
                            membership, mix, moment, perturb, sample, sample_indices, save_csv)
from .erm import (ErmConfig, ErmSolution, IllConditioned, optimal_value, risk_true, solution_distance,
                  solve, solve_convex, solve_ridge, stationarity_residual)
from .kernels import (GrowthProfile, InternalConsistencyError, KernelSpec, RejectedInput, gram_matrix,
                      growth_function, growth_profile, kernel_eval, rkhs_norm)
from .losses import (GaugeSpec, LipschitzProfile, LossSpec, UnsupportedCombination, UnsupportedLoss,
                     gauge_phi, lipschitz_profile, loss_eval, loss_subgradient)
from .metrics import (MarginalMismatch, TransportPlan, ZetaEstimate, d_phi, discrete_ot, kantorovich,
                      prokhorov, wasserstein1_1d, zeta_p)
from .robustness import (ConsistencyReport, LawEstimate, Report, RobustnessReport, check_qualitative,
                         check_quantitative, consistency_curve, law_of_estimator, run_experiment,
                         solution_stability, stability_curve, write_report)
