"""Randomized-smoothing certification and clean-label poisoning of certified
defenses, at desk scale (linear models and small dense nets)."""

from .analytic import (GaussToyConfig, Linear1dInstance, Linear1dPoisonProblem,
                       corollary1_threshold, eq4_upper_cost, gauss_toy_oracle,
                       gauss_toy_sample, least_squares_linear_1d,
                       theorem1_optima)
from .attack import (AttackConfig, AttackReport, ClassWide, Fraction,
                     PoisonSet, TargetPoints, pacd_attack, select_poison_pool,
                     standard_poison, watermark_baseline)
from .bilevel import (BilevelConfig, BilevelProblem, BilevelState,
                      hypergradient, lower_solve, projected_update, solve,
                      solve_linear_system)
from .diffnet import (Batch, ModelParams, NetworkSpec, forward_logits, hvp,
                      init_params, loss_grad, tempered_softmax)
from .errors import (ContractViolationError, DomainError, NumericalError,
                     ParseError, SingularityError)
from .evalharness import (DataSplits, ExperimentConfig, Report,
                          empirical_robustness, epsilon_sweep, load_csv,
                          load_experiment_config, load_poison,
                          make_blob_splits, make_gauss_toy_splits,
                          retrain_and_certify, save_csv, save_poison,
                          transfer_matrix)
from .smoothing import (ABSTAIN, CertificationResult, CertifyConfig,
                        RadiusReport, SmoothingConfig, acr_aca, certify,
                        clopper_pearson_lower, radius_from_counts,
                        soft_radius, soft_smooth_output, std_normal_quantile)
from .training import (MacerParams, SmoothAdvParams, TrainConfig,
                       gauss_aug_loss, macer_loss, pgd_smoothed,
                       smoothadv_loss, train)

__version__ = "0.1.0"
