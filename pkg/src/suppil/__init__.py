"""Offline imitation learning with a supplementary dataset on tabular episodic MDPs."""

from .cloning import (WeightTable, bc_policy, nbcu_policy, policy_from_text, policy_to_text,
                      tabular_weights, wbcu_tabular, weighted_bc_policy)
from .data import BEHAVIOR, EXPERT, TrajectoryDataset, collect_datasets, make_stream, union_counts
from .discriminator import (FeatureMap, OptimumNotAttained, fit_discriminators, one_hot_features,
                            train_discriminator, wbcu_featured)
from .harness import GapEstimate, binomial_check, estimate_gap, rate_fit, run_suite
from .landscape import (LabeledStepData, check_d1_condition, check_recovery_condition,
                        lipschitz_coefficient, margin, max_margin_direction, quadratic_growth_tau)
from .mdp import (OccupancyMeasure, Policy, TabularMdp, mixture_policy, occupancy, policy_value,
                  validate_mdp)

__version__ = "0.1.0"
