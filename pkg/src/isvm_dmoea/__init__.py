"""Incremental-SVM seeding of population-based optimizers on dynamic multi-objective problems."""
from .benchmarks import BENCHMARKS, ENVIRONMENTS, ReferenceFront, environment_config, make_problem, sample_reference_pof
from .core import (ConfigurationError, DimensionError, DynamicProblem, EnvironmentConfig, Individual,
                   TimeContext, dominates, nondominated_subset, time_index)
from .metrics import MetricRecord, dmigd, igd, migd
from .optimizers import MOPSO, NSGA2, OptimizerConfig, Population, crowding_distance, nondominated_sort, run_optimizer
from .seeding import SeedingConfig, build_training_batch, filter_candidates, generate_candidates, isvm_dmoea_run
from .svm import IncrementalSVC, KernelConfig, TrainingError, decision_value, grid_search_scale, increment, kkt_partition, train_batch

__version__ = "0.1.0"
