"""Deterministic federated-learning simulator.

Local MLP training with exact gradients, model-poisoning attacks (scaling,
min-max, min-sum, and an adaptive variant), classic robust aggregation rules
(Multi-Krum, trimmed mean, median), and a reviewer-based detect-and-discard
defense, all driven by one master seed per experiment.
"""

from .aggregation import (
    AggregatorConfig,
    apply_rule,
    fedavg,
    median_agg,
    multi_krum,
    trimmed_mean,
)
from .attacks import (
    AttackConfig,
    BinarySearchTrace,
    amp_attack,
    dynamic_lambda,
    min_max_attack,
    min_sum_attack,
    scaling_attack,
)
from .backend import active_backend
from .data import (
    DataConfig,
    LabeledDataset,
    PartitionSpec,
    balanced_subsample,
    generate_synthetic,
    load_csv,
    partition,
    train_test_split,
)
from .errors import (
    ConfigError,
    DatasetError,
    DegenerateDirectionError,
    FedsimError,
    PartitionError,
    ReviewReportError,
    RoundError,
    ShapeMismatchError,
)
from .fedreview import (
    ReviewConfig,
    ReviewReport,
    aggregate_counts,
    dominance_probability,
    estimate_n_adv,
    honest_report,
    majority_vote,
    malicious_report,
    rank_updates,
    review_losses,
)
from .model import (
    MlpModel,
    SgdConfig,
    apply_update,
    dataset_loss,
    evaluate,
    forward,
    gradient,
    init_model,
    model_for,
    param_count,
    train_local,
)
from .orchestrator import (
    ExperimentConfig,
    RoundRecord,
    adversary_assignment,
    detection_metrics,
    prepare_data,
    run_experiment,
)
from .params import ParamVector, mean_of, stack, zeros_like
from .seeding import as_rng, rng_for, seed_for

__version__ = "0.1.0"
