"""Predictive transfer function model for airline disruption management.

Six single-hidden-layer networks (turnaround and block time for the
non-disrupted and disrupted regimes, plus A0/A14 on-time classifiers) fused
by the A0+A14 selection rule.
"""

__version__ = "0.1.0"

from .ensemble import (
    EnsembleBundle,
    PtfmEstimate,
    classify_ontime,
    estimate,
    evaluate_bundle,
    select_rule,
    train_ensemble,
)
from .flight_data import (
    FlightRecord,
    FunctionalRole,
    SyntheticConfig,
    feature_matrix,
    generate_synthetic,
    load_csv,
    segment,
    target_vector,
)
from .metrics import auc, percent_difference, rmse, roc_curve
from .nn_core import ActivationKind, LossKind, PerceptronNet, backward, forward, hidden_size
from .training import SplitSpec, TrainConfig, TrainedModel, load_model, save_model, split_dataset, train
