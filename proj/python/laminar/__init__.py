"""Density-aware geodesic distances from a continuous normalizing flow."""

from ._laminar import (
    ConnectivityError,
    FlowModel,
    InputError,
    IoError,
    LaminarError,
    TrainConfig,
    TrainingAborted,
    distances,
    euclidean_distances,
    generate,
    jaccard,
    k_medoids,
    log_likelihood,
    metric_tensors,
    push_forward,
    run_pipeline,
    to_ball,
    train,
    wasserstein_gaussian,
)

__version__ = "0.1.0"
