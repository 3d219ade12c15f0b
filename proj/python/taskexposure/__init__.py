"""Task-level AI exposure scoring, raking and savings."""

from taskexposure._core import (
    DataError,
    PreconditionError,
    ProviderError,
    classify_exposure,
    classify_role,
    cluster_roles,
    decay_weights,
    kmeans,
    krippendorff_alpha,
    pearson,
    role_exposure,
    role_savings,
    run_pipeline,
    spearman,
    stage_status,
    sweep,
)

__all__ = [
    "DataError",
    "PreconditionError",
    "ProviderError",
    "classify_exposure",
    "classify_role",
    "cluster_roles",
    "decay_weights",
    "kmeans",
    "krippendorff_alpha",
    "pearson",
    "role_exposure",
    "role_savings",
    "run_pipeline",
    "spearman",
    "stage_status",
    "sweep",
]
