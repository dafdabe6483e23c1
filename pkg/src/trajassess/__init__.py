"""Complexity indicators for human-trajectory datasets."""

from .core import (
    AgentState,
    ConfigError,
    DataError,
    Dataset,
    Extent,
    Frame,
    TrajAssessError,
    Trajectory,
    Trajlet,
    bounding_area,
    build_frames,
)
from .context import (
    InteractionParams,
    compute_context,
    estimate_tau_lower_bound,
    global_density,
    local_density,
)
from .ingestion import Homography, SourceSchema, apply_homography, load_dataset
from .overall_stats import cluster_count, overall_curves, positional_entropy
from .predictability import KernelConfig, conditional_entropy, posterior_weights
from .preprocess import (
    SmootherConfig,
    TrajletConfig,
    downsample,
    filter_static,
    kalman_smooth,
    preprocess_dataset,
    split_trajlets,
)
from .regularity import RegularityRecord, compute_regularity
from .report import AssessmentReport, IndicatorRecord, export, run_pipeline, summarize

__all__ = [
    "AgentState",
    "AssessmentReport",
    "ConfigError",
    "DataError",
    "Dataset",
    "Extent",
    "Frame",
    "Homography",
    "IndicatorRecord",
    "InteractionParams",
    "KernelConfig",
    "RegularityRecord",
    "SmootherConfig",
    "SourceSchema",
    "TrajAssessError",
    "Trajectory",
    "Trajlet",
    "TrajletConfig",
    "apply_homography",
    "bounding_area",
    "build_frames",
    "cluster_count",
    "compute_context",
    "compute_regularity",
    "conditional_entropy",
    "downsample",
    "estimate_tau_lower_bound",
    "export",
    "filter_static",
    "global_density",
    "kalman_smooth",
    "load_dataset",
    "local_density",
    "overall_curves",
    "positional_entropy",
    "posterior_weights",
    "preprocess_dataset",
    "run_pipeline",
    "split_trajlets",
    "summarize",
]

__version__ = "0.1.0"
