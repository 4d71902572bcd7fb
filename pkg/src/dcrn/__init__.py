"""Deep graph clustering by dual cross-view correlation reduction.

Two distorted views of one attributed graph (edge-masked and
diffusion-smoothed) are encoded by a shared two-layer graph encoder; pushing
the cross-view sample and feature similarity matrices toward the identity,
together with propagated regularization and a self-training clustering head,
yields embeddings that K-means separates cleanly.
"""

from .estimator import DCRN
from .graph import DistortionConfig, Graph
from .losses import LossReport, LossWeights
from .metrics import (
    ClusterResult,
    MetricsReport,
    aggregate_reports,
    evaluate_clustering,
    hungarian_map,
    kmeans,
)
from .model import ModelConfig, ModelParams
from .data import DatasetManifest, SbmSpec, generate_sbm, load_graph, save_graph
from .optim import RunResult, TrainConfig, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "DCRN",
    "DistortionConfig",
    "Graph",
    "LossReport",
    "LossWeights",
    "ClusterResult",
    "MetricsReport",
    "aggregate_reports",
    "evaluate_clustering",
    "hungarian_map",
    "kmeans",
    "ModelConfig",
    "ModelParams",
    "DatasetManifest",
    "SbmSpec",
    "generate_sbm",
    "load_graph",
    "save_graph",
    "RunResult",
    "TrainConfig",
    "run_pipeline",
    "__version__",
]
