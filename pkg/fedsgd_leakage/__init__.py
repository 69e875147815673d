"""
FedSGD Leakage Package

A desk-scale simulator of a malicious federated-learning server that
reconstructs a client's whole training batch from its gradient updates.

This package provides:
- A fully connected network with analytic gradients
- A simulated FedSGD client (full batch, local steps, Gaussian noise)
- The hyperplane bias-sweep attack and the trap-weights baseline
- Convex-hull vertex counting as a ceiling for single-activation attacks
- Recovery metrics and a config-driven experiment runner
"""

from .model import Batch, GradientReport, Layer, ModelParams, batch_gradient, forward
from .federation import ClientConfig, ClientResponse, FederatedClient, FullBatch, LocalSteps, client_round
from .attack import AttackConfig, HyperplaneAttack, ReconstructionResult, round_bound, run_attack
from .cah_baseline import CahConfig, CahResult, run_cah_attack
from .geometry import PointCloud, hull_vertex_count, is_separable
from .data import DatasetSpec, FeatureBounds, gen_synthetic, load_dataset
from .metrics import RecoveryStats, match_reconstructions, ssim
from .config import ExperimentConfig, get_config
from .experiment_runner import ExperimentReport, ExperimentRunner, emit_report, run_experiment
from .utils import ValidationUtils
from .exceptions import (
    FedsgdLeakageError,
    ValidationError,
    ConfigurationError,
    DataFormatError,
    ProtocolError,
    ReportIOError
)

__version__ = "1.0.0"
__author__ = "Xin Zhao"

__all__ = [
    "Batch",
    "GradientReport",
    "Layer",
    "ModelParams",
    "batch_gradient",
    "forward",
    "ClientConfig",
    "ClientResponse",
    "FederatedClient",
    "FullBatch",
    "LocalSteps",
    "client_round",
    "AttackConfig",
    "HyperplaneAttack",
    "ReconstructionResult",
    "round_bound",
    "run_attack",
    "CahConfig",
    "CahResult",
    "run_cah_attack",
    "PointCloud",
    "hull_vertex_count",
    "is_separable",
    "DatasetSpec",
    "FeatureBounds",
    "gen_synthetic",
    "load_dataset",
    "RecoveryStats",
    "match_reconstructions",
    "ssim",
    "ExperimentConfig",
    "get_config",
    "ExperimentReport",
    "ExperimentRunner",
    "emit_report",
    "run_experiment",
    "ValidationUtils",
    "FedsgdLeakageError",
    "ValidationError",
    "ConfigurationError",
    "DataFormatError",
    "ProtocolError",
    "ReportIOError"
]
