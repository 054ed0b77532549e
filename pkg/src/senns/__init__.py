"""Sparse feature extraction networks trained with a pairwise contrastive objective."""

from .backprop import GradientBuffer, backprop_sq, grad_j1_pair
from .data import LabeledDataset, export_features, load_csv, load_idx, make_gaussians, make_two_moons, standardize
from .errors import SennsError
from .evaluation import EvalReport, evaluate, knn_accuracy, scatter_ratio, sparsity_metrics
from .grad_l1 import grad_j2_single, signed_deltas
from .network import Network, TransferKind, forward, init_random, predict
from .objective import Hyperparams, ObjectiveValue, objective_value
from .pairs import PairList, build_full, build_heuristic
from .trainer import TrainReport, finite_diff_grad, grad_total, train

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "GradientBuffer",
    "Hyperparams",
    "LabeledDataset",
    "Network",
    "ObjectiveValue",
    "PairList",
    "SennsError",
    "TrainReport",
    "TransferKind",
    "backprop_sq",
    "build_full",
    "build_heuristic",
    "evaluate",
    "export_features",
    "finite_diff_grad",
    "forward",
    "grad_j1_pair",
    "grad_j2_single",
    "grad_total",
    "init_random",
    "knn_accuracy",
    "load_csv",
    "load_idx",
    "make_gaussians",
    "make_two_moons",
    "objective_value",
    "predict",
    "scatter_ratio",
    "signed_deltas",
    "sparsity_metrics",
    "standardize",
    "train",
]
