"""Learned binary hashing with Hamming-space codewords.

Trains B-bit hash functions jointly with per-class codewords by alternating
per-bit kernel SVM solves, closed-form multiple-kernel-learning weight
updates and per-bit codeword sign flips, then hashes, classifies and
evaluates retrieval quality against a random-projection LSH baseline.
"""

from .core import (
    Assignment,
    Codebook,
    Dataset,
    HashCode,
    Model,
    TrainConfig,
    decision_matrix,
    distortion,
    hamming_distance,
    load_model,
    save_model,
    soft_distance,
    surrogate_loss,
)
from .errors import (
    ConfigurationError,
    DegenerateProblemError,
    DimensionMismatchError,
    HashLearnError,
    NumericalError,
    ParseError,
)
from .evaluation import (
    BoundReport,
    RetrievalReport,
    generalization_bound,
    margin_loss,
    pr_curve,
    precision_at_s,
)
from .hasher import classify, hash_and_classify, hash_queries
from .ingest import load, save_delimited, split, standardize
from .kernels import (
    KernelBank,
    KernelDescriptor,
    combine,
    default_kernel_bank,
    gaussian_kernel,
    gram_matrix,
    linear_kernel,
    polynomial_kernel,
)
from .lsh import LshModel, lsh_hash, lsh_train
from .svm import SvmProblem, SvmSolution, decision_values, regularizer_norms, solve
from .trainer import (
    TrainState,
    assign_groups,
    initialize,
    train,
    train_full,
    update_codewords,
    update_mkl_weights,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "BoundReport",
    "Codebook",
    "ConfigurationError",
    "Dataset",
    "DegenerateProblemError",
    "DimensionMismatchError",
    "HashCode",
    "HashLearnError",
    "KernelBank",
    "KernelDescriptor",
    "LshModel",
    "Model",
    "NumericalError",
    "ParseError",
    "RetrievalReport",
    "SvmProblem",
    "SvmSolution",
    "TrainConfig",
    "TrainState",
    "assign_groups",
    "classify",
    "combine",
    "decision_matrix",
    "decision_values",
    "default_kernel_bank",
    "distortion",
    "gaussian_kernel",
    "generalization_bound",
    "gram_matrix",
    "hamming_distance",
    "hash_and_classify",
    "hash_queries",
    "initialize",
    "linear_kernel",
    "load",
    "load_model",
    "lsh_hash",
    "lsh_train",
    "margin_loss",
    "polynomial_kernel",
    "pr_curve",
    "precision_at_s",
    "regularizer_norms",
    "save_delimited",
    "save_model",
    "soft_distance",
    "solve",
    "split",
    "standardize",
    "surrogate_loss",
    "train",
    "train_full",
    "update_codewords",
    "update_mkl_weights",
]
