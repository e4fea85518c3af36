"""Retrieval metrics (precision@s, PR by Hamming radius) and the
margin-based generalization bound diagnostic.

The bound diagnostic assembles, for a trained model on labeled data,

    total = margin_error + 2 r sum_b R_b / (rho B sqrt(N))
                         + sqrt(log(1/delta) / (2 N))

where margin_error is the averaged ramp loss Q_rho(f_b(x_n) mu_b) with
Q_rho(u) = min{1, max{0, 1 - u/rho}}, R_b the achieved RKHS norm of bit b's
decision function and r the largest combined-kernel self-similarity over
the training samples.  It is reporting-only; training never consults it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Codebook,
    Dataset,
    HashCode,
    Model,
    decision_matrix,
    hamming_matrix,
    pack_codes,
)
from .errors import ConfigurationError, DimensionMismatchError
from .kernels import gram_matrix


@dataclass(frozen=True)
class RetrievalReport:
    """Precision@s table plus PR points (radius, precision, recall)."""

    s_values: tuple[int, ...]
    precisions: np.ndarray  # mean precision per s
    pr_points: np.ndarray  # (B+1, 3) rows (r, precision, recall)


@dataclass(frozen=True)
class BoundReport:
    """All quantities entering the generalization bound."""

    rho: float
    delta: float
    kernel_bound: float  # r: max sqrt(combined self-similarity)
    bit_norms: np.ndarray  # R_b per bit
    margin_error: float  # averaged ramp loss
    complexity_term: float
    confidence_term: float
    total: float


def _prepare(query_codes, query_labels, database_codes, database_labels):
    qw, qb = pack_codes(query_codes)
    dw, db = pack_codes(database_codes)
    if qb != db:
        raise DimensionMismatchError(f"code lengths differ: {qb} vs {db}")
    qy = np.asarray(query_labels)
    dy = np.asarray(database_labels)
    if qy.shape != (qw.shape[0],) or dy.shape != (dw.shape[0],):
        raise DimensionMismatchError("one label per code required")
    return hamming_matrix(qw, dw), qy, dy, qb


def precision_at_s(
    query_codes: Sequence[HashCode],
    query_labels,
    database_codes: Sequence[HashCode],
    database_labels,
    s_values: Sequence[int],
) -> np.ndarray:
    """Mean fraction of same-class items among the s Hamming-nearest
    database codes, for each s.  Distance ties rank by database index."""
    dist, qy, dy, _ = _prepare(
        query_codes, query_labels, database_codes, database_labels
    )
    n_db = dist.shape[1]
    for s in s_values:
        if not 1 <= s <= n_db:
            raise ConfigurationError(
                f"s = {s} outside the database size ({n_db} items)"
            )
    order = np.argsort(dist, axis=1, kind="stable")
    matches = dy[order] == qy[:, None]
    cumulative = np.cumsum(matches, axis=1)
    return np.array([float((cumulative[:, s - 1] / s).mean()) for s in s_values])


def pr_curve(
    query_codes: Sequence[HashCode],
    query_labels,
    database_codes: Sequence[HashCode],
    database_labels,
) -> np.ndarray:
    """PR points for Hamming radii r = 0..B.

    At radius r everything within distance <= r is retrieved.  Queries that
    retrieve nothing are skipped for precision at that radius (0.0 if every
    query is skipped); they still count 0 toward recall.  Queries whose
    class is absent from the database are skipped for recall.
    """
    dist, qy, dy, n_bits = _prepare(
        query_codes, query_labels, database_codes, database_labels
    )
    same = dy[None, :] == qy[:, None]
    class_support = same.sum(axis=1)
    has_support = class_support > 0
    points = np.zeros((n_bits + 1, 3))
    for r in range(n_bits + 1):
        within = dist <= r
        retrieved = within.sum(axis=1)
        relevant = (within & same).sum(axis=1)
        hit = retrieved > 0
        precision = float((relevant[hit] / retrieved[hit]).mean()) if hit.any() else 0.0
        if has_support.any():
            recall = float(
                (relevant[has_support] / class_support[has_support]).mean()
            )
        else:
            recall = 0.0
        points[r] = (r, precision, recall)
    return points


def retrieval_report(
    query_codes, query_labels, database_codes, database_labels, s_values
) -> RetrievalReport:
    return RetrievalReport(
        s_values=tuple(int(s) for s in s_values),
        precisions=precision_at_s(
            query_codes, query_labels, database_codes, database_labels, s_values
        ),
        pr_points=pr_curve(
            query_codes, query_labels, database_codes, database_labels
        ),
    )


def ramp_loss(margins: np.ndarray, rho: float) -> np.ndarray:
    """Q_rho(u) = min{1, max{0, 1 - u/rho}} applied elementwise."""
    if rho <= 0:
        raise ConfigurationError("rho must be > 0")
    return np.clip(1.0 - np.asarray(margins, dtype=np.float64) / rho, 0.0, 1.0)


def margin_loss(
    f_values: np.ndarray, codebook: Codebook, labels, rho: float
) -> float:
    """Averaged ramp loss (1/NB) sum_{n,b} Q_rho(f_b(x_n) mu_{l_n, b})."""
    f_values = np.asarray(f_values, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if f_values.ndim != 2 or f_values.shape[1] != codebook.n_bits:
        raise DimensionMismatchError("f_values must be N x B")
    if labels.shape != (f_values.shape[0],):
        raise DimensionMismatchError("one label per row of f_values required")
    if np.any(labels < 1) or np.any(labels > codebook.n_groups):
        raise ConfigurationError("margin loss needs labeled samples (ids in 1..G)")
    mu = codebook.sign_matrix()[labels - 1]
    return float(ramp_loss(f_values * mu, rho).mean())


def _check_delta(delta: float) -> None:
    if not 0.0 < delta <= 1.0:
        raise ConfigurationError("delta must lie in (0, 1]")


def bound_report(
    margin_error: float,
    kernel_bound: float,
    bit_norms: np.ndarray,
    n_samples: int,
    rho: float,
    delta: float,
) -> BoundReport:
    """Assemble the bound from already-measured quantities."""
    if rho <= 0:
        raise ConfigurationError("rho must be > 0")
    _check_delta(delta)
    bit_norms = np.asarray(bit_norms, dtype=np.float64)
    n_bits = bit_norms.shape[0]
    complexity = (
        2.0 * kernel_bound * float(bit_norms.sum()) / (rho * n_bits * math.sqrt(n_samples))
    )
    confidence = math.sqrt(math.log(1.0 / delta) / (2.0 * n_samples))
    return BoundReport(
        rho=rho,
        delta=delta,
        kernel_bound=kernel_bound,
        bit_norms=bit_norms,
        margin_error=margin_error,
        complexity_term=complexity,
        confidence_term=confidence,
        total=margin_error + complexity + confidence,
    )


def generalization_bound(
    model: Model, dataset: Dataset, rho: float, delta: float
) -> BoundReport:
    """Measure every bound quantity for a trained model on labeled data.

    R_b is the achieved norm sqrt(sum_m theta[b, m] eta_b^T K_m eta_b) and
    the kernel bound r the largest sqrt(sum_m theta[b, m] k_m(x, x)) over
    training samples and bits.
    """
    if rho <= 0:
        raise ConfigurationError("rho must be > 0")
    _check_delta(delta)
    if model.n_groups != dataset.n_groups:
        raise ConfigurationError("model and dataset disagree on group count")
    if dataset.unlabeled_indices.size:
        raise ConfigurationError("the bound diagnostic needs fully labeled data")

    scores = decision_matrix(model, dataset.features)
    err = margin_loss(scores, model.codebook, dataset.labels, rho)

    grams = [gram_matrix(d, model.training_features) for d in model.kernels]
    quad = np.empty((model.n_bits, model.n_kernels))
    for m, gram in enumerate(grams):
        quad[:, m] = np.einsum("bn,nj,bj->b", model.dual_coefficients, gram,
                               model.dual_coefficients)
    quad = np.maximum(quad, 0.0)
    bit_norms = np.sqrt(np.sum(model.mkl_weights * quad, axis=1))

    diags = np.stack([np.diag(g) for g in grams])  # (M, N)
    self_sim = model.mkl_weights @ diags  # (B, N)
    kernel_bound = float(np.sqrt(max(self_sim.max(), 0.0)))

    report = bound_report(
        err, kernel_bound, bit_norms, dataset.n_samples, rho, delta
    )
    return report
