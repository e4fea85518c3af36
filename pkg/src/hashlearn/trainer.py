"""Alternating training loop: assignment, per-bit SVMs, kernel-weight and
codeword updates.

One outer iteration performs, in order:

1. refresh the one-hot sample-to-group assignment from the current decision
   values and codewords (labeled rows are forced to their class),
2. for every bit independently: alternate the per-bit SVM dual solve with
   the closed-form kernel-weight update until the weights stop moving (the
   per-bit problem is jointly convex, so this lands on its block fixed
   point; re-solves warm-start from the previous duals),
3. after all bits: flip each codeword bit to whichever sign has the smaller
   hinge sum over its group, keeping the previous sign for empty groups.

Running each bit to its inner fixed point keeps the stored weights
consistent with the duals that were solved under them *and* with the
closed-form update, so an iteration whose labels did not change is an exact
no-op.  The surrogate hinge loss, evaluated with a freshly minimized
assignment, is then non-increasing across iterations and blocks; as a
safeguard, a candidate iteration that would raise it (possible in principle
once the loss sits at the solver's numerical floor, since the SVM descends
the hinge *plus* its regularizer) is rejected and training stops at the
previous iterate.

Unlabeled samples sit out the first outer iteration (zero box caps and no
codeword weight): the freshly initialized model scores every sample 0, so
their nearest-codeword assignment is an information-free tie that would
dump them all into the first group and let the SVMs entrench that
collapse.  From the second iteration on they participate fully, assigned
by the now-informative decision values.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    Assignment,
    Codebook,
    Dataset,
    HashCode,
    Model,
    TrainConfig,
    decision_matrix,
    distortion_from_scores,
    scores_to_assignment,
    surrogate_from_scores,
)
from .errors import ConfigurationError, DimensionMismatchError
from .ingest import fit_standardization
from .kernels import KernelBank, combine
from .svm import SvmProblem, regularizer_norms, solve

#: KKT stopping tolerance for the per-bit SVM solves during training.
TRAIN_KKT_TOL = 1e-3

#: Inner SVM/weight alternation stops once the weights move less than this.
THETA_FIXED_POINT_TOL = 1e-10
MAX_INNER_ROUNDS = 100

#: A candidate iteration must not raise the surrogate beyond this slack.
ACCEPT_SLACK = 1e-9


@dataclass
class TrainState:
    """Model plus the bookkeeping accumulated over the outer iterations."""

    model: Model
    assignment: Assignment
    surrogate_history: list[float] = field(default_factory=list)
    distortion_history: list[int] = field(default_factory=list)
    block_history: list[tuple[float, float, float]] = field(default_factory=list)
    iterations: int = 0
    rng: np.random.Generator | None = None


def initialize(
    dataset: Dataset, config: TrainConfig, rng: np.random.Generator
) -> Model:
    """Fresh model: uniform kernel weights M^(-1/p), zero expansion, and
    pairwise-distinct codewords drawn uniformly from the Hamming cube."""
    n_bits, n_groups = config.bits, dataset.n_groups
    if n_bits < 64 and n_groups > 2**n_bits:
        raise ConfigurationError(
            f"{n_groups} distinct codewords do not fit in {n_bits} bits"
        )
    n_kernels = len(config.kernels)
    mean, scale = fit_standardization(dataset.features)
    feats = (dataset.features - mean) / scale

    codewords: list[HashCode] = []
    seen: set[bytes] = set()
    for _ in range(n_groups):
        while True:
            signs = (rng.integers(0, 2, size=n_bits) * 2 - 1).astype(np.int8)
            key = signs.tobytes()
            if key not in seen:
                seen.add(key)
                codewords.append(HashCode.from_signs(signs))
                break

    return Model(
        mkl_weights=np.full(
            (n_bits, n_kernels), n_kernels ** (-1.0 / config.norm_exponent)
        ),
        dual_coefficients=np.zeros((n_bits, dataset.n_samples)),
        offsets=np.zeros(n_bits),
        codebook=Codebook(tuple(codewords)),
        kernels=config.kernels,
        training_features=feats,
        feature_mean=mean,
        feature_scale=scale,
        label_names=dataset.label_names,
        regularization=config.regularization,
        norm_exponent=config.norm_exponent,
        jitter=config.jitter,
    )


def assign_groups(model: Model, dataset: Dataset) -> Assignment:
    """One-hot assignment: labeled samples to their class, unlabeled samples
    to the soft-distance-nearest codeword (ties to the lowest group)."""
    if model.n_groups != dataset.n_groups:
        raise ConfigurationError("model and dataset disagree on group count")
    scores = decision_matrix(model, dataset.features)
    return scores_to_assignment(scores, model.codebook, dataset)


def update_mkl_weights(norms: np.ndarray, p: float) -> np.ndarray:
    """Closed-form lp-ball kernel weights from squared per-kernel norms.

    theta_m = v_m^(1/(p+1)) / (sum_m' v_m'^(p/(p+1)))^(1/p) for squared
    norms v; the result is nonnegative with ||theta||_p = 1.  The all-zero
    degenerate case returns the uniform feasible point M^(-1/p).
    """
    norms = np.asarray(norms, dtype=np.float64)
    if np.any(norms < 0):
        raise ConfigurationError("squared norms must be nonnegative")
    if p <= 1:
        raise ConfigurationError("norm exponent p must be > 1")
    m = norms.shape[0]
    if not norms.any():
        return np.full(m, m ** (-1.0 / p))
    numer = norms ** (1.0 / (p + 1.0))
    denom = float(np.sum(norms ** (p / (p + 1.0)))) ** (1.0 / p)
    return numer / denom


def update_codewords(
    assignment: Assignment, f_values: np.ndarray, previous: Codebook
) -> Codebook:
    """Per-(group, bit) sign minimizing the hinge sum over the group's
    samples; ties go to +1 and empty groups keep their previous codeword."""
    f_values = np.asarray(f_values, dtype=np.float64)
    gamma = assignment.gamma.astype(np.float64)
    if f_values.shape[0] != gamma.shape[0]:
        raise DimensionMismatchError("f_values and assignment disagree on N")
    if f_values.shape[1] != previous.n_bits:
        raise DimensionMismatchError("f_values and codebook disagree on B")
    cost_plus = gamma.T @ np.maximum(0.0, 1.0 - f_values)  # (G, B)
    cost_minus = gamma.T @ np.maximum(0.0, 1.0 + f_values)
    signs = np.where(cost_plus <= cost_minus, 1, -1).astype(np.int8)
    occupied = gamma.sum(axis=0) > 0
    prev_signs = previous.sign_matrix()
    signs[~occupied] = prev_signs[~occupied]
    return Codebook.from_sign_matrix(signs)


def _bank_scores(
    theta: np.ndarray, eta: np.ndarray, beta: np.ndarray, bank: KernelBank
) -> np.ndarray:
    """Decision values on the training samples via the precomputed Grams."""
    scores = np.tile(beta[:, None], (1, bank.n_samples))
    for m, gram in enumerate(bank.grams):
        w = theta[:, m]
        if w.any():
            scores += w[:, None] * (eta @ gram)
    return scores.T  # (N, B)


def _validate(dataset: Dataset, config: TrainConfig) -> None:
    if dataset.n_samples == 0:
        raise ConfigurationError("dataset is empty")
    if dataset.n_groups < 2:
        raise ConfigurationError("training needs at least 2 groups")
    if config.mode == "supervised" and dataset.unlabeled_indices.size:
        raise ConfigurationError("supervised mode forbids unlabeled samples")


def train_full(
    dataset: Dataset,
    config: TrainConfig,
    *,
    threads: int = 1,
    log=None,
    track_blocks: bool = False,
) -> TrainState:
    """Run the full training loop and return the final state.

    ``log`` is an optional text stream receiving one tab-separated line per
    outer iteration: iteration index, surrogate loss, distortion, summed
    per-bit dual objectives, elapsed seconds.  ``track_blocks`` additionally
    records the surrogate recomputed after the SVM, kernel-weight and
    codeword blocks of every iteration.
    """
    _validate(dataset, config)
    rng = np.random.default_rng(config.seed)
    model = initialize(dataset, config, rng)
    bank = KernelBank.build(config.kernels, model.training_features, config.jitter)

    n_bits, n_samples = config.bits, dataset.n_samples
    caps = np.full(n_samples, config.regularization)
    alpha_prev = np.zeros((n_bits, n_samples))
    labels_prev = np.zeros((n_bits, n_samples))

    state = TrainState(model=model, assignment=None, rng=rng)
    started = time.perf_counter()

    scores = _bank_scores(model.mkl_weights, model.dual_coefficients, model.offsets, bank)
    if dataset.labeled_indices.size:
        assignment = scores_to_assignment(scores, model.codebook, dataset)
    else:
        # Fully unlabeled data: the zero-initialized decision values tie every
        # sample to every codeword, so seed the groups uniformly at random
        # instead of letting the tie rule collapse everything into group 1.
        assignment = Assignment.from_groups(
            rng.integers(1, dataset.n_groups + 1, size=n_samples), dataset.n_groups
        )
    state.assignment = assignment
    previous_loss = surrogate_from_scores(scores, model.codebook, assignment.groups)

    unlabeled = dataset.unlabeled_indices

    for outer in range(config.max_outer_iterations):
        groups = assignment.groups
        bit_labels = model.codebook.sign_matrix()[groups - 1].T.astype(np.float64)
        theta_start = model.mkl_weights

        active = np.ones(n_samples, dtype=bool)
        if outer == 0 and unlabeled.size and unlabeled.size < n_samples:
            # The initial decision values are identically zero, so the
            # unlabeled assignments are information-free ties; keep those
            # samples out of the first round of fits.
            active[unlabeled] = False
        iter_caps = np.where(active, caps, 0.0)

        def solve_bit(b: int):
            theta = theta_start[b]
            y = bit_labels[b]
            warm = alpha_prev[b] if np.array_equal(labels_prev[b], y) else None
            for _ in range(MAX_INNER_ROUNDS):
                sol = solve(
                    SvmProblem(combine(theta, bank), y, iter_caps),
                    kkt_tol=TRAIN_KKT_TOL,
                    warm_start=warm,
                )
                warm = sol.alpha
                norms = regularizer_norms(sol.eta, theta, bank.grams)
                refreshed = update_mkl_weights(norms, config.norm_exponent)
                if np.abs(refreshed - theta).max() <= THETA_FIXED_POINT_TOL:
                    break
                theta = refreshed
            return sol, theta

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(solve_bit, range(n_bits)))
        else:
            results = [solve_bit(b) for b in range(n_bits)]

        eta = np.empty((n_bits, n_samples))
        beta = np.empty(n_bits)
        theta = np.empty_like(theta_start)
        dual_sum = 0.0
        for b, (sol, theta_b) in enumerate(results):
            eta[b] = sol.eta
            beta[b] = sol.beta
            theta[b] = theta_b
            alpha_prev[b] = sol.alpha
            labels_prev[b] = bit_labels[b]
            dual_sum += sol.dual_objective

        new_scores = _bank_scores(theta, eta, beta, bank)
        # Surrogate after the SVM stage (the weight update leaves the
        # decision functions unchanged, so it is also the post-weight value),
        # against the not-yet-updated codebook, with the assignment freshly
        # minimized.
        mid = scores_to_assignment(new_scores, model.codebook, dataset)
        e_svm = surrogate_from_scores(new_scores, model.codebook, mid.groups)

        if active.all():
            codebook = update_codewords(assignment, new_scores, model.codebook)
        else:
            codebook = update_codewords(
                Assignment(assignment.gamma[active]),
                new_scores[active],
                model.codebook,
            )
        post = scores_to_assignment(new_scores, codebook, dataset)
        e_bar = surrogate_from_scores(new_scores, codebook, post.groups)

        if e_svm > previous_loss + ACCEPT_SLACK or e_bar > e_svm + ACCEPT_SLACK:
            # The deterministic iteration map would reproduce this non-descent
            # forever; the surrogate has reached its numerical floor.  Keep
            # the previous iterate.
            break

        model = replace(
            model,
            mkl_weights=theta,
            dual_coefficients=eta,
            offsets=beta,
            codebook=codebook,
        )
        e_dist = distortion_from_scores(new_scores, codebook, dataset)
        assignment = post

        if track_blocks:
            state.block_history.append((e_svm, e_svm, e_bar))
        state.surrogate_history.append(e_bar)
        state.distortion_history.append(e_dist)
        state.model = model
        state.assignment = assignment
        state.iterations = outer + 1
        if log is not None:
            elapsed = time.perf_counter() - started
            log.write(
                f"{outer + 1}\t{e_bar!r}\t{e_dist}\t{dual_sum!r}\t{elapsed:.6f}\n"
            )

        converged = (previous_loss - e_bar) / max(previous_loss, 1e-12) < config.tolerance
        previous_loss = e_bar
        if converged:
            break

    return state


def train(
    dataset: Dataset, config: TrainConfig, *, threads: int = 1, log=None
) -> Model:
    """Train and return just the model; see :func:`train_full`."""
    return train_full(dataset, config, threads=threads, log=log).model
