import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hashlearn import (
    Codebook,
    Dataset,
    HashCode,
    Model,
    gaussian_kernel,
    linear_kernel,
)


def make_blob_dataset(
    seed,
    n_per_class=20,
    n_groups=3,
    dim=4,
    spread=6.0,
    std=1.0,
    unlabeled_fraction=0.0,
):
    """Gaussian blobs, one cluster per class; optionally hide some labels."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=spread, size=(n_groups, dim))
    features = np.vstack(
        [centers[g] + rng.normal(scale=std, size=(n_per_class, dim)) for g in range(n_groups)]
    )
    labels = np.repeat(np.arange(1, n_groups + 1), n_per_class)
    perm = rng.permutation(labels.size)
    features, labels = features[perm], labels[perm]
    if unlabeled_fraction > 0.0:
        n_hidden = int(round(unlabeled_fraction * labels.size))
        labels = labels.copy()
        labels[rng.choice(labels.size, size=n_hidden, replace=False)] = 0
    return Dataset(features=features, labels=labels, n_groups=n_groups)


def random_codebook(rng, n_groups, n_bits):
    signs = rng.integers(0, 2, size=(n_groups, n_bits)) * 2 - 1
    return Codebook.from_sign_matrix(signs)


def random_model(rng, n_bits=4, n_train=12, dim=3, n_groups=3, eta_scale=0.7):
    """A structurally valid model with random parameters (not trained)."""
    kernels = (linear_kernel(), gaussian_kernel(1.0))
    theta = rng.uniform(0.1, 1.0, size=(n_bits, len(kernels)))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    return Model(
        mkl_weights=theta,
        dual_coefficients=rng.normal(scale=eta_scale, size=(n_bits, n_train)),
        offsets=rng.normal(scale=0.5, size=n_bits),
        codebook=random_codebook(rng, n_groups, n_bits),
        kernels=kernels,
        training_features=rng.normal(size=(n_train, dim)),
        feature_mean=np.zeros(dim),
        feature_scale=np.ones(dim),
        label_names=tuple(range(1, n_groups + 1)),
        regularization=1000.0,
        norm_exponent=2.0,
        jitter=1e-8,
    )


def constant_score_model(beta, codebook, dim=2):
    """eta = 0, so f(x) = beta for every query; handy for hand instances."""
    beta = np.asarray(beta, dtype=np.float64)
    n_bits = codebook.n_bits
    assert beta.shape == (n_bits,)
    kernels = (linear_kernel(),)
    return Model(
        mkl_weights=np.ones((n_bits, 1)),
        dual_coefficients=np.zeros((n_bits, 1)),
        offsets=beta,
        codebook=codebook,
        kernels=kernels,
        training_features=np.ones((1, dim)),
        feature_mean=np.zeros(dim),
        feature_scale=np.ones(dim),
        label_names=tuple(range(1, codebook.n_groups + 1)),
        regularization=1000.0,
        norm_exponent=2.0,
        jitter=1e-8,
    )


def two_point_model(eta, beta, codebook):
    """Two far-apart training points under a tiny-bandwidth Gaussian, so the
    kernel matrix is exactly the identity and f_b(x_i) = eta[b, i] + beta[b]."""
    eta = np.asarray(eta, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    n_bits = codebook.n_bits
    assert eta.shape == (n_bits, 2)
    features = np.array([[0.0, 0.0], [100.0, 0.0]])
    return Model(
        mkl_weights=np.ones((n_bits, 1)),
        dual_coefficients=eta,
        offsets=beta,
        codebook=codebook,
        kernels=(gaussian_kernel(0.01),),
        training_features=features,
        feature_mean=np.zeros(2),
        feature_scale=np.ones(2),
        label_names=tuple(range(1, codebook.n_groups + 1)),
        regularization=1000.0,
        norm_exponent=2.0,
        jitter=1e-8,
    )


def code(*signs) -> HashCode:
    return HashCode.from_signs(np.asarray(signs))
