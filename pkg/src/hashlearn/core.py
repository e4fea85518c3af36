"""Domain types and the Hamming-space loss primitives.

Hash codes live in {-1, +1}^B and are stored packed, 64 bits per machine
word: bit i of word floor(i/64) is set iff component i is +1.  Distances are
computed by XOR + popcount on the packed words.

Loss primitives:

* ``hamming_distance`` -- number of differing bit positions.
* ``soft_distance`` -- hinge relaxation sum_b max(0, 1 - mu_b * f_b), an
  upper bound on the Hamming distance between sgn(f) and mu.
* ``distortion`` -- total Hamming distance of training codes to their
  assigned (labeled) or nearest (unlabeled) codeword.
* ``surrogate_loss`` -- the hinge upper bound of the distortion under a
  one-hot sample-to-group assignment; this is the quantity training
  monotonically decreases.

The sign convention is sgn(0) = +1 throughout.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DimensionMismatchError
from .kernels import (
    GAUSSIAN,
    LINEAR,
    POLYNOMIAL,
    KernelDescriptor,
    default_kernel_bank,
    gram_matrix,
)

_WORD_BITS = 64

MODEL_MAGIC = b"SSHL"
MODEL_FORMAT_VERSION = 1

# Kernel descriptor wire tags (tag byte + float64 parameters).
_KERNEL_TAGS = {
    (LINEAR, "bandwidth"): 0,
    (POLYNOMIAL, "bandwidth"): 1,
    (GAUSSIAN, "bandwidth"): 2,
    (GAUSSIAN, "gamma"): 3,
}


def sign(values: np.ndarray) -> np.ndarray:
    """Componentwise sign with sgn(0) = +1, returned as int8 in {-1, +1}."""
    return np.where(np.asarray(values) < 0, -1, 1).astype(np.int8)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# packed sign vectors


def pack_sign_matrix(signs: np.ndarray) -> np.ndarray:
    """Pack an (n, B) matrix over {-1, +1} into (n, ceil(B/64)) uint64 words."""
    signs = np.asarray(signs)
    if signs.ndim != 2:
        raise DimensionMismatchError("expected a 2-D sign matrix")
    n, b = signs.shape
    n_words = max(1, (b + _WORD_BITS - 1) // _WORD_BITS)
    bits = np.zeros((n, n_words * _WORD_BITS), dtype=np.uint8)
    bits[:, :b] = signs > 0
    packed = np.packbits(bits.reshape(n, -1, 8), axis=-1, bitorder="little")
    return packed.reshape(n, n_words * 8).view("<u8").copy()


def unpack_sign_matrix(words: np.ndarray, n_bits: int) -> np.ndarray:
    """Inverse of :func:`pack_sign_matrix`; returns int8 signs of shape (n, n_bits)."""
    words = np.asarray(words, dtype="<u8")
    n = words.shape[0]
    as_bytes = words.reshape(n, -1).view(np.uint8)
    bits = np.unpackbits(as_bytes, axis=-1, bitorder="little")[:, :n_bits]
    return (bits.astype(np.int8) * 2 - 1).astype(np.int8)


def hamming_matrix(query_words: np.ndarray, database_words: np.ndarray) -> np.ndarray:
    """All-pairs Hamming distances between two packed code arrays."""
    q = np.asarray(query_words, dtype=np.uint64)
    d = np.asarray(database_words, dtype=np.uint64)
    if q.shape[1] != d.shape[1]:
        raise DimensionMismatchError("packed code word counts differ")
    xor = q[:, None, :] ^ d[None, :, :]
    return np.bitwise_count(xor).sum(axis=2).astype(np.int64)


@dataclass(frozen=True, eq=False)
class HashCode:
    """A B-bit code over {-1, +1}, stored packed 64 bits per word."""

    words: np.ndarray
    n_bits: int

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        expected = max(1, (self.n_bits + _WORD_BITS - 1) // _WORD_BITS)
        if words.shape != (expected,):
            raise DimensionMismatchError(
                f"need {expected} words for {self.n_bits} bits, got {words.shape}"
            )
        object.__setattr__(self, "words", _readonly(words))

    @classmethod
    def from_signs(cls, signs: Sequence[float]) -> "HashCode":
        arr = np.asarray(signs)
        if arr.ndim != 1:
            raise DimensionMismatchError("expected a 1-D sign vector")
        if not np.all(np.isin(arr, (-1, 1))):
            raise ConfigurationError("hash code components must be exactly -1 or +1")
        return cls(pack_sign_matrix(arr[None, :])[0], arr.shape[0])

    @property
    def signs(self) -> np.ndarray:
        return unpack_sign_matrix(self.words[None, :], self.n_bits)[0]

    def bit_string(self) -> str:
        """'0'/'1' rendering with 0 standing for -1, bit 1 first."""
        return "".join("1" if s > 0 else "0" for s in self.signs)

    def __eq__(self, other):
        return (
            isinstance(other, HashCode)
            and self.n_bits == other.n_bits
            and bool(np.array_equal(self.words, other.words))
        )

    def __hash__(self):
        return hash((self.n_bits, self.words.tobytes()))

    def __repr__(self):
        return f"HashCode({self.bit_string()})"


def pack_codes(codes: Sequence[HashCode]) -> tuple[np.ndarray, int]:
    """Stack a code sequence into a (n, W) packed word array; returns (words, B)."""
    if not codes:
        raise ConfigurationError("empty code sequence")
    n_bits = codes[0].n_bits
    for c in codes:
        if c.n_bits != n_bits:
            raise DimensionMismatchError("codes have mixed lengths")
    return np.stack([c.words for c in codes]), n_bits


def hamming_distance(a: HashCode, b: HashCode) -> int:
    """Number of differing bit positions; symmetric, in [0, B]."""
    if a.n_bits != b.n_bits:
        raise DimensionMismatchError(
            f"code lengths differ: {a.n_bits} vs {b.n_bits}"
        )
    return int(np.bitwise_count(a.words ^ b.words).sum())


def soft_distance(f: Sequence[float], mu: HashCode) -> float:
    """Hinge distance sum_b max(0, 1 - mu_b * f_b); upper bound on
    hamming_distance(sgn(f), mu)."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (mu.n_bits,):
        raise DimensionMismatchError(
            f"score vector has shape {f.shape}, code has {mu.n_bits} bits"
        )
    return float(np.maximum(0.0, 1.0 - mu.signs * f).sum())


# ---------------------------------------------------------------------------
# datasets and assignments


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus optional per-sample class ids.

    ``labels[n]`` is the class id in 1..G for labeled samples and 0 for
    unlabeled ones.  ``label_names`` maps group g (1-based) to the original
    label value seen in the input file; it defaults to the identity.
    """

    features: np.ndarray
    labels: np.ndarray
    n_groups: int
    label_names: tuple[int, ...] = ()

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise DimensionMismatchError("features must be an N x D matrix")
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if labels.shape != (feats.shape[0],):
            raise DimensionMismatchError("labels must be one per sample")
        if self.n_groups < 1:
            raise ConfigurationError("number of groups must be >= 1")
        if labels.size and (labels.min() < 0 or labels.max() > self.n_groups):
            raise ConfigurationError(
                "labels must be 0 (unlabeled) or class ids in 1..G"
            )
        names = self.label_names or tuple(range(1, self.n_groups + 1))
        if len(names) != self.n_groups:
            raise ConfigurationError("label_names must have one entry per group")
        object.__setattr__(self, "features", _readonly(feats))
        object.__setattr__(self, "labels", _readonly(labels))
        object.__setattr__(self, "label_names", tuple(int(v) for v in names))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def labeled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels > 0)

    @property
    def unlabeled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels == 0)


@dataclass(frozen=True)
class Assignment:
    """One-hot N x G sample-to-group weights."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.ascontiguousarray(self.gamma, dtype=np.uint8)
        if g.ndim != 2:
            raise DimensionMismatchError("gamma must be N x G")
        if not np.all(np.isin(g, (0, 1))) or not np.all(g.sum(axis=1) == 1):
            raise ConfigurationError("gamma rows must be one-hot")
        object.__setattr__(self, "gamma", _readonly(g))

    @classmethod
    def from_groups(cls, groups: np.ndarray, n_groups: int) -> "Assignment":
        groups = np.asarray(groups, dtype=np.int64)
        gamma = np.zeros((groups.shape[0], n_groups), dtype=np.uint8)
        gamma[np.arange(groups.shape[0]), groups - 1] = 1
        return cls(gamma)

    @property
    def groups(self) -> np.ndarray:
        """1-based group id per sample."""
        return self.gamma.argmax(axis=1) + 1

    @property
    def n_groups(self) -> int:
        return self.gamma.shape[1]


@dataclass(frozen=True)
class Codebook:
    """G labeled codewords in {-1, +1}^B."""

    codewords: tuple[HashCode, ...]
    group_labels: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.codewords:
            raise ConfigurationError("codebook must hold at least one codeword")
        b = self.codewords[0].n_bits
        for c in self.codewords:
            if c.n_bits != b:
                raise DimensionMismatchError("codewords have mixed lengths")
        labels = self.group_labels or tuple(range(1, len(self.codewords) + 1))
        if len(labels) != len(self.codewords):
            raise ConfigurationError("one group label per codeword required")
        object.__setattr__(self, "codewords", tuple(self.codewords))
        object.__setattr__(self, "group_labels", tuple(int(v) for v in labels))

    @property
    def n_groups(self) -> int:
        return len(self.codewords)

    @property
    def n_bits(self) -> int:
        return self.codewords[0].n_bits

    def sign_matrix(self) -> np.ndarray:
        """(G, B) int8 matrix of codeword signs."""
        return np.stack([c.signs for c in self.codewords])

    def packed(self) -> np.ndarray:
        return np.stack([c.words for c in self.codewords])

    @classmethod
    def from_sign_matrix(cls, signs: np.ndarray) -> "Codebook":
        return cls(tuple(HashCode.from_signs(row) for row in np.asarray(signs)))


# ---------------------------------------------------------------------------
# configuration and model


def _mode_ok(mode: str) -> bool:
    return mode in ("supervised", "semi-supervised", "transductive")


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters.

    ``bits`` is the code length B, ``regularization`` the SVM constant C,
    ``norm_exponent`` the MKL constraint exponent p (||theta||_p <= 1).
    """

    bits: int
    regularization: float = 1000.0
    norm_exponent: float = 2.0
    kernels: tuple[KernelDescriptor, ...] = field(default_factory=default_kernel_bank)
    max_outer_iterations: int = 50
    tolerance: float = 1e-4
    seed: int = 0
    mode: str = "supervised"
    jitter: float = 1e-8

    def __post_init__(self):
        if self.bits < 1:
            raise ConfigurationError("bits must be >= 1")
        if self.regularization <= 0:
            raise ConfigurationError("regularization C must be > 0")
        if self.norm_exponent <= 1:
            raise ConfigurationError("norm exponent p must be > 1")
        if self.jitter < 0:
            raise ConfigurationError("jitter must be >= 0")
        if self.max_outer_iterations < 1:
            raise ConfigurationError("max_outer_iterations must be >= 1")
        if not self.kernels:
            raise ConfigurationError("at least one kernel required")
        if not _mode_ok(self.mode):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "kernels", tuple(self.kernels))


@dataclass(frozen=True)
class Model:
    """A trained hash function plus its codebook.

    Per bit b the decision function is

        f_b(x) = sum_m theta[b, m] * sum_n eta[b, n] * k_m(x_n, x) + beta[b]

    over the retained (standardized) training samples x_n.  Raw queries are
    standardized with ``feature_mean`` / ``feature_scale`` before kernel
    evaluation.
    """

    mkl_weights: np.ndarray  # (B, M) theta, nonnegative, ||theta_b||_p <= 1
    dual_coefficients: np.ndarray  # (B, N) eta
    offsets: np.ndarray  # (B,) beta
    codebook: Codebook
    kernels: tuple[KernelDescriptor, ...]
    training_features: np.ndarray  # (N, D), standardized
    feature_mean: np.ndarray  # (D,)
    feature_scale: np.ndarray  # (D,)
    label_names: tuple[int, ...]  # original label per group
    regularization: float
    norm_exponent: float
    jitter: float

    def __post_init__(self):
        theta = np.ascontiguousarray(self.mkl_weights, dtype=np.float64)
        eta = np.ascontiguousarray(self.dual_coefficients, dtype=np.float64)
        beta = np.ascontiguousarray(self.offsets, dtype=np.float64)
        feats = np.ascontiguousarray(self.training_features, dtype=np.float64)
        mean = np.ascontiguousarray(self.feature_mean, dtype=np.float64)
        scale = np.ascontiguousarray(self.feature_scale, dtype=np.float64)
        b = self.codebook.n_bits
        m = len(self.kernels)
        n, d = feats.shape
        if theta.shape != (b, m):
            raise DimensionMismatchError("mkl_weights must be B x M")
        if eta.shape != (b, n):
            raise DimensionMismatchError("dual_coefficients must be B x N")
        if beta.shape != (b,):
            raise DimensionMismatchError("offsets must have length B")
        if mean.shape != (d,) or scale.shape != (d,):
            raise DimensionMismatchError("standardization stats must have length D")
        if np.any(theta < 0):
            raise ConfigurationError("mkl weights must be nonnegative")
        norms = np.sum(theta**self.norm_exponent, axis=1) ** (1.0 / self.norm_exponent)
        if np.any(norms > 1.0 + 1e-12):
            raise ConfigurationError("||theta_b||_p must not exceed 1")
        if len(self.label_names) != self.codebook.n_groups:
            raise ConfigurationError("one original label per group required")
        for name, arr in (
            ("mkl_weights", theta),
            ("dual_coefficients", eta),
            ("offsets", beta),
            ("training_features", feats),
            ("feature_mean", mean),
            ("feature_scale", scale),
        ):
            object.__setattr__(self, name, _readonly(arr))
        object.__setattr__(self, "kernels", tuple(self.kernels))
        object.__setattr__(self, "label_names", tuple(int(v) for v in self.label_names))

    @property
    def n_bits(self) -> int:
        return self.codebook.n_bits

    @property
    def n_groups(self) -> int:
        return self.codebook.n_groups

    @property
    def n_kernels(self) -> int:
        return len(self.kernels)

    @property
    def n_train(self) -> int:
        return self.training_features.shape[0]

    @property
    def n_features(self) -> int:
        return self.training_features.shape[1]

    def standardize(self, queries: np.ndarray) -> np.ndarray:
        q = np.ascontiguousarray(queries, dtype=np.float64)
        if q.ndim != 2 or q.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"queries must be N' x {self.n_features}"
            )
        return (q - self.feature_mean) / self.feature_scale


def decision_matrix(model: Model, queries: np.ndarray) -> np.ndarray:
    """All-bit decision values for raw queries; shape (N', B).

    Evaluates the M query-vs-training kernel blocks once and reuses them
    across bits.
    """
    xq = model.standardize(queries)
    scores = np.tile(model.offsets[:, None], (1, xq.shape[0]))
    for m, desc in enumerate(model.kernels):
        weights = model.mkl_weights[:, m]
        if not weights.any():
            continue
        cross = gram_matrix(desc, model.training_features, xq)  # (N, N')
        scores += weights[:, None] * (model.dual_coefficients @ cross)
    return scores.T


# ---------------------------------------------------------------------------
# losses


def _check_groups(model: Model, dataset: Dataset) -> None:
    if model.n_groups != dataset.n_groups:
        raise ConfigurationError(
            f"model has {model.n_groups} groups, dataset declares {dataset.n_groups}"
        )


def scores_to_assignment(
    scores: np.ndarray, codebook: Codebook, dataset: Dataset
) -> Assignment:
    """One-hot assignment from decision values: labeled rows are forced to
    their class; unlabeled rows pick the soft-distance-minimizing group
    (ties to the lowest group index)."""
    mu = codebook.sign_matrix().astype(np.float64)  # (G, B)
    # soft distances to every codeword: (N, G)
    hinge = np.maximum(0.0, 1.0 - scores[:, None, :] * mu[None, :, :]).sum(axis=2)
    groups = hinge.argmin(axis=1) + 1
    labeled = dataset.labels > 0
    groups[labeled] = dataset.labels[labeled]
    return Assignment.from_groups(groups, codebook.n_groups)


def surrogate_from_scores(
    scores: np.ndarray, codebook: Codebook, groups: np.ndarray
) -> float:
    """Hinge loss sum given decision values and a per-sample group vector."""
    mu = codebook.sign_matrix().astype(np.float64)[groups - 1]  # (N, B)
    return float(np.maximum(0.0, 1.0 - mu * scores).sum())


def distortion_from_scores(
    scores: np.ndarray, codebook: Codebook, dataset: Dataset
) -> int:
    """Hamming distortion given decision values."""
    codes = pack_sign_matrix(sign(scores))
    dist = hamming_matrix(codes, codebook.packed())  # (N, G)
    labeled = dataset.labels > 0
    total = int(dist[labeled, dataset.labels[labeled] - 1].sum())
    if np.any(~labeled):
        total += int(dist[~labeled].min(axis=1).sum())
    return total


def distortion(model: Model, dataset: Dataset) -> int:
    """Total Hamming distance of hash codes to assigned/nearest codewords."""
    _check_groups(model, dataset)
    return distortion_from_scores(
        decision_matrix(model, dataset.features), model.codebook, dataset
    )


def surrogate_loss(model: Model, dataset: Dataset, assignment: Assignment) -> float:
    """Hinge surrogate sum_g sum_n gamma[g, n] * soft_distance(f(x_n), mu_g)."""
    _check_groups(model, dataset)
    if assignment.gamma.shape != (dataset.n_samples, dataset.n_groups):
        raise DimensionMismatchError("assignment shape does not match dataset")
    scores = decision_matrix(model, dataset.features)
    return surrogate_from_scores(scores, model.codebook, assignment.groups)


# ---------------------------------------------------------------------------
# model serialization
#
# Versioned flat file, all integers and floats little-endian:
#   magic "SSHL", format version byte,
#   B, G, M, N, D as uint32,
#   theta (B*M float64), eta (B*N float64), beta (B float64),
#   codewords (G*B int8 in {-1, +1}),
#   kernel descriptors (tag byte + float64 parameters each),
#   training features (N*D float64),
# followed by the standardization/label/config sections:
#   feature mean (D float64), feature scale (D float64),
#   original labels (G int64), C, p, jitter (3 float64).


def _descriptor_to_wire(desc: KernelDescriptor) -> bytes:
    tag = _KERNEL_TAGS[(desc.variant, desc.convention)]
    out = struct.pack("<B", tag)
    if desc.variant == POLYNOMIAL:
        out += struct.pack("<dd", float(desc.degree), desc.bias)
    elif desc.variant == GAUSSIAN:
        out += struct.pack("<d", desc.sigma)
    return out


def _read_exact(buf: io.BytesIO, count: int) -> bytes:
    raw = buf.read(count)
    if len(raw) != count:
        raise ConfigurationError("model file truncated")
    return raw


def _descriptor_from_wire(buf: io.BytesIO) -> KernelDescriptor:
    (tag,) = struct.unpack("<B", _read_exact(buf, 1))
    if tag == 0:
        return KernelDescriptor(LINEAR)
    if tag == 1:
        degree, bias = struct.unpack("<dd", _read_exact(buf, 16))
        return KernelDescriptor(POLYNOMIAL, degree=int(degree), bias=bias)
    if tag in (2, 3):
        (sigma,) = struct.unpack("<d", _read_exact(buf, 8))
        convention = "bandwidth" if tag == 2 else "gamma"
        return KernelDescriptor(GAUSSIAN, sigma=sigma, convention=convention)
    raise ConfigurationError(f"unknown kernel tag {tag} in model file")


def _f64_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_model(model: Model, path) -> None:
    """Write the model to ``path`` in the versioned flat binary format."""
    b, g = model.n_bits, model.n_groups
    m, n, d = model.n_kernels, model.n_train, model.n_features
    out = bytearray()
    out += MODEL_MAGIC
    out += struct.pack("<B", MODEL_FORMAT_VERSION)
    out += struct.pack("<5I", b, g, m, n, d)
    out += _f64_bytes(model.mkl_weights)
    out += _f64_bytes(model.dual_coefficients)
    out += _f64_bytes(model.offsets)
    out += model.codebook.sign_matrix().astype("<i1").tobytes()
    for desc in model.kernels:
        out += _descriptor_to_wire(desc)
    out += _f64_bytes(model.training_features)
    out += _f64_bytes(model.feature_mean)
    out += _f64_bytes(model.feature_scale)
    out += np.asarray(model.label_names, dtype="<i8").tobytes()
    out += struct.pack("<3d", model.regularization, model.norm_exponent, model.jitter)
    with open(path, "wb") as fh:
        fh.write(out)


def _read_f64(buf: io.BytesIO, shape: tuple[int, ...]) -> np.ndarray:
    count = int(np.prod(shape)) if shape else 1
    return np.frombuffer(_read_exact(buf, 8 * count), dtype="<f8").reshape(shape).copy()


def load_model(path) -> Model:
    """Read a model written by :func:`save_model`."""
    with open(path, "rb") as fh:
        buf = io.BytesIO(fh.read())
    if buf.read(4) != MODEL_MAGIC:
        raise ConfigurationError(f"{path}: not a model file (bad magic)")
    (version,) = struct.unpack("<B", _read_exact(buf, 1))
    if version != MODEL_FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported model format version {version}")
    b, g, m, n, d = struct.unpack("<5I", _read_exact(buf, 20))
    theta = _read_f64(buf, (b, m))
    eta = _read_f64(buf, (b, n))
    beta = _read_f64(buf, (b,))
    signs = np.frombuffer(_read_exact(buf, g * b), dtype="<i1").reshape(g, b)
    kernels = tuple(_descriptor_from_wire(buf) for _ in range(m))
    feats = _read_f64(buf, (n, d))
    mean = _read_f64(buf, (d,))
    scale = _read_f64(buf, (d,))
    label_names = tuple(int(v) for v in np.frombuffer(_read_exact(buf, 8 * g), dtype="<i8"))
    c, p, jitter = struct.unpack("<3d", _read_exact(buf, 24))
    if buf.read(1):
        raise ConfigurationError("model file has trailing bytes")
    return Model(
        mkl_weights=theta,
        dual_coefficients=eta,
        offsets=beta,
        codebook=Codebook.from_sign_matrix(signs),
        kernels=kernels,
        training_features=feats,
        feature_mean=mean,
        feature_scale=scale,
        label_names=label_names,
        regularization=c,
        norm_exponent=p,
        jitter=jitter,
    )


def replace_model(model: Model, **changes) -> Model:
    """dataclasses.replace with array copies left to the caller."""
    return replace(model, **changes)
