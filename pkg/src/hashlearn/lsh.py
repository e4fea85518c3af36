"""Random-hyperplane locality-sensitive hashing baseline.

Each bit thresholds a random Gaussian projection at zero: bit b of the code
for x is sgn(<w_b, x>) with sgn(0) = +1.  The baseline hashes the same
standardized features as the learned models, so retrieval comparisons are
apples to apples.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, replace

import numpy as np

from .core import HashCode, _readonly, pack_sign_matrix, sign
from .errors import ConfigurationError, DimensionMismatchError

LSH_MAGIC = b"SLSH"
LSH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LshModel:
    """B x D projection matrix with zero thresholds and the feature
    standardization it expects queries in."""

    projection: np.ndarray  # (B, D)
    thresholds: np.ndarray  # (B,), all zero
    feature_mean: np.ndarray  # (D,)
    feature_scale: np.ndarray  # (D,)

    def __post_init__(self):
        proj = np.ascontiguousarray(self.projection, dtype=np.float64)
        if proj.ndim != 2:
            raise DimensionMismatchError("projection must be B x D")
        b, d = proj.shape
        thr = np.ascontiguousarray(self.thresholds, dtype=np.float64)
        mean = np.ascontiguousarray(self.feature_mean, dtype=np.float64)
        scale = np.ascontiguousarray(self.feature_scale, dtype=np.float64)
        if thr.shape != (b,) or mean.shape != (d,) or scale.shape != (d,):
            raise DimensionMismatchError("threshold/standardization shapes are off")
        for name, arr in (
            ("projection", proj),
            ("thresholds", thr),
            ("feature_mean", mean),
            ("feature_scale", scale),
        ):
            object.__setattr__(self, name, _readonly(arr))

    @property
    def n_bits(self) -> int:
        return self.projection.shape[0]

    @property
    def n_features(self) -> int:
        return self.projection.shape[1]


def lsh_train(n_features: int, n_bits: int, seed: int) -> LshModel:
    """Draw the B x D projection rows i.i.d. standard normal from the seeded
    generator; thresholds are zero."""
    if n_features < 1 or n_bits < 1:
        raise ConfigurationError("need n_features >= 1 and n_bits >= 1")
    rng = np.random.default_rng(seed)
    return LshModel(
        projection=rng.standard_normal((n_bits, n_features)),
        thresholds=np.zeros(n_bits),
        feature_mean=np.zeros(n_features),
        feature_scale=np.ones(n_features),
    )


def with_standardization(
    model: LshModel, mean: np.ndarray, scale: np.ndarray
) -> LshModel:
    return replace(model, feature_mean=mean, feature_scale=scale)


def lsh_hash(model: LshModel, queries: np.ndarray) -> list[HashCode]:
    """Codes with bit b = sgn(<w_b, x>), sgn(0) = +1."""
    q = np.ascontiguousarray(queries, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != model.n_features:
        raise DimensionMismatchError(f"queries must be N' x {model.n_features}")
    q = (q - model.feature_mean) / model.feature_scale
    scores = q @ model.projection.T - model.thresholds
    words = pack_sign_matrix(sign(scores))
    return [HashCode(w, model.n_bits) for w in words]


def save_lsh_model(model: LshModel, path) -> None:
    out = bytearray()
    out += LSH_MAGIC
    out += struct.pack("<B", LSH_FORMAT_VERSION)
    out += struct.pack("<2I", model.n_bits, model.n_features)
    for arr in (model.projection, model.thresholds, model.feature_mean, model.feature_scale):
        out += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(out)


def load_lsh_model(path) -> LshModel:
    with open(path, "rb") as fh:
        buf = io.BytesIO(fh.read())
    if buf.read(4) != LSH_MAGIC:
        raise ConfigurationError(f"{path}: not an LSH model file (bad magic)")
    (version,) = struct.unpack("<B", buf.read(1))
    if version != LSH_FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported LSH format version {version}")
    b, d = struct.unpack("<2I", buf.read(8))

    def read(count):
        raw = buf.read(8 * count)
        if len(raw) != 8 * count:
            raise ConfigurationError("LSH model file truncated")
        return np.frombuffer(raw, dtype="<f8").copy()

    proj = read(b * d).reshape(b, d)
    thr = read(b)
    mean = read(d)
    scale = read(d)
    if buf.read(1):
        raise ConfigurationError("LSH model file has trailing bytes")
    return LshModel(proj, thr, mean, scale)
