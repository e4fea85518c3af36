"""Hashing and nearest-codeword classification."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import (
    HashCode,
    Model,
    decision_matrix,
    hamming_matrix,
    pack_sign_matrix,
    sign,
)


def hash_queries(model: Model, queries: np.ndarray) -> list[HashCode]:
    """Hash codes sgn(f(x)) for raw queries, with sgn(0) = +1."""
    scores = decision_matrix(model, queries)
    signs = sign(scores)
    words = pack_sign_matrix(signs)
    n_bits = model.n_bits
    return [HashCode(w, n_bits) for w in words]


def classify(model: Model, queries: np.ndarray) -> np.ndarray:
    """1-based group ids of the Hamming-nearest codeword per query (ties to
    the lowest group index)."""
    return hash_and_classify(model, queries)[1]


def hash_and_classify(model: Model, queries: np.ndarray) -> tuple[list[HashCode], np.ndarray]:
    """Hash codes plus nearest-codeword group ids, sharing one kernel pass."""
    scores = decision_matrix(model, queries)
    words = pack_sign_matrix(sign(scores))
    dist = hamming_matrix(words, model.codebook.packed())
    groups = dist.argmin(axis=1) + 1
    codes = [HashCode(w, model.n_bits) for w in words]
    return codes, groups


def write_hash_file(path, codes: Sequence[HashCode], labels: Sequence[int]) -> None:
    """Hash output file: one tab-separated line per query with the 0-based
    query id, the B-character 0/1 code string (0 for -1, bit 1 first) and
    the predicted label."""
    if len(codes) != len(labels):
        raise ValueError("one label per code required")
    with open(path, "w", encoding="utf-8") as fh:
        for i, (code, label) in enumerate(zip(codes, labels)):
            fh.write(f"{i}\t{code.bit_string()}\t{label}\n")
