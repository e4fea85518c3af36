"""Kernel bank: descriptors, Gram matrices and their weighted combination.

The decision functions are built on a bank of M base kernels.  Each bit of
the learned hash function mixes the bank with its own nonnegative weight
vector; the combined training Gram is K = sum_m theta_m K_m (+ ridge jitter
on the diagonal for conditioning).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionMismatchError, NumericalError

# Degenerate-row rule for normalized kernels: a zero-norm vector has
# k(0, x) = 0 for any x != 0 and k(0, 0) = 1, keeping |k| <= 1 and a unit
# diagonal.
_NORM_EPS = 1e-300

LINEAR = "normalized-linear"
POLYNOMIAL = "normalized-polynomial"
GAUSSIAN = "gaussian"

#: Gaussian bandwidth conventions: "bandwidth" is exp(-||x-x'||^2 / (2 sigma^2)),
#: "gamma" is exp(-sigma * ||x-x'||^2).
GAUSSIAN_CONVENTIONS = ("bandwidth", "gamma")


@dataclass(frozen=True)
class KernelDescriptor:
    """One base kernel of the bank.

    ``variant`` is one of ``normalized-linear``, ``normalized-polynomial``
    (uses ``degree`` >= 1 and ``bias``) or ``gaussian`` (uses ``sigma`` > 0
    and ``convention``).
    """

    variant: str
    degree: int = 2
    bias: float = 1.0
    sigma: float = 1.0
    convention: str = "bandwidth"

    def __post_init__(self):
        if self.variant not in (LINEAR, POLYNOMIAL, GAUSSIAN):
            raise ConfigurationError(f"unknown kernel variant {self.variant!r}")
        if self.variant == POLYNOMIAL and self.degree < 1:
            raise ConfigurationError("polynomial degree must be >= 1")
        if self.variant == GAUSSIAN:
            if self.sigma <= 0:
                raise ConfigurationError("gaussian sigma must be > 0")
            if self.convention not in GAUSSIAN_CONVENTIONS:
                raise ConfigurationError(
                    f"unknown gaussian convention {self.convention!r}"
                )

    def __str__(self):
        if self.variant == LINEAR:
            return "linear"
        if self.variant == POLYNOMIAL:
            return f"poly:{self.degree}:{self.bias:g}"
        if self.convention == "gamma":
            return f"gaussg:{self.sigma:g}"
        return f"gauss:{self.sigma:g}"


def linear_kernel() -> KernelDescriptor:
    return KernelDescriptor(LINEAR)


def polynomial_kernel(degree: int = 2, bias: float = 1.0) -> KernelDescriptor:
    return KernelDescriptor(POLYNOMIAL, degree=degree, bias=bias)


def gaussian_kernel(sigma: float, convention: str = "bandwidth") -> KernelDescriptor:
    return KernelDescriptor(GAUSSIAN, sigma=sigma, convention=convention)


def default_kernel_bank() -> tuple[KernelDescriptor, ...]:
    """The default 11-kernel bank: 1 normalized linear, 1 normalized
    polynomial (degree 2, bias 1.0) and 9 Gaussians with bandwidths
    2^-7, 2^-5, 2^-3, 2^-1, 1, 2, 2^3, 2^5, 2^7."""
    bank = [linear_kernel(), polynomial_kernel(degree=2, bias=1.0)]
    bank += [gaussian_kernel(2.0**e) for e in (-7, -5, -3, -1, 0, 1, 3, 5, 7)]
    return tuple(bank)


def parse_kernel_spec(spec: str) -> tuple[KernelDescriptor, ...]:
    """Parse a comma-separated kernel list, e.g. ``linear,poly:2:1.0,gauss:0.5``.

    Tokens: ``default`` (the 11-kernel bank), ``linear``,
    ``poly:<degree>:<bias>``, ``gauss:<sigma>`` and ``gaussg:<sigma>``
    (gamma-convention Gaussian).
    """
    out: list[KernelDescriptor] = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if token == "default":
            out.extend(default_kernel_bank())
            continue
        parts = token.split(":")
        try:
            if parts[0] == "linear" and len(parts) == 1:
                out.append(linear_kernel())
            elif parts[0] == "poly" and len(parts) == 3:
                out.append(polynomial_kernel(int(parts[1]), float(parts[2])))
            elif parts[0] == "gauss" and len(parts) == 2:
                out.append(gaussian_kernel(float(parts[1])))
            elif parts[0] == "gaussg" and len(parts) == 2:
                out.append(gaussian_kernel(float(parts[1]), convention="gamma"))
            else:
                raise ConfigurationError(f"bad kernel token {token!r}")
        except ValueError as exc:
            raise ConfigurationError(f"bad kernel token {token!r}: {exc}") from exc
    if not out:
        raise ConfigurationError("kernel spec names no kernels")
    return tuple(out)


def _normalize(raw: np.ndarray, qx: np.ndarray, qy: np.ndarray) -> np.ndarray:
    """Divide raw[i, j] by sqrt(qx[i] * qy[j]) under the degenerate-row rule."""
    ok_x = qx > _NORM_EPS
    ok_y = qy > _NORM_EPS
    denom = np.sqrt(np.outer(np.where(ok_x, qx, 1.0), np.where(ok_y, qy, 1.0)))
    out = raw / denom
    both_ok = np.outer(ok_x, ok_y)
    both_bad = np.outer(~ok_x, ~ok_y)
    return np.where(both_ok, out, np.where(both_bad, 1.0, 0.0))


def gram_matrix(
    descriptor: KernelDescriptor, x: np.ndarray, x2: np.ndarray | None = None
) -> np.ndarray:
    """Gram matrix with entry (i, j) = k(x_i, x2_j).

    With ``x2`` omitted the result is the symmetrized square Gram of ``x``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    square = x2 is None
    y = x if square else np.ascontiguousarray(x2, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2:
        raise DimensionMismatchError("feature arrays must be 2-D")
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatchError(
            f"feature dimensions differ: {x.shape[1]} vs {y.shape[1]}"
        )

    inner = x @ y.T
    if descriptor.variant == LINEAR:
        k = _normalize(inner, np.einsum("ij,ij->i", x, x), np.einsum("ij,ij->i", y, y))
    elif descriptor.variant == POLYNOMIAL:
        q = (inner + descriptor.bias) ** descriptor.degree
        qx = (np.einsum("ij,ij->i", x, x) + descriptor.bias) ** descriptor.degree
        qy = (np.einsum("ij,ij->i", y, y) + descriptor.bias) ** descriptor.degree
        k = _normalize(q, qx, qy)
    else:
        sq = np.einsum("ij,ij->i", x, x)[:, None] + np.einsum("ij,ij->i", y, y)[None, :]
        d2 = np.maximum(sq - 2.0 * inner, 0.0)
        if descriptor.convention == "gamma":
            k = np.exp(-descriptor.sigma * d2)
        else:
            k = np.exp(-d2 / (2.0 * descriptor.sigma**2))

    if square:
        k = 0.5 * (k + k.T)
    return k


@dataclass(frozen=True)
class KernelBank:
    """Bank of M kernel descriptors with their precomputed N x N Grams."""

    descriptors: tuple[KernelDescriptor, ...]
    grams: tuple[np.ndarray, ...]
    jitter: float = 1e-8

    def __post_init__(self):
        if len(self.descriptors) != len(self.grams):
            raise DimensionMismatchError("descriptor/gram count mismatch")
        if self.jitter < 0:
            raise ConfigurationError("jitter must be >= 0")
        n = self.grams[0].shape[0] if self.grams else 0
        for g in self.grams:
            if g.shape != (n, n):
                raise DimensionMismatchError("all Grams must be N x N")
            if np.abs(g - g.T).max(initial=0.0) > 1e-10:
                raise NumericalError("Gram matrix asymmetric beyond tolerance")

    @property
    def n_kernels(self) -> int:
        return len(self.descriptors)

    @property
    def n_samples(self) -> int:
        return self.grams[0].shape[0] if self.grams else 0

    @classmethod
    def build(
        cls,
        descriptors: tuple[KernelDescriptor, ...],
        features: np.ndarray,
        jitter: float = 1e-8,
    ) -> "KernelBank":
        grams = tuple(gram_matrix(d, features) for d in descriptors)
        return cls(tuple(descriptors), grams, jitter)


def combine(theta: np.ndarray, bank: KernelBank) -> np.ndarray:
    """Weighted Gram K = sum_m theta_m K_m plus ridge jitter on the diagonal."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (bank.n_kernels,):
        raise DimensionMismatchError(
            f"theta has length {theta.shape}, bank has {bank.n_kernels} kernels"
        )
    if np.any(theta < 0):
        raise ConfigurationError("kernel weights must be nonnegative")
    n = bank.n_samples
    out = np.zeros((n, n))
    for w, g in zip(theta, bank.grams):
        if w != 0.0:
            out += w * g
    if bank.jitter:
        out[np.diag_indices_from(out)] += bank.jitter
    return out
