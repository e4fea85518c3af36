"""Per-bit kernel SVM: dual solver and decision-function evaluation.

Each bit of the hash function is produced by a binary SVM over the combined
kernel.  The dual is the standard box-and-equality constrained QP

    max  1^T a - 1/2 a^T diag(y) K diag(y) a
    s.t. 0 <= a_n <= c_n,   sum_n a_n y_n = 0

with per-sample caps c_n (zero caps pin a sample out of the problem).  It is
solved by sequential two-variable (SMO-style) optimization with
max-violating-pair working-set selection.  The signed duals eta_n = a_n y_n
feed the kernel expansion of the decision function.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Model
from .errors import (
    ConfigurationError,
    DegenerateProblemError,
    DimensionMismatchError,
    NumericalError,
)
from .kernels import gram_matrix

_CURVATURE_FLOOR = 1e-12
_STALL_TOL = 1e-14


@dataclass(frozen=True)
class SvmProblem:
    """One per-bit dual problem over a combined (jittered) Gram matrix."""

    gram: np.ndarray  # (N, N) symmetric PSD
    labels: np.ndarray  # (N,) in {-1, +1}
    caps: np.ndarray  # (N,) >= 0; C for active samples, 0 for inactive
    equality_constrained: bool = True  # enforce sum_n a_n y_n = 0

    def __post_init__(self):
        k = np.ascontiguousarray(self.gram, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.float64)
        c = np.ascontiguousarray(self.caps, dtype=np.float64)
        n = y.shape[0]
        if k.shape != (n, n):
            raise DimensionMismatchError("gram must be N x N matching labels")
        if c.shape != (n,):
            raise DimensionMismatchError("caps must have length N")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ConfigurationError("labels must be exactly -1 or +1")
        if np.any(c < 0):
            raise ConfigurationError("caps must be nonnegative")
        if not np.all(np.isfinite(k)):
            raise NumericalError("gram matrix contains non-finite entries")
        if np.abs(k - k.T).max(initial=0.0) > 1e-8:
            raise NumericalError("gram matrix is not symmetric")
        object.__setattr__(self, "gram", k)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "caps", c)

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class SvmSolution:
    """Solver output.  ``eta`` is alpha * y, the expansion coefficients."""

    alpha: np.ndarray
    beta: float
    dual_objective: float
    primal_objective: float
    eta: np.ndarray
    iterations: int

    @property
    def duality_gap(self) -> float:
        return self.primal_objective - self.dual_objective


def _objectives(problem: SvmProblem, alpha: np.ndarray, beta: float):
    eta = alpha * problem.labels
    keta = problem.gram @ eta
    quad = 0.5 * float(eta @ keta)
    dual = float(alpha.sum()) - quad
    margins = 1.0 - problem.labels * (keta + beta)
    primal = quad + float(problem.caps @ np.maximum(0.0, margins))
    return dual, primal, keta


def _recover_offset(problem: SvmProblem, alpha: np.ndarray, keta: np.ndarray) -> float:
    """Average y_n - (K eta)_n over interior support vectors; fall back to
    the midpoint of the KKT-feasible offset interval."""
    y, caps = problem.labels, problem.caps
    active = caps > 0
    interior = active & (alpha > 0) & (alpha < caps)
    if interior.any():
        return float(np.mean(y[interior] - keta[interior]))
    at_zero = active & (alpha <= 0)
    at_cap = active & (alpha >= caps)
    lower = np.concatenate(
        [1.0 - keta[at_zero & (y > 0)], -1.0 - keta[at_cap & (y < 0)]]
    )
    upper = np.concatenate(
        [1.0 - keta[at_cap & (y > 0)], -1.0 - keta[at_zero & (y < 0)]]
    )
    lo = lower.max() if lower.size else -np.inf
    hi = upper.min() if upper.size else np.inf
    if np.isinf(lo) and np.isinf(hi):
        return 0.0
    if np.isinf(lo):
        return float(hi)
    if np.isinf(hi):
        return float(lo)
    return float(0.5 * (lo + hi))


def _solve_single_coordinate(
    problem: SvmProblem, alpha: np.ndarray, grad: np.ndarray, kkt_tol: float,
    max_iterations: int,
) -> tuple[np.ndarray, int]:
    """Coordinate ascent for the variant without the equality constraint."""
    k, y, caps = problem.gram, problem.labels, problem.caps
    for it in range(max_iterations):
        up_room = alpha < caps
        down_room = alpha > 0
        viol = np.where((grad < 0) & up_room, -grad, 0.0)
        viol = np.maximum(viol, np.where((grad > 0) & down_room, grad, 0.0))
        i = int(viol.argmax())
        if viol[i] < kkt_tol:
            return alpha, it
        quad = max(k[i, i], _CURVATURE_FLOOR)
        new = float(np.clip(alpha[i] - grad[i] / quad, 0.0, caps[i]))
        delta = new - alpha[i]
        alpha[i] = new
        grad += delta * y[i] * (y * k[:, i])
    raise NumericalError("single-coordinate SVM solver failed to converge")


def solve(
    problem: SvmProblem,
    kkt_tol: float = 1e-3,
    gap_tol: float | None = None,
    warm_start: np.ndarray | None = None,
    max_iterations: int | None = None,
) -> SvmSolution:
    """Solve the dual to the requested tolerance.

    ``kkt_tol`` bounds the max-violating-pair score m(a) - M(a).  When
    ``gap_tol`` is given the solver instead iterates until the duality gap
    drops below gap_tol * (1 + |dual|), which the oracle-equivalence tests
    rely on.  ``warm_start`` must be box-feasible with y^T a ~ 0.
    """
    k, y, caps = problem.gram, problem.labels, problem.caps
    n = problem.n_samples
    active = caps > 0
    if not active.any():
        raise DegenerateProblemError("no active samples (all caps are zero)")

    act_labels = y[active]
    if np.all(act_labels == act_labels[0]) and problem.equality_constrained:
        # Single-class block: zero expansion with offset at the common label
        # is exactly optimal (zero hinge, zero norm).
        s = float(act_labels[0])
        zeros = np.zeros(n)
        return SvmSolution(zeros, s, 0.0, 0.0, zeros.copy(), 0)

    if max_iterations is None:
        max_iterations = max(200_000, 500 * n)

    if warm_start is not None:
        alpha = np.clip(np.asarray(warm_start, dtype=np.float64), 0.0, caps)
        if problem.equality_constrained and abs(float(y @ alpha)) > 1e-9 * max(
            1.0, float(np.abs(alpha).sum())
        ):
            alpha = np.zeros(n)
    else:
        alpha = np.zeros(n)

    # gradient of the minimization form 1/2 a^T Q a - 1^T a, Q = diag(y) K diag(y)
    if alpha.any():
        grad = y * (k @ (alpha * y)) - 1.0
    else:
        grad = -np.ones(n)

    if not problem.equality_constrained:
        alpha, iterations = _solve_single_coordinate(
            problem, alpha, grad, kkt_tol, max_iterations
        )
        dual, primal, keta = _objectives(problem, alpha, 0.0)
        return SvmSolution(alpha, 0.0, dual, primal, alpha * y, iterations)

    stop_tol = kkt_tol if gap_tol is None else _STALL_TOL
    check_every = max(16, n)
    neg_inf = -np.inf
    pos_inf = np.inf
    iterations = 0
    while True:
        vals = -y * grad
        up = ((y > 0) & (alpha < caps)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < caps))
        up_vals = np.where(up, vals, neg_inf)
        low_vals = np.where(low, vals, pos_inf)
        i = int(up_vals.argmax())
        j = int(low_vals.argmin())
        violation = up_vals[i] - low_vals[j]
        if violation <= stop_tol:
            break
        if gap_tol is not None and iterations % check_every == 0:
            alpha_r = _repair_equality(alpha, y, caps)
            dual, primal, keta = _objectives(problem, alpha_r, 0.0)
            beta = _recover_offset(problem, alpha_r, keta)
            _, primal, _ = _objectives(problem, alpha_r, beta)
            if primal - dual <= gap_tol * (1.0 + abs(dual)):
                alpha = alpha_r
                break
        if iterations >= max_iterations:
            raise NumericalError(
                f"SVM solver exceeded {max_iterations} iterations "
                f"(violation {violation:.3e})"
            )

        quad = k[i, i] + k[j, j] - 2.0 * k[i, j]
        if quad < _CURVATURE_FLOOR:
            quad = _CURVATURE_FLOOR
        step = violation / quad
        room_i = caps[i] - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else caps[j] - alpha[j]
        step = min(step, room_i, room_j)
        if step <= 0.0:
            break  # numerically stuck at a boundary
        if step >= room_i:
            alpha[i] = caps[i] if y[i] > 0 else 0.0
        else:
            alpha[i] += y[i] * step
        if step >= room_j:
            alpha[j] = 0.0 if y[j] > 0 else caps[j]
        else:
            alpha[j] -= y[j] * step
        grad += step * (y * (k[:, i] - k[:, j]))
        iterations += 1

    alpha = _repair_equality(alpha, y, caps)
    dual, _, keta = _objectives(problem, alpha, 0.0)
    beta = _recover_offset(problem, alpha, keta)
    _, primal, _ = _objectives(problem, alpha, beta)
    return SvmSolution(alpha, beta, dual, primal, alpha * y, iterations)


def _repair_equality(alpha: np.ndarray, y: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Cancel the (rounding-level) equality residual on the freest coordinate."""
    resid = float(y @ alpha)
    if resid == 0.0:
        return alpha
    room = np.minimum(alpha, caps - alpha)
    k = int(room.argmax())
    out = alpha.copy()
    out[k] = np.clip(out[k] - y[k] * resid, 0.0, caps[k])
    return out


def regularizer_norms(
    eta: np.ndarray, theta: np.ndarray, grams: Sequence[np.ndarray]
) -> np.ndarray:
    """Squared per-kernel norms theta_m^2 * eta^T K_m eta, clamped at 0."""
    eta = np.asarray(eta, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (len(grams),):
        raise DimensionMismatchError("one weight per kernel required")
    out = np.empty(len(grams))
    for m, gram in enumerate(grams):
        out[m] = theta[m] ** 2 * float(eta @ (gram @ eta))
    return np.maximum(out, 0.0)


def decision_values(model: Model, bit: int, queries: np.ndarray) -> np.ndarray:
    """Decision values f_b for one bit (0-based) on raw queries.

    f_b(x) = sum_m theta[b, m] sum_n eta[b, n] k_m(x_n, x) + beta[b]
    """
    if not 0 <= bit < model.n_bits:
        raise ConfigurationError(f"bit index {bit} out of range")
    xq = model.standardize(queries)
    scores = np.full(xq.shape[0], model.offsets[bit])
    for m, desc in enumerate(model.kernels):
        w = model.mkl_weights[bit, m]
        if w == 0.0:
            continue
        cross = gram_matrix(desc, model.training_features, xq)
        scores += w * (model.dual_coefficients[bit] @ cross)
    return scores
