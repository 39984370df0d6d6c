"""Kernel C-SVM trained by sequential minimal optimization.

Works entirely on precomputed kernel matrices. The working pair is the
maximal KKT violator pair (first-order selection); multiclass goes through
one-vs-one voting with ties broken by summed decision values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

_ETA_FLOOR = 1e-12


@dataclass(frozen=True)
class CsvmConfig:
    C: float = 1.0
    tolerance: float = 1e-3
    max_iterations: int = 100_000

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


def c_grid(low: float = 1e-4, high: float = 1e4, count: int = 10) -> np.ndarray:
    """Log-spaced regularization grid, endpoints included."""
    return np.logspace(np.log10(low), np.log10(high), count)


@dataclass
class BinarySvm:
    alpha: np.ndarray          # dual coefficients, one per training point
    bias: float
    y: np.ndarray              # +-1 labels the model was trained with
    support: np.ndarray        # indices with alpha > 0
    objective: float           # final dual objective value


@dataclass
class SvmModel:
    """One-vs-one multiclass container; binary problems train per class pair."""
    class_count: int
    # (class_a, class_b) -> (BinarySvm, training-subset indices)
    pair_models: dict = field(default_factory=dict)


def _dual_objective(alpha, grad):
    # f = 0.5 a'Qa - sum(a); grad = Qa - 1  =>  dual objective sum(a) - 0.5 a'Qa
    return float(0.5 * (alpha.sum() - alpha @ grad))


def smo_train(kernel: np.ndarray, y: np.ndarray, config: CsvmConfig) -> BinarySvm:
    """Solve the soft-margin dual on a precomputed kernel submatrix.

    ``y`` must contain both +1 and -1. Convergence is declared when the
    maximal KKT violation drops below the tolerance; the dual objective is
    asserted non-decreasing along the way.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if kernel.shape != (n, n):
        raise ValueError("kernel/label size mismatch")
    if not np.all(np.isfinite(kernel)):
        raise ValueError("non-finite kernel entries")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise ValueError("both classes must be present")
    if np.any(np.abs(y) != 1):
        raise ValueError("labels must be +-1")

    C = config.C
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - sum(a), with Q = yy' * K
    q_diag = kernel.diagonal() * 1.0  # y_i^2 = 1
    last_objective = 0.0

    for _ in range(config.max_iterations):
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        m_val = yg[up].max()
        m_low = yg[low].min()
        if m_val - m_low <= config.tolerance:
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(yg[low])])

        # analytic two-variable update (Platt), with eta clipped from below
        e_i, e_j = y[i] * grad[i], y[j] * grad[j]
        s = y[i] * y[j]
        if s > 0:
            lo_bound = max(0.0, alpha[i] + alpha[j] - C)
            hi_bound = min(C, alpha[i] + alpha[j])
        else:
            lo_bound = max(0.0, alpha[j] - alpha[i])
            hi_bound = min(C, C + alpha[j] - alpha[i])
        eta = q_diag[i] + q_diag[j] - 2.0 * kernel[i, j]
        eta = max(eta, _ETA_FLOOR)
        alpha_j_new = np.clip(alpha[j] + y[j] * (e_i - e_j) / eta, lo_bound, hi_bound)
        alpha_i_new = alpha[i] + s * (alpha[j] - alpha_j_new)

        delta_i, delta_j = alpha_i_new - alpha[i], alpha_j_new - alpha[j]
        if delta_i == 0.0 and delta_j == 0.0:
            break
        grad += (y * kernel[:, i]) * (y[i] * delta_i) + (y * kernel[:, j]) * (y[j] * delta_j)
        alpha[i], alpha[j] = alpha_i_new, alpha_j_new

        objective = _dual_objective(alpha, grad)
        if objective < last_objective - 1e-8 * max(1.0, abs(last_objective)):
            raise AssertionError(
                f"dual objective decreased: {last_objective} -> {objective}"
            )
        last_objective = objective

    yg = -y * grad
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    bias = 0.5 * (yg[up].max() + yg[low].min())
    return BinarySvm(alpha=alpha, bias=float(bias), y=y.copy(),
                     support=np.flatnonzero(alpha > 0), objective=last_objective)


def decision_values(model: BinarySvm, kernel_rows: np.ndarray) -> np.ndarray:
    """sum_i alpha_i y_i k(x_i, x) + b for each row of kernel values vs training points."""
    kernel_rows = np.atleast_2d(np.asarray(kernel_rows, dtype=np.float64))
    if kernel_rows.shape[1] != len(model.alpha):
        raise ValueError("kernel rows do not match training set size")
    return kernel_rows @ (model.alpha * model.y) + model.bias


def predict_binary(model: BinarySvm, kernel_rows: np.ndarray) -> np.ndarray:
    """+-1 labels; a decision value of exactly 0 maps to +1."""
    return np.where(decision_values(model, kernel_rows) >= 0, 1, -1)


def train_multiclass(kernel: np.ndarray, labels: np.ndarray, config: CsvmConfig) -> SvmModel:
    """One binary SMO problem per unordered class pair; class a maps to +1."""
    labels = np.asarray(labels, dtype=np.int64)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    model = SvmModel(class_count=len(classes))
    for a, b in itertools.combinations(classes.tolist(), 2):
        subset = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[subset] == a, 1.0, -1.0)
        binary = smo_train(kernel[np.ix_(subset, subset)], y, config)
        model.pair_models[(a, b)] = (binary, subset)
    return model


def predict(model: SvmModel, kernel_rows: np.ndarray) -> np.ndarray:
    """One-vs-one vote over pairwise decisions, ties broken by summed decisions.

    ``kernel_rows`` holds kernel values of each test item against the full
    training set the model was trained on.
    """
    kernel_rows = np.atleast_2d(np.asarray(kernel_rows, dtype=np.float64))
    n = kernel_rows.shape[0]
    all_classes = sorted({c for pair in model.pair_models for c in pair})
    votes = {c: np.zeros(n) for c in all_classes}
    scores = {c: np.zeros(n) for c in all_classes}
    for (a, b), (binary, subset) in model.pair_models.items():
        d = decision_values(binary, kernel_rows[:, subset])
        votes[a] += d >= 0
        votes[b] += d < 0
        scores[a] += d
        scores[b] -= d
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = max(all_classes, key=lambda c: (votes[c][i], scores[c][i]))
        out[i] = best
    return out
