"""Binary kernel SVM trained with an SMO-style dual solver.

The solver repeatedly picks the maximal KKT-violating pair of dual
coefficients, solves the two-variable subproblem analytically, and stops
once the violation gap falls below ``tol``. Selection is by violation
value (ties resolved by comparing the sample vectors themselves, not
their positions), so the optimization path does not depend on the order
in which training samples are supplied.

Training-side kernel matrices are computed with broadcast elementwise
expressions rather than BLAS matmul: matmul entries can differ in the
last bit depending on where a row sits in the matrix, which would leak
sample order into the solver path. Batch scoring of candidates, where
order independence is irrelevant and throughput matters, uses matmul.
"""

from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array

from .store import RankedList, TAG_SVM, ImageRecord

logger = logging.getLogger(__name__)

KERNELS = ("linear", "rbf", "poly", "sigmoid")

# Dual coefficients below this magnitude are dropped from the model.
SUPPORT_THRESHOLD = 1e-9

# Curvature floor for the two-variable subproblem; keeps the update finite
# when the kernel is not positive definite (sigmoid) or points coincide.
_TAU = 1e-12


def kernel_eval(kernel: str, gamma: float, a, b, degree: int = 3, coef0: float = 0.0) -> float:
    """Evaluate one kernel value between two equal-dimension vectors."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    if kernel == "linear":
        return float(np.dot(va, vb))
    if kernel == "rbf":
        diff = va - vb
        return float(np.exp(-gamma * np.dot(diff, diff)))
    if kernel == "poly":
        return float((gamma * np.dot(va, vb) + coef0) ** degree)
    if kernel == "sigmoid":
        return float(np.tanh(gamma * np.dot(va, vb) + coef0))
    raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")


def _cross_kernel(kernel, gamma, degree, coef0, A, B):
    """Kernel matrix K[i, j] = k(A[i], B[j]) via matmul. Fast path for scoring."""
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        sq = (
            np.sum(A * A, axis=1)[:, None]
            + np.sum(B * B, axis=1)[None, :]
            - 2.0 * (A @ B.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-gamma * sq)
    if kernel == "poly":
        return (gamma * (A @ B.T) + coef0) ** degree
    if kernel == "sigmoid":
        return np.tanh(gamma * (A @ B.T) + coef0)
    raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")


def _train_gram(kernel, gamma, degree, coef0, X):
    """Gram matrix over the training set with position-independent rounding."""
    if kernel == "rbf":
        diff = X[:, None, :] - X[None, :, :]
        base = np.sum(diff * diff, axis=-1)
        return np.exp(-gamma * base)
    dots = np.sum(X[:, None, :] * X[None, :, :], axis=-1)
    if kernel == "linear":
        return dots
    if kernel == "poly":
        return (gamma * dots + coef0) ** degree
    if kernel == "sigmoid":
        return np.tanh(gamma * dots + coef0)
    raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")


def _tie_key(X, y, index):
    return (tuple(X[index]), y[index])


def _select_extreme(values, mask, X, y, largest):
    """Index of the max (or min) of values over mask, ties broken by sample content."""
    masked = np.where(mask, values, -np.inf if largest else np.inf)
    best = masked.max() if largest else masked.min()
    tied = np.flatnonzero(masked == best)
    if len(tied) == 1:
        return int(tied[0])
    return int(min(tied, key=lambda a: _tie_key(X, y, a)))


def _escape_move(K, y, alpha, grad, C):
    """Best objective-lowering two-variable move at a KKT point, if any.

    With an indefinite kernel (sigmoid) the dual is non-convex and a
    first-order stationary point can still be improved by driving a
    coefficient pair along a negative-curvature feasible direction.
    Evaluates every pair's subproblem exactly; returns (i, j, step) for
    the steepest decrease, or None when the point is pairwise optimal.
    """
    slope = -y * grad  # move t>0 changes f by -(slope_i - slope_j)*t + 0.5*eta*t^2
    diag = np.diag(K)
    eta = diag[:, None] + diag[None, :] - 2.0 * K

    room_up = np.where(y > 0, C - alpha, alpha)  # headroom of alpha_i along +t
    room_dn = np.where(y > 0, alpha, C - alpha)  # headroom of alpha_j along +t
    t_hi = np.minimum(room_up[:, None], room_dn[None, :])
    linear = slope[:, None] - slope[None, :]

    # Candidate steps: the positive-direction endpoint and, where the
    # curvature is positive, the interior stationary point.
    decrease_end = -linear * t_hi + 0.5 * eta * t_hi * t_hi
    with np.errstate(divide="ignore", invalid="ignore"):
        t_star = np.where(eta > _TAU, linear / np.where(eta > _TAU, eta, 1.0), np.inf)
    t_star = np.clip(t_star, 0.0, t_hi)
    decrease_star = -linear * t_star + 0.5 * eta * t_star * t_star

    best_step = np.where(decrease_star < decrease_end, t_star, t_hi)
    best_decrease = np.minimum(decrease_star, decrease_end)
    np.fill_diagonal(best_decrease, 0.0)

    flat = int(np.argmin(best_decrease))
    i, j = divmod(flat, len(y))
    if best_decrease[i, j] < -1e-10 and best_step[i, j] > 0.0:
        return i, j, float(best_step[i, j])
    return None


def _smo(K, X, y, C, tol, max_iter):
    """Maximal-violating-pair SMO on the soft-margin dual.

    Minimizes 0.5 a'Qa - sum(a) with Q = yy' * K subject to 0 <= a <= C
    and y'a = 0. Returns (alpha, bias, iterations, converged).
    """
    n = len(y)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    iterations = 0
    converged = False

    while iterations < max_iter:
        values = -y * grad
        up = ((y > 0) & (alpha < C - _TAU)) | ((y < 0) & (alpha > _TAU))
        low = ((y < 0) & (alpha < C - _TAU)) | ((y > 0) & (alpha > _TAU))
        at_kkt = not up.any() or not low.any()
        if not at_kkt:
            i = _select_extreme(values, up, X, y, largest=True)
            j = _select_extreme(values, low, X, y, largest=False)
            gap = values[i] - values[j]
            at_kkt = gap <= tol
        if at_kkt:
            escape = _escape_move(K, y, alpha, grad, C)
            if escape is None:
                converged = True
                break
            i, j, step = escape
        else:
            eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
            step = gap / max(eta, _TAU)
            room_i = (C - alpha[i]) if y[i] > 0 else alpha[i]
            room_j = alpha[j] if y[j] > 0 else (C - alpha[j])
            step = min(step, room_i, room_j)
        if step <= 0.0:
            break
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        grad += (step * y) * (K[:, i] - K[:, j])
        iterations += 1

    values = -y * grad
    up = ((y > 0) & (alpha < C - _TAU)) | ((y < 0) & (alpha > _TAU))
    low = ((y < 0) & (alpha < C - _TAU)) | ((y > 0) & (alpha > _TAU))
    hi = values[up].max() if up.any() else None
    lo = values[low].min() if low.any() else None
    if hi is not None and lo is not None:
        bias = 0.5 * (hi + lo)
    else:
        bias = hi if hi is not None else (lo if lo is not None else 0.0)
    return alpha, float(bias), iterations, converged


class KernelSVC(BaseEstimator):
    """Binary kernel support vector classifier (from-scratch SMO solver).

    Follows the scikit-learn estimator conventions: construct with
    hyperparameters, ``fit(X, y)``, then ``decision_function`` /
    ``predict``. Labels may be given as {-1, +1}, {0, 1} or booleans;
    the positive class is +1 / 1 / True.

    Parameters
    ----------
    C : float, default 10.0
        Soft-margin penalty; must be positive.
    kernel : {'linear', 'rbf', 'poly', 'sigmoid'}, default 'rbf'
    gamma : 'scale' or positive float, default 'scale'
        Kernel coefficient. 'scale' resolves to 1 / (d * var) where var
        is the mean per-feature variance of the training set, falling
        back to 1 / d when the variance is zero.
    degree : int, default 3
        Polynomial degree ('poly' only).
    coef0 : float, default 0.0
        Independent term ('poly' and 'sigmoid').
    tol : float, default 1e-3
        KKT violation gap at which training stops.
    max_passes : int, default 200
        Iteration budget: the solver runs at most max_passes * n_samples
        pair updates before returning the best model found so far.

    Attributes
    ----------
    support_vectors_ : ndarray of shape (n_sv, n_features)
    dual_coef_ : ndarray of shape (n_sv,)
        alpha_i * y_i for each retained support vector.
    intercept_ : float
    gamma_ : float
        The resolved kernel coefficient.
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, C=10.0, kernel="rbf", gamma="scale", degree=3, coef0=0.0,
                 tol=1e-3, max_passes=200):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.degree = degree
        self.coef0 = coef0
        self.tol = tol
        self.max_passes = max_passes

    def _check_params(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}; expected one of {KERNELS}")
        if self.gamma != "scale" and not (np.isreal(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be 'scale' or a positive number, got {self.gamma!r}")
        if int(self.degree) < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_passes) < 1:
            raise ValueError(f"max_passes must be >= 1, got {self.max_passes}")

    def _resolve_gamma(self, X):
        if self.gamma != "scale":
            return float(self.gamma)
        var = float(X.var(axis=0).mean())
        d = X.shape[1]
        return 1.0 / (d * var) if var > 0.0 else 1.0 / d

    def fit(self, X, y):
        """Solve the soft-margin dual on (X, y). Requires both classes present."""
        self._check_params()
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise ValueError("y must be one label per row of X")
        y = self._map_labels(y)
        if not np.any(y > 0) or not np.any(y < 0):
            raise ValueError("training set must contain at least one sample of each class")

        self.gamma_ = self._resolve_gamma(X)
        K = _train_gram(self.kernel, self.gamma_, self.degree, self.coef0, X)
        max_iter = int(self.max_passes) * max(len(y), 1)
        alpha, bias, n_iter, converged = _smo(K, X, y, float(self.C), float(self.tol), max_iter)
        if not converged:
            logger.warning(
                "SMO stopped after %d iterations without reaching tol=%g; using best model found",
                n_iter, self.tol,
            )

        keep = alpha > SUPPORT_THRESHOLD
        self.support_ = np.flatnonzero(keep)
        self.support_vectors_ = X[keep]
        self.dual_coef_ = alpha[keep] * y[keep]
        self.intercept_ = bias
        self.n_iter_ = n_iter
        self.converged_ = converged
        return self

    @staticmethod
    def _map_labels(y):
        if y.dtype == bool:
            return np.where(y, 1.0, -1.0)
        values = np.unique(y)
        if not set(values.tolist()) <= {-1, 0, 1}:
            raise ValueError(f"labels must be in {{-1,+1}}, {{0,1}} or bool, got {values}")
        arr = np.asarray(y, dtype=np.float64)
        return np.where(arr > 0, 1.0, -1.0)

    def _kernel_against_support(self, X):
        return _cross_kernel(self.kernel, self.gamma_, self.degree, self.coef0,
                             self.support_vectors_, X)

    def decision_function(self, X):
        """Signed confidence for each row of X; sign is the predicted class."""
        if not hasattr(self, "support_vectors_"):
            raise ValueError("this KernelSVC instance is not fitted yet")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.support_vectors_.shape[1]:
            raise ValueError(
                f"dimension mismatch: model has {self.support_vectors_.shape[1]}, X has {X.shape[1]}"
            )
        if len(self.dual_coef_) == 0:
            return np.full(X.shape[0], self.intercept_)
        return self.dual_coef_ @ self._kernel_against_support(X) + self.intercept_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0.0, 1, -1)


def decision_score(model: KernelSVC, x) -> float:
    """Confidence of a single vector under a fitted model."""
    return float(model.decision_function(np.asarray(x, dtype=np.float64)[None, :])[0])


def rank_by_confidence(model: KernelSVC, candidates: list[ImageRecord]) -> RankedList:
    """Sort candidates by decision score, descending; ties by ascending id."""
    if not candidates:
        return RankedList([], TAG_SVM)
    X = np.stack([record.vector for record in candidates])
    scores = model.decision_function(X)
    order = sorted(
        range(len(candidates)),
        key=lambda i: (-scores[i], candidates[i].id),
    )
    entries = [(candidates[i].id, float(scores[i])) for i in order]
    return RankedList(entries, TAG_SVM)
