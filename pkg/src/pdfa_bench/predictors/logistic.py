"""L2-penalized logistic regression fit by damped Newton iteration.

Shared by the GLM (raw symbol windows as features) and the reservoir
(hidden states as features).  The bias is not penalized; the penalty
strength follows the inverse-of-C convention, so 1.0 matches the common
off-the-shelf default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pdfa_bench.predictors.base import InsufficientDataError, TrainingFailureError

GRAD_TOL = 1e-8


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LogisticReadout:
    """p(label = 1 | x) = sigmoid(weights . x + bias)."""

    weights: np.ndarray
    bias: float

    def logits(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights + self.bias

    def probabilities(self, features: np.ndarray) -> np.ndarray:
        return _sigmoid(self.logits(features))


def _penalized_loglik(z: np.ndarray, y: np.ndarray, w: np.ndarray, l2: float) -> float:
    # sum_t [y z - log(1 + e^z)] - (l2/2) ||w||^2, numerically stable
    return float(np.sum(y * z - np.logaddexp(0.0, z)) - 0.5 * l2 * (w @ w))


def train_logistic(features: np.ndarray, labels: np.ndarray,
                   l2_strength: float = 1.0, max_iter: int = 100) -> LogisticReadout:
    """Maximize the penalized log-likelihood by damped Newton steps.

    Each Newton step is backtracked (step halving) until the penalized
    log-likelihood does not decrease, so the loss trace is monotone.
    Converges when the gradient infinity-norm drops below GRAD_TOL.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if X.size else X.reshape(0, 0)
    if X.shape[0] == 0:
        raise InsufficientDataError("no training rows")
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])  # bias column last
    theta = np.zeros(d + 1)
    penalty = np.concatenate([np.full(d, l2_strength), [0.0]])

    z = Xa @ theta
    ll = _penalized_loglik(z, y, theta[:d], l2_strength)
    for _ in range(max_iter):
        p = _sigmoid(z)
        grad = Xa.T @ (y - p) - penalty * theta
        if np.max(np.abs(grad)) < GRAD_TOL:
            break
        s = np.maximum(p * (1.0 - p), 1e-12)
        hessian = (Xa * s[:, None]).T @ Xa + np.diag(np.maximum(penalty, 1e-10))
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hessian, grad, rcond=None)[0]
        # backtracking keeps the penalized log-likelihood nondecreasing
        alpha = 1.0
        for _halving in range(50):
            cand = theta + alpha * step
            z_cand = Xa @ cand
            ll_cand = _penalized_loglik(z_cand, y, cand[:d], l2_strength)
            if np.isfinite(ll_cand) and ll_cand >= ll:
                break
            alpha *= 0.5
        else:
            break  # no improving step; gradient is numerically flat
        theta, z, ll = cand, z_cand, ll_cand
        if not np.isfinite(ll):
            raise TrainingFailureError("logistic fit reached a non-finite loss")
    return LogisticReadout(weights=theta[:d].copy(), bias=float(theta[d]))
