"""Order-k generalized linear model: logistic regression on symbol windows."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from pdfa_bench.predictors.base import InsufficientDataError
from pdfa_bench.predictors.logistic import LogisticReadout, train_logistic


def glm_features(symbols: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Window the stream into (features, labels) pairs.

    Row t holds the k symbols preceding position t, oldest to newest; the
    label is the symbol at t.  Requires more than k symbols.
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    if len(symbols) <= k:
        raise InsufficientDataError(
            f"need more than {k} symbols for an order-{k} model, got {len(symbols)}"
        )
    windows = sliding_window_view(symbols, k)[:-1]  # window t ends at t-1
    labels = symbols[k:]
    return windows.astype(float), labels


class GlmPredictor:
    def __init__(self, order: int, l2_strength: float = 1.0):
        self.order = order
        self.l2_strength = l2_strength
        self.readout: LogisticReadout | None = None

    def fit(self, symbols: np.ndarray) -> None:
        X, y = glm_features(symbols, self.order)
        self.readout = train_logistic(X, y, l2_strength=self.l2_strength)

    def step_probabilities(self, symbols: np.ndarray) -> np.ndarray:
        """p(x_t = 1) per step; the first k positions have no window and get 0.5."""
        assert self.readout is not None, "fit before predicting"
        symbols = np.asarray(symbols, dtype=np.int64)
        p1 = np.full(len(symbols), 0.5)
        if len(symbols) > self.order:
            X, _ = glm_features(symbols, self.order)
            p1[self.order:] = self.readout.probabilities(X)
        return p1
