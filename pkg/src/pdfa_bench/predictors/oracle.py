"""Reference predictor: Bayes-filter to the causal state, then argmax.

Uses the true generating machine, so it realizes the optimal predictor the
trainable families are benchmarked against.  Needs no training.
"""

from __future__ import annotations

import numpy as np

from pdfa_bench.machine import Pdfa, filter_states, stationary_distribution


class OraclePredictor:
    def __init__(self, pdfa: Pdfa):
        self.pdfa = pdfa

    def fit(self, symbols: np.ndarray) -> None:
        pass  # the machine is the model

    def step_probabilities(self, symbols: np.ndarray) -> np.ndarray:
        """p(x_t = 1) from the filtered state distribution before observing x_t."""
        symbols = np.asarray(symbols, dtype=np.int64)
        em1 = self.pdfa.emission_matrix()[:, 1]
        p1 = np.empty(len(symbols))
        if len(symbols) == 0:
            return p1
        p1[0] = stationary_distribution(self.pdfa) @ em1
        if len(symbols) > 1:
            dists = filter_states(self.pdfa, symbols[:-1])
            p1[1:] = dists @ em1
        return p1
