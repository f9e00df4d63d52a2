"""Fixed random tanh reservoir with a trained logistic readout.

Recurrent weights are drawn i.i.d. standard normal and rescaled so the
spectral radius sits just below 1 (default 0.95): large enough memory to be
useful, small enough that the echo-state contraction property holds.  Only
the readout is trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pdfa_bench.predictors.logistic import LogisticReadout, train_logistic

SPECTRAL_RADIUS_TOL = 1e-6


@dataclass(frozen=True)
class ReservoirParams:
    W: np.ndarray  # (N, N) recurrence
    v: np.ndarray  # (N,) input weights
    b: np.ndarray  # (N,) bias
    spectral_radius_target: float


def reservoir_init(n_nodes: int, seed: int,
                   spectral_radius_target: float = 0.95) -> ReservoirParams:
    """Draw reservoir weights and rescale W to the target spectral radius."""
    rng = np.random.default_rng(seed)
    while True:
        W = rng.normal(size=(n_nodes, n_nodes))
        radius = float(np.max(np.abs(np.linalg.eigvals(W))))
        if radius > 0.0:
            break
        # a numerically nilpotent draw; essentially impossible beyond N=1
    W = W * (spectral_radius_target / radius)
    v = rng.normal(size=n_nodes)
    b = rng.normal(size=n_nodes)
    return ReservoirParams(W=W, v=v, b=b,
                           spectral_radius_target=spectral_radius_target)


def reservoir_states(params: ReservoirParams, symbols: np.ndarray,
                     h0: np.ndarray | None = None) -> np.ndarray:
    """Hidden-state rows aligned so row t is the feature vector predicting x_t.

    Row 0 is the initial state (zeros by default); row t+1 is
    tanh(W h_t + v x_t + b).
    """
    symbols = np.asarray(symbols, dtype=float)
    n = params.v.shape[0]
    out = np.empty((len(symbols), n))
    h = np.zeros(n) if h0 is None else np.asarray(h0, dtype=float)
    W, v, b = params.W, params.v, params.b
    for t, x in enumerate(symbols):
        out[t] = h
        h = np.tanh(W @ h + v * x + b)
    return out


class ReservoirPredictor:
    def __init__(self, n_nodes: int, seed: int, spectral_radius: float = 0.95,
                 l2_strength: float = 1.0):
        self.params = reservoir_init(n_nodes, seed, spectral_radius)
        self.l2_strength = l2_strength
        self.readout: LogisticReadout | None = None

    def fit(self, symbols: np.ndarray) -> None:
        H = reservoir_states(self.params, symbols)
        self.readout = train_logistic(H, np.asarray(symbols, dtype=np.int64),
                                      l2_strength=self.l2_strength)

    def step_probabilities(self, symbols: np.ndarray) -> np.ndarray:
        assert self.readout is not None, "fit before predicting"
        H = reservoir_states(self.params, symbols)
        return self.readout.probabilities(H)
