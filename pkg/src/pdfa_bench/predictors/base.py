"""Common train / predict / evaluate contract for all predictor families.

A predictor is trained on the first part of a symbol stream and then asked
for per-step next-symbol probabilities over the whole stream; recurrent
state carries over from the training half into the test half (continuous
filtering, no reset).  Hard predictions are the argmax of the per-step
probability, with ties broken to symbol 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Protocol

import numpy as np

if TYPE_CHECKING:
    from pdfa_bench.machine import Pdfa

FAMILIES = ("glm", "reservoir", "lstm")


class InsufficientDataError(Exception):
    """Too few symbols to build a single training example."""


class TrainingFailureError(Exception):
    """Optimization produced a non-finite loss and could not recover."""


@dataclass(frozen=True)
class PredictorSpec:
    """Family, size, seed, and training hyperparameters of one predictor."""

    family: str  # glm | reservoir | lstm | oracle
    size: int  # GLM order k, or node count N
    seed: int = 0
    learning_rate: float = 0.01
    epochs: int = 50
    l2_strength: float = 1.0
    truncation_window: int = 64
    spectral_radius: float = 0.95
    optimizer: str = "adam"  # adam | sgd

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"predictor size must be >= 1, got {self.size}")


class Predictor(Protocol):
    def fit(self, symbols: np.ndarray) -> None: ...

    def step_probabilities(self, symbols: np.ndarray) -> np.ndarray:
        """p(x_t = 1 | symbols before t) for every position t."""
        ...


@dataclass(frozen=True)
class EvalOutcome:
    accuracy: float
    rate_nats: float
    predictions: np.ndarray


def prediction_entropy(predictions: np.ndarray) -> float:
    """Entropy in nats of the empirical marginal over emitted predictions."""
    if len(predictions) == 0:
        return 0.0
    m = float(np.mean(predictions))
    h = 0.0
    for q in (m, 1.0 - m):
        if q > 0.0:
            h -= q * np.log(q)
    return h


def evaluate_stream(model: Predictor, symbols: np.ndarray, train_len: int) -> EvalOutcome:
    """Score a trained model on the test tail of ``symbols``.

    The model's recurrent state evolves over the full sequence; only
    positions at and after ``train_len`` count toward accuracy and rate.
    Rate is the entropy of the empirical prediction marginal.
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    p1 = model.step_probabilities(symbols)
    p1_test = p1[train_len:]
    actual = symbols[train_len:]
    predictions = (p1_test > 0.5).astype(np.int64)
    accuracy = float(np.mean(predictions == actual))
    return EvalOutcome(
        accuracy=accuracy,
        rate_nats=prediction_entropy(predictions),
        predictions=predictions,
    )


def build_predictor(spec: PredictorSpec, pdfa: "Pdfa | None" = None) -> Predictor:
    """Instantiate the predictor a spec describes; ``oracle`` needs the machine."""
    if spec.family == "glm":
        from pdfa_bench.predictors.glm import GlmPredictor

        return GlmPredictor(order=spec.size, l2_strength=spec.l2_strength)
    if spec.family == "reservoir":
        from pdfa_bench.predictors.reservoir import ReservoirPredictor

        return ReservoirPredictor(
            n_nodes=spec.size,
            seed=spec.seed,
            spectral_radius=spec.spectral_radius,
            l2_strength=spec.l2_strength,
        )
    if spec.family == "lstm":
        from pdfa_bench.predictors.lstm import LstmPredictor

        return LstmPredictor(spec)
    if spec.family == "oracle":
        from pdfa_bench.predictors.oracle import OraclePredictor

        if pdfa is None:
            raise ValueError("oracle predictor requires the generating machine")
        return OraclePredictor(pdfa)
    raise ValueError(f"unknown predictor family {spec.family!r}")
