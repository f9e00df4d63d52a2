"""Benchmarking toolkit for probabilistic deterministic finite automata.

Generates binary-alphabet PDFAs, computes their exact information-theoretic
statistics and rate-accuracy frontiers, and scores trainable time-series
predictors (GLM, reservoir, LSTM) against the optimal causal-state predictor.
"""

from pdfa_bench.machine import Pdfa, ProcessSummary, SequenceSample

__all__ = ["Pdfa", "ProcessSummary", "SequenceSample"]
