"""Predictive rate-accuracy frontiers and the metrics scored against them.

The frontier R(A) is the minimal mutual information between the causal state
and a binary prediction, subject to expected prediction accuracy at least A.
It is computed by alternating (Blahut-Arimoto) iteration over the channel
p(r | state) at a grid of Lagrange multipliers beta, and always augmented
with the exact (rate, accuracy) point of the argmax causal-state predictor.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pdfa_bench.machine import Pdfa, optimal_predictor_point

BA_CHANNEL_TOL = 1e-10
BA_MAX_ITER = 10_000

DEFAULT_BETA_GRID = np.concatenate([[0.0], np.geomspace(1e-2, 1e3, 100)])


class ExcludedMachineError(Exception):
    """Machine has a zero-rate optimal predictor; normalized metrics undefined."""


@dataclass(frozen=True)
class BaPoint:
    beta: float
    rate_nats: float
    accuracy: float
    channel: np.ndarray  # (n_states, 2), rows p(r | state)
    converged: bool


@dataclass(frozen=True)
class RateAccuracyCurve:
    """Frontier points sorted by accuracy, plus the optimal predictor's point."""

    points: tuple[BaPoint, ...]
    augmented_point: tuple[float, float]  # (rate_nats, accuracy)

    def polyline(self) -> np.ndarray:
        """(k, 2) array of (accuracy, rate) vertices including the augmented point."""
        verts = [(p.accuracy, p.rate_nats) for p in self.points]
        verts.append((self.augmented_point[1], self.augmented_point[0]))
        verts.sort()
        return np.array(verts)


def accuracy_matrix(pdfa: Pdfa) -> np.ndarray:
    """a(state, r) = p(next symbol = r | state); rows sum to 1."""
    return pdfa.emission_matrix()


def ba_solve(pi: np.ndarray, acc_matrix: np.ndarray, beta: float) -> BaPoint:
    """Alternating minimization for one Lagrange multiplier.

    Iterates p(r|s) proportional to q(r) exp(beta a(s, r)) with q the
    pi-average of the channel, from the symmetric start q = (1/2, 1/2),
    until the largest channel change drops below BA_CHANNEL_TOL.
    """
    pi = np.asarray(pi, dtype=float)
    a = np.asarray(acc_matrix, dtype=float)
    # per-row max subtracted so exp never overflows at large beta
    tilt = np.exp(beta * (a - a.max(axis=1, keepdims=True)))
    q = np.array([0.5, 0.5])
    channel = np.tile(q, (a.shape[0], 1))
    converged = False
    for _ in range(BA_MAX_ITER):
        new_channel = q * tilt
        new_channel /= new_channel.sum(axis=1, keepdims=True)
        delta = np.max(np.abs(new_channel - channel))
        channel = new_channel
        q = pi @ channel
        if delta < BA_CHANNEL_TOL:
            converged = True
            break
    accuracy = float(pi @ np.sum(channel * a, axis=1))
    # a positive channel entry forces its q column positive, so clamping the
    # zero columns only touches terms that are masked out anyway
    q_safe = np.where(q > 0, q, 1.0)
    log_ratio = np.where(channel > 0,
                         np.log(np.where(channel > 0, channel, 1.0)) - np.log(q_safe),
                         0.0)
    rate = float(pi @ np.sum(channel * log_ratio, axis=1))
    rate = max(rate, 0.0)  # clip tiny negative round-off
    return BaPoint(beta=float(beta), rate_nats=rate, accuracy=accuracy,
                   channel=channel, converged=converged)


def _drop_dominated(points: list[BaPoint]) -> list[BaPoint]:
    """Keep the upper-left frontier: no other point with accuracy >= and rate <=."""
    kept: list[BaPoint] = []
    # sorted by accuracy desc, rate asc: running-min rate marks the frontier
    best_rate = np.inf
    for p in sorted(points, key=lambda p: (-p.accuracy, p.rate_nats)):
        if p.rate_nats < best_rate:
            kept.append(p)
            best_rate = p.rate_nats
    kept.reverse()
    return kept


def trace_curve(pdfa: Pdfa, pi: np.ndarray, beta_grid: np.ndarray | None = None) -> RateAccuracyCurve:
    """Sweep the beta grid, drop unconverged and dominated points, augment.

    The default grid is beta = 0 plus 100 logarithmic values in [1e-2, 1e3];
    beta = 0 always converges, so the curve is never empty.
    """
    if beta_grid is None:
        beta_grid = DEFAULT_BETA_GRID
    a = accuracy_matrix(pdfa)
    points = [ba_solve(pi, a, beta) for beta in beta_grid]
    points = [p for p in points if p.converged]
    points = _drop_dominated(points)
    points.sort(key=lambda p: (p.accuracy, p.rate_nats))
    return RateAccuracyCurve(
        points=tuple(points),
        augmented_point=optimal_predictor_point(pdfa, pi),
    )


def normalized_distance(point: tuple[float, float], curve: RateAccuracyCurve,
                        opt_point: tuple[float, float]) -> float:
    """Euclidean distance from a normalized (rate, accuracy) point to the curve.

    Both the query point and every curve vertex are divided coordinate-wise
    by the optimal predictor's (rate, accuracy); the distance is measured to
    the piecewise-linear curve through the normalized vertices, augmented
    point included.  Machines with a zero-rate optimal predictor have no
    normalization and are rejected.
    """
    r_opt, a_opt = opt_point
    if r_opt <= 0.0:
        raise ExcludedMachineError("optimal predictor rate is 0 nats")
    rate, accuracy = point
    p = np.array([accuracy / a_opt, rate / r_opt])
    verts = curve.polyline()
    verts = verts / np.array([a_opt, r_opt])
    if len(verts) == 1:
        return float(np.hypot(*(p - verts[0])))
    best = np.inf
    for v0, v1 in zip(verts[:-1], verts[1:]):
        seg = v1 - v0
        seg_len2 = float(seg @ seg)
        if seg_len2 == 0.0:
            proj = v0
        else:
            t = float(np.clip((p - v0) @ seg / seg_len2, 0.0, 1.0))
            proj = v0 + t * seg
        best = min(best, float(np.hypot(*(p - proj))))
    return best


def normalized_distortion(accuracy: float, opt_accuracy: float) -> float:
    """Percent shortfall of accuracy relative to the optimum, floored at -100."""
    pct = 100.0 * (opt_accuracy - accuracy) / opt_accuracy
    return max(pct, -100.0)


def write_curve_csv(curve: RateAccuracyCurve, path: str | Path) -> None:
    """Curve CSV: beta, rate_nats, accuracy; the optimal point flagged last."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beta", "rate_nats", "accuracy", "kind"])
        for p in curve.points:
            writer.writerow([repr(p.beta), repr(p.rate_nats), repr(p.accuracy), "ba"])
        r_opt, a_opt = curve.augmented_point
        writer.writerow(["", repr(r_opt), repr(a_opt), "optimal"])
