"""Single-layer LSTM trained by truncated backpropagation through time.

The cell follows the classic gate equations with a sigmoid readout on the
hidden state; note the hidden state is o * c directly (no output tanh).
The readout is trained jointly with the gate parameters by maximizing the
next-symbol log-likelihood, using Adam (default) or plain gradient ascent
over fixed-length windows with the cell state carried across windows.

Gates are stored stacked (order f, i, o, g) so one matrix-vector product
per time step covers all four pre-activations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pdfa_bench.predictors.base import (
    InsufficientDataError,
    PredictorSpec,
    TrainingFailureError,
)

INIT_SCALE = 0.1
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
MAX_RESTARTS = 5
EARLY_STOP_PATIENCE = 5
EARLY_STOP_MIN_GAIN_PER_SYMBOL = 1e-4


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmParams:
    """All trainable parameters; gate blocks stacked along the first axis."""

    Wx: np.ndarray  # (4N,) input weights, scalar symbol input
    Wh: np.ndarray  # (4N, N) recurrent weights
    b: np.ndarray  # (4N,)
    w: np.ndarray  # (N,) readout weights
    w0: float  # readout bias

    @property
    def n_nodes(self) -> int:
        return self.Wh.shape[1]

    # per-gate views, stacking order f, i, o, g (g = tanh candidate)
    def _block(self, idx: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.n_nodes
        sl = slice(idx * n, (idx + 1) * n)
        return self.Wx[sl], self.Wh[sl], self.b[sl]

    @property
    def forget_gate(self):
        return self._block(0)

    @property
    def input_gate(self):
        return self._block(1)

    @property
    def output_gate(self):
        return self._block(2)

    @property
    def candidate(self):
        return self._block(3)

    def copy(self) -> "LstmParams":
        return LstmParams(self.Wx.copy(), self.Wh.copy(), self.b.copy(),
                          self.w.copy(), self.w0)

    def arrays(self) -> list[np.ndarray]:
        return [self.Wx, self.Wh, self.b, self.w, np.atleast_1d(np.float64(self.w0))]


def init_params(n_nodes: int, seed: int) -> LstmParams:
    rng = np.random.default_rng(seed)
    return LstmParams(
        Wx=rng.normal(scale=INIT_SCALE, size=4 * n_nodes),
        Wh=rng.normal(scale=INIT_SCALE, size=(4 * n_nodes, n_nodes)),
        b=rng.normal(scale=INIT_SCALE, size=4 * n_nodes),
        w=rng.normal(scale=INIT_SCALE, size=n_nodes),
        w0=float(rng.normal(scale=INIT_SCALE)),
    )


@dataclass
class _Cache:
    """Per-step forward quantities needed by the backward pass."""

    h_pre: np.ndarray  # (T, N) hidden state used to predict x_t
    c_pre: np.ndarray  # (T, N) cell state before consuming x_t
    gates: np.ndarray  # (T, 4N) activated gates f, i, o, g
    c_new: np.ndarray  # (T, N) cell state after consuming x_t
    p1: np.ndarray  # (T,)
    h_out: np.ndarray  # (N,) hidden state after the window
    c_out: np.ndarray  # (N,) cell state after the window
    loglik: float


def _forward_window(params: LstmParams, symbols: np.ndarray,
                    h: np.ndarray, c: np.ndarray) -> _Cache:
    T = len(symbols)
    n = params.n_nodes
    h_pre = np.empty((T, n))
    c_pre = np.empty((T, n))
    gates = np.empty((T, 4 * n))
    c_new = np.empty((T, n))
    p1 = np.empty(T)
    loglik = 0.0
    Wx, Wh, b, w, w0 = params.Wx, params.Wh, params.b, params.w, params.w0
    for t in range(T):
        x = float(symbols[t])
        h_pre[t] = h
        c_pre[t] = c
        z_r = float(w @ h + w0)
        p1[t] = 1.0 / (1.0 + math.exp(-z_r)) if z_r >= 0 else math.exp(z_r) / (1.0 + math.exp(z_r))
        loglik -= np.logaddexp(0.0, -z_r) if symbols[t] == 1 else np.logaddexp(0.0, z_r)
        z = Wh @ h + Wx * x + b
        f = _sigmoid(z[:n])
        i = _sigmoid(z[n:2 * n])
        o = _sigmoid(z[2 * n:3 * n])
        g = np.tanh(z[3 * n:])
        gates[t, :n] = f
        gates[t, n:2 * n] = i
        gates[t, 2 * n:3 * n] = o
        gates[t, 3 * n:] = g
        c = f * c + i * g
        c_new[t] = c
        h = o * c
    return _Cache(h_pre=h_pre, c_pre=c_pre, gates=gates, c_new=c_new, p1=p1,
                  h_out=h, c_out=c, loglik=float(loglik))


def _backward_window(params: LstmParams, symbols: np.ndarray,
                     cache: _Cache) -> LstmParams:
    """Gradients of the window log-likelihood with respect to all parameters."""
    T = len(symbols)
    n = params.n_nodes
    gWx = np.zeros_like(params.Wx)
    gWh = np.zeros_like(params.Wh)
    gb = np.zeros_like(params.b)
    gw = np.zeros_like(params.w)
    gw0 = 0.0
    dh = np.zeros(n)
    dc = np.zeros(n)
    for t in range(T - 1, -1, -1):
        f = cache.gates[t, :n]
        i = cache.gates[t, n:2 * n]
        o = cache.gates[t, 2 * n:3 * n]
        g = cache.gates[t, 3 * n:]
        c = cache.c_new[t]
        # hidden output of this step: h = o * c
        do = dh * c
        dc_total = dh * o + dc
        df = dc_total * cache.c_pre[t]
        di = dc_total * g
        dg = dc_total * i
        dc = dc_total * f
        dz = np.concatenate([
            df * f * (1.0 - f),
            di * i * (1.0 - i),
            do * o * (1.0 - o),
            dg * (1.0 - g * g),
        ])
        gWx += dz * float(symbols[t])
        gWh += np.outer(dz, cache.h_pre[t])
        gb += dz
        dh = params.Wh.T @ dz
        # readout at step t used h_pre[t]
        dz_r = float(symbols[t]) - cache.p1[t]
        gw += dz_r * cache.h_pre[t]
        gw0 += dz_r
        dh += dz_r * params.w
    return LstmParams(Wx=gWx, Wh=gWh, b=gb, w=gw, w0=gw0)


def lstm_forward(params: LstmParams, symbols: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Run the cell over a stream from zero state.

    Returns (hidden rows used to predict each symbol, per-step p(x_t = 1),
    total log-likelihood).
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    n = params.n_nodes
    cache = _forward_window(params, symbols, np.zeros(n), np.zeros(n))
    return cache.h_pre, cache.p1, cache.loglik


class _Adam:
    def __init__(self, shapes: list[np.ndarray]):
        self.m = [np.zeros_like(a) for a in shapes]
        self.v = [np.zeros_like(a) for a in shapes]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m += (1.0 - ADAM_BETA1) * (g - m)
            v += (1.0 - ADAM_BETA2) * (g * g - v)
            m_hat = m / (1.0 - ADAM_BETA1 ** self.t)
            v_hat = v / (1.0 - ADAM_BETA2 ** self.t)
            p += lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

    def snapshot(self):
        return ([m.copy() for m in self.m], [v.copy() for v in self.v], self.t)

    def restore(self, snap):
        ms, vs, t = snap
        self.m = [m.copy() for m in ms]
        self.v = [v.copy() for v in vs]
        self.t = t


def _apply_update(params: LstmParams, grads: LstmParams, adam: _Adam | None,
                  lr: float) -> None:
    plist = [params.Wx, params.Wh, params.b, params.w]
    glist = [grads.Wx, grads.Wh, grads.b, grads.w]
    w0_box = np.array([params.w0])
    g0_box = np.array([grads.w0])
    if adam is not None:
        adam.step(plist + [w0_box], glist + [g0_box], lr)
    else:
        for p, g in zip(plist + [w0_box], glist + [g0_box]):
            p += lr * g
    params.w0 = float(w0_box[0])


def lstm_train(spec: PredictorSpec, symbols: np.ndarray) -> tuple[LstmParams, list[float]]:
    """Fit an LSTM to a stream; returns the parameters and per-epoch log-likelihoods.

    Windows of ``truncation_window`` steps are processed in order with the
    cell state carried across windows; parameters update after each window.
    A non-finite loss halves the learning rate and restarts the epoch, up
    to MAX_RESTARTS times.  Training stops early once the epoch
    log-likelihood plateaus.
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    T = len(symbols)
    window = spec.truncation_window
    if T < window:
        raise InsufficientDataError(
            f"need at least {window} symbols (one truncation window), got {T}"
        )
    params = init_params(spec.size, spec.seed)
    use_adam = spec.optimizer == "adam"
    adam = _Adam(params.arrays()) if use_adam else None
    lr = spec.learning_rate
    restarts = 0
    history: list[float] = []
    best_ll = -np.inf
    stalled = 0
    epoch = 0
    while epoch < spec.epochs:
        param_snap = params.copy()
        adam_snap = adam.snapshot() if adam is not None else None
        h = np.zeros(spec.size)
        c = np.zeros(spec.size)
        epoch_ll = 0.0
        failed = False
        for start in range(0, T, window):
            chunk = symbols[start:start + window]
            cache = _forward_window(params, chunk, h, c)
            if not np.isfinite(cache.loglik):
                failed = True
                break
            grads = _backward_window(params, chunk, cache)
            _apply_update(params, grads, adam, lr)
            h, c = cache.h_out, cache.c_out
            epoch_ll += cache.loglik
        if failed:
            restarts += 1
            if restarts > MAX_RESTARTS:
                raise TrainingFailureError(
                    "LSTM training kept producing non-finite losses"
                )
            params = param_snap
            if adam is not None:
                adam.restore(adam_snap)
            lr *= 0.5
            continue
        history.append(epoch_ll)
        if epoch_ll > best_ll + EARLY_STOP_MIN_GAIN_PER_SYMBOL * T:
            best_ll = max(best_ll, epoch_ll)
            stalled = 0
        else:
            best_ll = max(best_ll, epoch_ll)
            stalled += 1
            if stalled >= EARLY_STOP_PATIENCE:
                break
        epoch += 1
    return params, history


class LstmPredictor:
    def __init__(self, spec: PredictorSpec):
        self.spec = spec
        self.params: LstmParams | None = None
        self.history: list[float] = []

    def fit(self, symbols: np.ndarray) -> None:
        self.params, self.history = lstm_train(self.spec, symbols)

    def step_probabilities(self, symbols: np.ndarray) -> np.ndarray:
        assert self.params is not None, "fit before predicting"
        _, p1, _ = lstm_forward(self.params, symbols)
        return p1
