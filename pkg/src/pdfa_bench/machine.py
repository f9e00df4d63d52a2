"""Binary-alphabet PDFAs and their exact statistics.

A PDFA (probabilistic deterministic finite automaton) is a finite-state
generator: each state emits a symbol from {0, 1} according to a per-state
emission distribution and then moves to a successor state determined by the
(state, symbol) pair.  Determinism here means unifilarity, not absence of
randomness: given the current state and the emitted symbol, the next state
is unique.

All probabilities are doubles; all entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ALPHABET = (0, 1)

NORMALIZATION_TOL = 1e-12
STATIONARY_TOL = 1e-14
STATIONARY_MAX_ITER = 1_000_000
MINIMALITY_TOL = 1e-9


class PdfaError(Exception):
    """Base class for PDFA failures."""


class NonConvergenceError(PdfaError):
    """Stationary-distribution iteration did not converge."""


class ImpossibleObservationError(PdfaError):
    """Observed a symbol with probability zero under the current filter state."""


@dataclass(frozen=True)
class Pdfa:
    """A unifilar PDFA over the alphabet {0, 1}.

    ``transitions`` maps (state, symbol) to (successor, probability), with an
    entry present only for symbols the state actually emits.  Instances are
    treated as immutable after construction.
    """

    states: tuple[str, ...]
    transitions: dict[tuple[str, int], tuple[str, float]]
    machine_id: str = ""

    @property
    def n_states(self) -> int:
        return len(self.states)

    def state_index(self, state: str) -> int:
        return self.states.index(state)

    def emission_probs(self, state: str) -> dict[int, float]:
        """Emission distribution p(x | state) over the symbols the state emits."""
        out: dict[int, float] = {}
        for x in ALPHABET:
            entry = self.transitions.get((state, x))
            if entry is not None:
                out[x] = entry[1]
        return out

    def successor(self, state: str, symbol: int) -> str | None:
        entry = self.transitions.get((state, symbol))
        return entry[0] if entry is not None else None

    def emission_matrix(self) -> np.ndarray:
        """(n_states, 2) array of p(x | state); 0 where a symbol is not emitted."""
        em = np.zeros((self.n_states, 2))
        for i, s in enumerate(self.states):
            for x in ALPHABET:
                if (s, x) in self.transitions:
                    em[i, x] = self.transitions[(s, x)][1]
        return em

    def successor_matrix(self) -> np.ndarray:
        """(n_states, 2) array of successor state indices; -1 where absent."""
        succ = np.full((self.n_states, 2), -1, dtype=np.int64)
        for i, s in enumerate(self.states):
            for x in ALPHABET:
                if (s, x) in self.transitions:
                    succ[i, x] = self.state_index(self.transitions[(s, x)][0])
        return succ

    def state_transition_matrix(self) -> np.ndarray:
        """Row-stochastic state-to-state matrix T(s, s') = sum_x p(x|s)[delta(s,x)=s']."""
        T = np.zeros((self.n_states, self.n_states))
        for (s, _x), (succ, p) in self.transitions.items():
            T[self.state_index(s), self.state_index(succ)] += p
        return T


@dataclass(frozen=True)
class ProcessSummary:
    """Exact stationary statistics of the process a PDFA generates."""

    pi: np.ndarray
    entropy_rate_nats: float
    statistical_complexity_nats: float
    optimal_accuracy: float
    optimal_rate_nats: float


@dataclass(frozen=True)
class SequenceSample:
    """A sampled symbol stream together with the generating state path."""

    symbols: np.ndarray
    states: np.ndarray  # state indices, aligned with symbols
    seed: int


@dataclass
class ValidationReport:
    ok: bool
    violations: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# construction helpers for well-known processes

def even_process(q: float = 0.5, machine_id: str = "") -> Pdfa:
    """Two-state machine allowing only even runs of 1s between 0s.

    State A emits 1 with probability ``q`` (moving to B) and 0 with
    probability ``1 - q`` (staying in A); state B always emits 1 and
    returns to A.
    """
    return Pdfa(
        states=("A", "B"),
        transitions={
            ("A", 0): ("A", 1.0 - q),
            ("A", 1): ("B", q),
            ("B", 1): ("A", 1.0),
        },
        machine_id=machine_id or f"even-q{q:g}",
    )


def fair_coin(machine_id: str = "coin") -> Pdfa:
    """Single-state i.i.d. fair-coin machine."""
    return Pdfa(
        states=("A",),
        transitions={("A", 0): ("A", 0.5), ("A", 1): ("A", 0.5)},
        machine_id=machine_id,
    )


def biased_coin(p1: float, machine_id: str = "") -> Pdfa:
    """Single-state i.i.d. machine emitting 1 with probability ``p1``."""
    return Pdfa(
        states=("A",),
        transitions={("A", 0): ("A", 1.0 - p1), ("A", 1): ("A", p1)},
        machine_id=machine_id or f"coin-p{p1:g}",
    )


def period_two(machine_id: str = "period2") -> Pdfa:
    """Deterministic alternating machine: A emits 1 to B, B emits 0 to A."""
    return Pdfa(
        states=("A", "B"),
        transitions={("A", 1): ("B", 1.0), ("B", 0): ("A", 1.0)},
        machine_id=machine_id,
    )


def golden_mean(q: float = 0.5, machine_id: str = "") -> Pdfa:
    """Two-state machine forbidding consecutive 1s; A emits 1 w.p. ``q``."""
    return Pdfa(
        states=("A", "B"),
        transitions={
            ("A", 0): ("A", 1.0 - q),
            ("A", 1): ("B", q),
            ("B", 0): ("A", 1.0),
        },
        machine_id=machine_id or f"goldenmean-q{q:g}",
    )


# ---------------------------------------------------------------------------
# validation

def _strongly_connected(pdfa: Pdfa) -> bool:
    n = pdfa.n_states
    if n == 0:
        return False
    fwd: dict[str, set[str]] = {s: set() for s in pdfa.states}
    rev: dict[str, set[str]] = {s: set() for s in pdfa.states}
    for (s, _x), (succ, p) in pdfa.transitions.items():
        if p > 0:
            fwd[s].add(succ)
            rev[succ].add(s)

    def reach(adj, start):
        seen = {start}
        stack = [start]
        while stack:
            cur = stack.pop()
            for nxt in adj[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    root = pdfa.states[0]
    return len(reach(fwd, root)) == n and len(reach(rev, root)) == n


def validate(pdfa: Pdfa) -> ValidationReport:
    """Diagnostic check of the PDFA invariants.

    Reports violations rather than raising; kinds are ``normalization``,
    ``dangling state``, ``not strongly connected`` and ``non-minimal``.
    Unifilarity holds structurally (the transition map admits one successor
    per (state, symbol)).
    """
    violations: list[str] = []
    for s in pdfa.states:
        probs = pdfa.emission_probs(s)
        if not probs or not any(p > 0 for p in probs.values()):
            violations.append(f"dangling state: {s} has no outgoing transition")
            continue
        total = sum(probs.values())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            violations.append(f"normalization: state {s} emissions sum to {total!r}")
    for (s, x), (succ, p) in pdfa.transitions.items():
        if s not in pdfa.states or succ not in pdfa.states:
            violations.append(f"dangling state: transition ({s},{x})->{succ} leaves state set")
        if not (0.0 <= p <= 1.0):
            violations.append(f"normalization: p({x}|{s}) = {p!r} outside [0,1]")
    if not violations and not _strongly_connected(pdfa):
        violations.append("not strongly connected")
    if not violations and not is_minimal(pdfa):
        violations.append("non-minimal: equivalent states exist")
    return ValidationReport(ok=not violations, violations=violations)


def is_minimal(pdfa: Pdfa, tol: float = MINIMALITY_TOL) -> bool:
    """True iff no two states are equivalent under iterated partition refinement.

    States start in the same block when their emission distributions agree
    within ``tol`` per symbol; blocks are then refined by the successor block
    per symbol until a fixpoint.  Minimal iff every block is a singleton.
    """
    states = list(pdfa.states)

    def emission_sig(s: str) -> tuple[float, float]:
        probs = pdfa.emission_probs(s)
        return (probs.get(0, 0.0), probs.get(1, 0.0))

    # initial partition by emission distribution (greedy within-tol grouping)
    blocks: list[list[str]] = []
    for s in states:
        sig = emission_sig(s)
        for block in blocks:
            ref = emission_sig(block[0])
            if all(abs(a - b) <= tol for a, b in zip(sig, ref)):
                block.append(s)
                break
        else:
            blocks.append([s])

    while True:
        block_of = {s: i for i, block in enumerate(blocks) for s in block}
        new_blocks: list[list[str]] = []
        for block in blocks:
            sig_groups: dict[tuple, list[str]] = {}
            for s in block:
                sig = tuple(
                    block_of[pdfa.successor(s, x)] if pdfa.successor(s, x) is not None else -1
                    for x in ALPHABET
                )
                sig_groups.setdefault(sig, []).append(s)
            new_blocks.extend(sig_groups.values())
        if len(new_blocks) == len(blocks):
            break
        blocks = new_blocks
    return all(len(block) == 1 for block in blocks)


# ---------------------------------------------------------------------------
# stationary statistics

def stationary_distribution(pdfa: Pdfa) -> np.ndarray:
    """Stationary distribution pi solving pi = pi T, by power iteration."""
    T = pdfa.state_transition_matrix()
    n = pdfa.n_states
    # iterate on the lazy chain (I + T)/2: same stationary vector, but
    # aperiodic, so deterministic cycles converge instead of oscillating
    T = 0.5 * (np.eye(n) + T)
    pi = np.full(n, 1.0 / n)
    for _ in range(STATIONARY_MAX_ITER):
        nxt = pi @ T
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < STATIONARY_TOL:
            return nxt
        pi = nxt
    raise NonConvergenceError(
        f"stationary distribution did not converge for machine {pdfa.machine_id!r}"
    )


def entropy_rate(pdfa: Pdfa, pi: np.ndarray) -> float:
    """Per-symbol entropy h = -sum_s pi(s) sum_x p(x|s) ln p(x|s), in nats."""
    h = 0.0
    for i, s in enumerate(pdfa.states):
        for p in pdfa.emission_probs(s).values():
            if p > 0:
                h -= pi[i] * p * math.log(p)
    return float(h)


def statistical_complexity(pdfa: Pdfa, pi: np.ndarray) -> float:
    """State entropy -sum_s pi(s) ln pi(s), in nats."""
    return float(-np.sum(pi[pi > 0] * np.log(pi[pi > 0]))) + 0.0


def optimal_prediction(pdfa: Pdfa, state: str) -> int:
    """Most probable next symbol from ``state``; ties break to the smaller symbol."""
    probs = pdfa.emission_probs(state)
    p0 = probs.get(0, 0.0)
    p1 = probs.get(1, 0.0)
    return 0 if p0 >= p1 else 1


def optimal_predictor_point(pdfa: Pdfa, pi: np.ndarray) -> tuple[float, float]:
    """Exact (rate_nats, accuracy) of the causal-state argmax predictor.

    Accuracy is sum_s pi(s) max_x p(x|s); the rate is the entropy of the
    prediction marginal induced by the per-state argmax (with the documented
    tie rule, so the value is well-defined at exact ties).
    """
    accuracy = 0.0
    marginal = np.zeros(2)
    for i, s in enumerate(pdfa.states):
        probs = pdfa.emission_probs(s)
        accuracy += pi[i] * max(probs.values())
        marginal[optimal_prediction(pdfa, s)] += pi[i]
    marginal /= marginal.sum()  # absorb round-off so a constant predictor is exactly rate 0
    rate = float(-np.sum(marginal[marginal > 0] * np.log(marginal[marginal > 0]))) + 0.0
    return rate, float(accuracy)


def process_summary(pdfa: Pdfa) -> ProcessSummary:
    """Bundle pi, entropy rate, statistical complexity, and the optimal point."""
    pi = stationary_distribution(pdfa)
    r_opt, a_opt = optimal_predictor_point(pdfa, pi)
    return ProcessSummary(
        pi=pi,
        entropy_rate_nats=entropy_rate(pdfa, pi),
        statistical_complexity_nats=statistical_complexity(pdfa, pi),
        optimal_accuracy=a_opt,
        optimal_rate_nats=r_opt,
    )


# ---------------------------------------------------------------------------
# sampling and filtering

def sample_sequence(pdfa: Pdfa, length: int, seed: int) -> SequenceSample:
    """Draw a length-``length`` stream; initial state from pi, then follow emissions.

    Deterministic given (pdfa, length, seed).  Length 0 yields an empty sample.
    """
    rng = np.random.default_rng(seed)
    symbols = np.empty(length, dtype=np.int8)
    state_path = np.empty(length, dtype=np.int64)
    if length == 0:
        return SequenceSample(symbols=symbols, states=state_path, seed=seed)

    pi = stationary_distribution(pdfa)
    em = pdfa.emission_matrix()
    succ = pdfa.successor_matrix()
    p1 = em[:, 1]
    state = int(rng.choice(pdfa.n_states, p=pi))
    uniforms = rng.random(length)
    for t in range(length):
        x = 1 if uniforms[t] < p1[state] else 0
        symbols[t] = x
        state_path[t] = state
        state = succ[state, x]
    return SequenceSample(symbols=symbols, states=state_path, seed=seed)


def filter_states(pdfa: Pdfa, symbols: np.ndarray) -> np.ndarray:
    """Bayes-filter the state distribution along an observed stream.

    Returns a (len(symbols), n_states) array whose row t is the state
    distribution after observing symbols[: t + 1], starting from pi.  Once
    the distribution synchronizes to a single state it stays a point mass
    (unifilarity).  An observation with probability zero under the current
    support raises ImpossibleObservationError.
    """
    n = pdfa.n_states
    em = pdfa.emission_matrix()
    succ = pdfa.successor_matrix()
    dist = stationary_distribution(pdfa)
    out = np.empty((len(symbols), n))
    for t, x in enumerate(np.asarray(symbols, dtype=np.int64)):
        weights = dist * em[:, x]
        total = weights.sum()
        if total <= 0.0:
            raise ImpossibleObservationError(
                f"symbol {int(x)} at position {t} is impossible under machine "
                f"{pdfa.machine_id!r}"
            )
        nxt = np.zeros(n)
        for i in np.nonzero(weights)[0]:
            nxt[succ[i, x]] += weights[i]
        dist = nxt / total
        out[t] = dist
    return out


def predictive_distribution(pdfa: Pdfa, dist: np.ndarray) -> np.ndarray:
    """Next-symbol distribution sum_s dist(s) p(x|s) for a filter state ``dist``."""
    return dist @ pdfa.emission_matrix()
