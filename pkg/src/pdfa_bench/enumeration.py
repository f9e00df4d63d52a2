"""Enumeration of binary-alphabet machine topologies up to four states.

A topology is the probability-free skeleton of a PDFA: for each state, each
symbol either has a unique target state or is absent.  Enumeration produces
every strongly connected, topologically minimal skeleton on exactly
``n_states`` states, up to relabeling of the states.  Symbols are observable
and are never relabeled.

The state space grows super-exponentially with the state count, so sizes
above four are rejected outright.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pdfa_bench.machine import Pdfa, is_minimal

Edge = tuple[int, int, int]  # (from, symbol, to)

MAX_STATES = 4
MAX_EMISSION_DRAWS = 100


class UnsupportedSizeError(Exception):
    """Requested state count outside the supported range 1..4."""


class DegenerateTopologyError(Exception):
    """Emission assignment kept producing non-minimal machines."""


@dataclass(frozen=True)
class Topology:
    n_states: int
    edges: tuple[Edge, ...]
    canonical_key: str


def _edges_of(assignment: tuple[tuple[int | None, int | None], ...]) -> tuple[Edge, ...]:
    edges = []
    for s, (t0, t1) in enumerate(assignment):
        if t0 is not None:
            edges.append((s, 0, t0))
        if t1 is not None:
            edges.append((s, 1, t1))
    return tuple(edges)


def _strongly_connected(n: int, edges: tuple[Edge, ...]) -> bool:
    fwd = [set() for _ in range(n)]
    rev = [set() for _ in range(n)]
    for s, _x, t in edges:
        fwd[s].add(t)
        rev[t].add(s)

    def reach(adj):
        seen = {0}
        stack = [0]
        while stack:
            cur = stack.pop()
            for nxt in adj[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen)

    return reach(fwd) == n and reach(rev) == n


def _topologically_minimal(n: int, edges: tuple[Edge, ...]) -> bool:
    """Moore reduction with emitted-symbol sets as outputs yields no merges."""
    succ: list[list[int | None]] = [[None, None] for _ in range(n)]
    for s, x, t in edges:
        succ[s][x] = t
    # initial partition by which symbols a state emits
    sig0 = [(succ[s][0] is not None, succ[s][1] is not None) for s in range(n)]
    block = {s: sig0[s] for s in range(n)}
    n_blocks = len(set(block.values()))
    while True:
        new_block = {}
        for s in range(n):
            new_block[s] = (
                block[s],
                block[succ[s][0]] if succ[s][0] is not None else None,
                block[succ[s][1]] if succ[s][1] is not None else None,
            )
        n_new = len(set(new_block.values()))
        if n_new == n_blocks:
            return n_blocks == n
        block, n_blocks = new_block, n_new


def canonical_form(n_states: int, edges: tuple[Edge, ...]) -> str:
    """Relabeling-invariant key: minimum edge-list encoding over all permutations."""
    best = None
    for perm in itertools.permutations(range(n_states)):
        relabeled = tuple(sorted((perm[s], x, perm[t]) for s, x, t in edges))
        if best is None or relabeled < best:
            best = relabeled
    body = ",".join(f"{s}{x}{t}" for s, x, t in best)
    return f"n{n_states}:{body}"


def _valid_labeled_assignments(n_states: int):
    """Yield edge tuples of every valid labeled skeleton on exactly n_states states."""
    per_state = [
        (t0, t1)
        for t0 in [None, *range(n_states)]
        for t1 in [None, *range(n_states)]
        if not (t0 is None and t1 is None)
    ]
    for assignment in itertools.product(per_state, repeat=n_states):
        edges = _edges_of(assignment)
        if _strongly_connected(n_states, edges) and _topologically_minimal(n_states, edges):
            yield edges


def enumerate_topologies(n_states: int) -> list[Topology]:
    """All topologies on exactly ``n_states`` states, deduplicated up to relabeling.

    Deterministic order by canonical key.
    """
    if not 1 <= n_states <= MAX_STATES:
        raise UnsupportedSizeError(
            f"state count {n_states} outside supported range 1..{MAX_STATES}"
        )
    by_key: dict[str, tuple[Edge, ...]] = {}
    for edges in _valid_labeled_assignments(n_states):
        key = canonical_form(n_states, edges)
        if key not in by_key:
            by_key[key] = edges
    return [
        Topology(n_states=n_states, edges=by_key[key], canonical_key=key)
        for key in sorted(by_key)
    ]


def count_topologies_by_orbit(n_states: int) -> int:
    """Topology count via Burnside's lemma over the relabeling action.

    Counts orbits as the average, over all state permutations, of the number
    of valid labeled skeletons fixed by the permutation.  Independent of the
    canonicalize-and-deduplicate path in :func:`enumerate_topologies`.
    """
    if not 1 <= n_states <= MAX_STATES:
        raise UnsupportedSizeError(
            f"state count {n_states} outside supported range 1..{MAX_STATES}"
        )
    labeled = [frozenset(edges) for edges in _valid_labeled_assignments(n_states)]
    perms = list(itertools.permutations(range(n_states)))
    fixed_total = 0
    for perm in perms:
        for edges in labeled:
            image = frozenset((perm[s], x, perm[t]) for s, x, t in edges)
            if image == edges:
                fixed_total += 1
    count, remainder = divmod(fixed_total, len(perms))
    assert remainder == 0, "Burnside total not divisible by the group order"
    return count


# ---------------------------------------------------------------------------
# emission assignment

STATE_NAMES = ("A", "B", "C", "D")


def assign_emissions(topology: Topology, seed: int, machine_id: str = "") -> Pdfa:
    """Attach random emission probabilities to a topology.

    States emitting both symbols draw p(1|state) ~ Uniform(0, 1); states with
    a single outgoing edge emit it with probability 1.  Draws failing the
    probabilistic minimality check are rejected and redrawn, up to
    MAX_EMISSION_DRAWS attempts.
    """
    rng = np.random.default_rng(seed)
    names = STATE_NAMES[: topology.n_states]
    if not machine_id:
        digest = hashlib.sha256(topology.canonical_key.encode()).hexdigest()[:8]
        machine_id = f"n{topology.n_states}-{digest}-s{seed}"

    out_edges: dict[int, dict[int, int]] = {s: {} for s in range(topology.n_states)}
    for s, x, t in topology.edges:
        out_edges[s][x] = t

    for _attempt in range(MAX_EMISSION_DRAWS):
        transitions: dict[tuple[str, int], tuple[str, float]] = {}
        for s in range(topology.n_states):
            targets = out_edges[s]
            if len(targets) == 2:
                p1 = float(rng.uniform())
                probs = {0: 1.0 - p1, 1: p1}
            else:
                (only_sym,) = targets
                probs = {only_sym: 1.0}
            for x, t in targets.items():
                transitions[(names[s], x)] = (names[t], probs[x])
        pdfa = Pdfa(states=names, transitions=transitions, machine_id=machine_id)
        if is_minimal(pdfa):
            return pdfa
    raise DegenerateTopologyError(
        f"topology {topology.canonical_key} stayed non-minimal after "
        f"{MAX_EMISSION_DRAWS} emission draws"
    )


# ---------------------------------------------------------------------------
# topology list file

def write_topologies(topologies: list[Topology], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for topo in topologies:
            edges = json.dumps([list(e) for e in topo.edges])
            fh.write(f"{topo.canonical_key}\t{edges}\n")


def read_topologies(path: str | Path) -> list[Topology]:
    topologies = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, edges_json = line.split("\t")
            n_states = int(key[1 : key.index(":")])
            edges = tuple(tuple(e) for e in json.loads(edges_json))
            topologies.append(Topology(n_states=n_states, edges=edges, canonical_key=key))
    return topologies
