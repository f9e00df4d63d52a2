"""On-disk machine library: JSON-lines, one machine per line.

Each line carries ``machine_id``, ``n_states``, ``states`` and a transition
list of ``{from, symbol, to, p}`` records.  Probabilities round-trip
bit-exactly (json serializes doubles via repr, which is shortest-exact).
"""

from __future__ import annotations

import json
from pathlib import Path

from pdfa_bench.machine import NORMALIZATION_TOL, Pdfa


class LibraryParseError(Exception):
    """Malformed library file; carries the offending line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class LibraryValidationError(Exception):
    """A parsed machine violates a structural invariant."""


def machine_to_record(pdfa: Pdfa) -> dict:
    return {
        "machine_id": pdfa.machine_id,
        "n_states": pdfa.n_states,
        "states": list(pdfa.states),
        "transitions": [
            {"from": s, "symbol": x, "to": succ, "p": p}
            for (s, x), (succ, p) in sorted(pdfa.transitions.items())
        ],
    }


def machine_from_record(record: dict) -> Pdfa:
    states = tuple(record["states"])
    if len(states) != record["n_states"]:
        raise LibraryValidationError(
            f"machine {record.get('machine_id')!r}: n_states does not match state list"
        )
    transitions = {}
    for tr in record["transitions"]:
        key = (tr["from"], int(tr["symbol"]))
        if key in transitions:
            raise LibraryValidationError(
                f"machine {record.get('machine_id')!r}: duplicate transition {key}"
            )
        transitions[key] = (tr["to"], float(tr["p"]))
    pdfa = Pdfa(states=states, transitions=transitions,
                machine_id=record.get("machine_id", ""))
    for s in states:
        total = sum(pdfa.emission_probs(s).values())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise LibraryValidationError(
                f"machine {pdfa.machine_id!r}: emissions from {s} sum to {total!r}"
            )
    return pdfa


def write_library(machines: list[Pdfa], path: str | Path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for m in machines:
            fh.write(json.dumps(machine_to_record(m), sort_keys=True) + "\n")


def read_library(path: str | Path) -> list[Pdfa]:
    machines = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LibraryParseError(str(exc), lineno) from exc
            machines.append(machine_from_record(record))
    return machines
