"""Experiment orchestration: sequences, sweeps, the record store, aggregation.

The protocol per machine: generate one symbol stream, train each predictor
on the first half, evaluate on the second half, and score the resulting
(rate, accuracy) against the machine's exact rate-accuracy frontier.
Results accumulate in an append-only JSON-lines store keyed by
(machine_id, family, size, seed); on completion the store is compacted into
canonical key order, so identical configurations yield byte-identical
stores and interrupted runs can resume.

All randomness derives from one global seed via stable hashing of the task
key; there are no hidden entropy sources.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pdfa_bench.machine import Pdfa, ProcessSummary, process_summary, sample_sequence
from pdfa_bench.predictors.base import (
    FAMILIES,
    InsufficientDataError,
    PredictorSpec,
    TrainingFailureError,
    build_predictor,
    evaluate_stream,
)
from pdfa_bench.rate_accuracy import (
    RateAccuracyCurve,
    normalized_distance,
    normalized_distortion,
    trace_curve,
)

SCHEMA_VERSION = 1

DEFAULT_GLM_ORDERS = tuple(range(1, 11))
DEFAULT_RESERVOIR_SIZES = tuple(range(1, 62, 5))
DEFAULT_LSTM_SIZES = tuple(range(1, 122, 12))


class DegenerateRegressionError(Exception):
    """Regression design matrix is rank deficient."""


@dataclass(frozen=True)
class ProtocolConfig:
    """Evaluation protocol knobs; defaults mirror the benchmark setup."""

    sequence_length: int = 5000
    train_fraction: float = 0.5
    seeds_per_machine: int = 1
    glm_orders: tuple[int, ...] = DEFAULT_GLM_ORDERS
    reservoir_sizes: tuple[int, ...] = DEFAULT_RESERVOIR_SIZES
    lstm_sizes: tuple[int, ...] = DEFAULT_LSTM_SIZES
    exclude_zero_rate: bool = True
    learning_rate: float = 0.01
    epochs: int = 50
    l2_strength: float = 1.0
    truncation_window: int = 64
    spectral_radius: float = 0.95
    optimizer: str = "adam"

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.sequence_length < 2.0 / (1.0 - self.train_fraction):
            raise ValueError("sequence_length too short for the train fraction")

    @property
    def train_length(self) -> int:
        return int(self.sequence_length * self.train_fraction)

    def grid_for(self, family: str) -> tuple[int, ...]:
        if family == "glm":
            return self.glm_orders
        if family == "reservoir":
            return self.reservoir_sizes
        if family == "lstm":
            return self.lstm_sizes
        if family == "oracle":
            return (1,)
        raise ValueError(f"unknown family {family!r}")

    def spec_for(self, family: str, size: int, seed: int) -> PredictorSpec:
        return PredictorSpec(
            family=family,
            size=size,
            seed=seed,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            l2_strength=self.l2_strength,
            truncation_window=self.truncation_window,
            spectral_radius=self.spectral_radius,
            optimizer=self.optimizer,
        )


@dataclass(frozen=True)
class EvalRecord:
    """One (machine, family, size, seed) benchmark result."""

    machine_id: str
    family: str
    size: int
    seed: int
    h_mu: float
    C_mu: float
    A_opt: float
    R_opt: float
    rate_nats: float | None = None
    accuracy: float | None = None
    normalized_rate: float | None = None
    normalized_accuracy: float | None = None
    normalized_distance: float | None = None
    normalized_distortion_pct: float | None = None
    failed: bool = False
    schema_version: int = SCHEMA_VERSION

    @property
    def key(self) -> tuple[str, str, int, int]:
        return (self.machine_id, self.family, self.size, self.seed)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @staticmethod
    def from_json(line: str) -> "EvalRecord":
        return EvalRecord(**json.loads(line))


@dataclass(frozen=True)
class MachineContext:
    """Per-machine precomputation shared by every run on that machine."""

    pdfa: Pdfa
    summary: ProcessSummary
    curve: RateAccuracyCurve


def build_context(pdfa: Pdfa) -> MachineContext:
    summary = process_summary(pdfa)
    curve = trace_curve(pdfa, summary.pi)
    return MachineContext(pdfa=pdfa, summary=summary, curve=curve)


def derive_seed(*parts) -> int:
    """Stable task seed: first 8 bytes of sha256 over the joined key parts."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def run_single(pdfa: Pdfa, family: str, size: int, protocol: ProtocolConfig,
               global_seed: int, seed_index: int = 0,
               context: MachineContext | None = None) -> EvalRecord:
    """Train one predictor on one machine's stream and score it.

    Fully deterministic given (machine, family, size, seeds).  Training
    failures yield a record flagged ``failed`` rather than an exception.
    """
    if context is None:
        context = build_context(pdfa)
    summary = context.summary
    base = dict(
        machine_id=pdfa.machine_id,
        family=family,
        size=size,
        seed=seed_index,
        h_mu=summary.entropy_rate_nats,
        C_mu=summary.statistical_complexity_nats,
        A_opt=summary.optimal_accuracy,
        R_opt=summary.optimal_rate_nats,
    )
    sequence_seed = derive_seed(global_seed, pdfa.machine_id, "sequence", seed_index)
    model_seed = derive_seed(global_seed, pdfa.machine_id, family, size, seed_index)
    sample = sample_sequence(pdfa, protocol.sequence_length, sequence_seed)
    spec = protocol.spec_for(family, size, model_seed)
    model = build_predictor(spec, pdfa=pdfa)
    try:
        model.fit(sample.symbols[: protocol.train_length])
    except (TrainingFailureError, InsufficientDataError):
        return EvalRecord(failed=True, **base)
    outcome = evaluate_stream(model, sample.symbols, protocol.train_length)
    record = dict(base, rate_nats=outcome.rate_nats, accuracy=outcome.accuracy,
                  normalized_distortion_pct=normalized_distortion(
                      outcome.accuracy, summary.optimal_accuracy))
    if summary.optimal_rate_nats > 0.0:
        record["normalized_rate"] = outcome.rate_nats / summary.optimal_rate_nats
        record["normalized_accuracy"] = outcome.accuracy / summary.optimal_accuracy
        record["normalized_distance"] = normalized_distance(
            (outcome.rate_nats, outcome.accuracy), context.curve,
            (summary.optimal_rate_nats, summary.optimal_accuracy))
    return EvalRecord(**record)


def best_record(records: list[EvalRecord]) -> EvalRecord | None:
    """Minimal-distortion record; ties prefer smaller size, then smaller rate."""
    candidates = [r for r in records if not r.failed]
    if not candidates:
        return None
    return min(candidates, key=lambda r: (r.normalized_distortion_pct, r.size,
                                          r.rate_nats))


def sweep_family(pdfa: Pdfa, family: str, protocol: ProtocolConfig,
                 global_seed: int, context: MachineContext | None = None,
                 sizes: tuple[int, ...] | None = None,
                 seed_indices: tuple[int, ...] | None = None,
                 ) -> tuple[list[EvalRecord], EvalRecord | None]:
    """Run every grid point of one family on one machine; return all + best."""
    if context is None:
        context = build_context(pdfa)
    if sizes is None:
        sizes = protocol.grid_for(family)
    if not sizes:
        raise ValueError("empty hyperparameter grid")
    if seed_indices is None:
        seed_indices = tuple(range(protocol.seeds_per_machine))
    records = [
        run_single(pdfa, family, size, protocol, global_seed, seed_index, context)
        for size in sizes
        for seed_index in seed_indices
    ]
    return records, best_record(records)


# ---------------------------------------------------------------------------
# record store

def read_store(path: str | Path) -> list[EvalRecord]:
    path = Path(path)
    if not path.exists():
        return []
    records = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(EvalRecord.from_json(line))
    return records


def _write_store(records: list[EvalRecord], path: Path) -> None:
    with path.open("w") as fh:
        for r in sorted(records, key=lambda r: r.key):
            fh.write(r.to_json() + "\n")


def _machine_worker(args) -> list[EvalRecord]:
    pdfa, families, pending_sizes, protocol, global_seed = args
    context = build_context(pdfa)
    records: list[EvalRecord] = []
    for family in families:
        sizes = pending_sizes.get(family, ())
        if not sizes:
            continue
        recs, _ = sweep_family(pdfa, family, protocol, global_seed, context,
                               sizes=sizes)
        records.extend(recs)
    return records


def run_suite(machines: list[Pdfa], protocol: ProtocolConfig, store_path: str | Path,
              global_seed: int, families: tuple[str, ...] = FAMILIES,
              jobs: int = 1, progress=None) -> tuple[list[EvalRecord], list[str]]:
    """Benchmark every machine in the library; resumable and deterministic.

    Machines whose optimal predictor has zero rate are skipped (when the
    exclusion rule is on) and returned in the skip log.  Existing store
    entries are not recomputed.  Returns (all records, skipped machine ids).
    """
    store_path = Path(store_path)
    existing = read_store(store_path)
    done_keys = {r.key for r in existing}
    skipped: list[str] = []
    tasks = []
    for pdfa in machines:
        summary = process_summary(pdfa)
        if protocol.exclude_zero_rate and summary.optimal_rate_nats <= 0.0:
            skipped.append(pdfa.machine_id)
            continue
        pending = {}
        for family in families:
            sizes = tuple(
                size for size in protocol.grid_for(family)
                if any((pdfa.machine_id, family, size, si) not in done_keys
                       for si in range(protocol.seeds_per_machine))
            )
            if sizes:
                pending[family] = sizes
        if pending:
            tasks.append((pdfa, families, pending, protocol, global_seed))

    new_records: list[EvalRecord] = []
    append_fh = store_path.open("a")
    try:
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for recs in pool.map(_machine_worker, tasks):
                    for r in recs:
                        append_fh.write(r.to_json() + "\n")
                    append_fh.flush()
                    new_records.extend(recs)
                    if progress:
                        progress(recs)
        else:
            for task in tasks:
                recs = _machine_worker(task)
                for r in recs:
                    append_fh.write(r.to_json() + "\n")
                append_fh.flush()
                new_records.extend(recs)
                if progress:
                    progress(recs)
    finally:
        append_fh.close()
    all_records = existing + [r for r in new_records if r.key not in done_keys]
    _write_store(all_records, store_path)  # compact into canonical order
    return all_records, skipped


# ---------------------------------------------------------------------------
# aggregation

@dataclass(frozen=True)
class FamilyStats:
    n_records: int
    n_failed: int
    mean_distortion_pct: float
    median_distortion_pct: float
    p90_distortion_pct: float
    max_distortion_pct: float
    mean_distance: float
    max_distance: float
    optimized_mean_distortion_pct: float
    optimized_max_distortion_pct: float
    optimized_mean_distance: float
    optimized_max_distance: float


@dataclass(frozen=True)
class RegressionResult:
    family: str
    target: str  # distortion | distance
    coef_h_mu: float
    coef_C_mu: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class SuiteSummary:
    n_records: int
    n_machines: int
    families: dict[str, FamilyStats]
    histogram_edges: np.ndarray
    histograms: dict[str, np.ndarray] = field(default_factory=dict)
    regressions: tuple[RegressionResult, ...] = ()


def _per_machine_best(records: list[EvalRecord]) -> dict[str, EvalRecord]:
    by_machine: dict[str, list[EvalRecord]] = {}
    for r in records:
        by_machine.setdefault(r.machine_id, []).append(r)
    return {mid: best_record(rs) for mid, rs in by_machine.items()
            if best_record(rs) is not None}


def aggregate(records: list[EvalRecord], histogram_bins: int = 20,
              histogram_range: tuple[float, float] = (0.0, 1.0)) -> SuiteSummary:
    """Suite-level statistics per family, plus regressions when estimable."""
    live = [r for r in records if not r.failed]
    if not live:
        raise ValueError("no unflagged records to aggregate")
    edges = np.linspace(histogram_range[0], histogram_range[1], histogram_bins + 1)
    families: dict[str, FamilyStats] = {}
    histograms: dict[str, np.ndarray] = {}
    for family in sorted({r.family for r in live}):
        frecs = [r for r in live if r.family == family]
        nfailed = sum(1 for r in records if r.family == family and r.failed)
        dist = np.array([r.normalized_distortion_pct for r in frecs])
        dists = np.array([r.normalized_distance for r in frecs
                          if r.normalized_distance is not None])
        best = _per_machine_best(frecs)
        bdist = np.array([b.normalized_distortion_pct for b in best.values()])
        bdists = np.array([b.normalized_distance for b in best.values()
                           if b.normalized_distance is not None])
        families[family] = FamilyStats(
            n_records=len(frecs),
            n_failed=nfailed,
            mean_distortion_pct=float(np.mean(dist)),
            median_distortion_pct=float(np.median(dist)),
            p90_distortion_pct=float(np.percentile(dist, 90)),
            max_distortion_pct=float(np.max(dist)),
            mean_distance=float(np.mean(dists)) if len(dists) else float("nan"),
            max_distance=float(np.max(dists)) if len(dists) else float("nan"),
            optimized_mean_distortion_pct=float(np.mean(bdist)),
            optimized_max_distortion_pct=float(np.max(bdist)),
            optimized_mean_distance=float(np.mean(bdists)) if len(bdists) else float("nan"),
            optimized_max_distance=float(np.max(bdists)) if len(bdists) else float("nan"),
        )
        histograms[family] = np.histogram(dists, bins=edges)[0] if len(dists) else np.zeros(histogram_bins, dtype=np.int64)
    try:
        regressions = tuple(complexity_regression(live))
    except DegenerateRegressionError:
        regressions = ()
    return SuiteSummary(
        n_records=len(records),
        n_machines=len({r.machine_id for r in live}),
        families=families,
        histogram_edges=edges,
        histograms=histograms,
        regressions=regressions,
    )


def _ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DegenerateRegressionError("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    residuals = y - X @ coef
    ss_res = float(residuals @ residuals)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return coef, r2


def complexity_regression(records: list[EvalRecord]) -> list[RegressionResult]:
    """Per-family OLS of best-per-machine distortion and distance on (h, C).

    Requires at least three machines per family; a family whose machines all
    share the same (h, C) raises DegenerateRegressionError.
    """
    live = [r for r in records if not r.failed]
    results = []
    for family in sorted({r.family for r in live}):
        best = _per_machine_best([r for r in live if r.family == family])
        rows = [b for b in best.values()]
        if len(rows) < 3:
            raise DegenerateRegressionError(
                f"family {family!r} has fewer than 3 machines"
            )
        X = np.array([[b.h_mu, b.C_mu, 1.0] for b in rows])
        for target in ("distortion", "distance"):
            if target == "distortion":
                y = np.array([b.normalized_distortion_pct for b in rows])
            else:
                pairs = [(x, b.normalized_distance) for x, b in zip(X, rows)
                         if b.normalized_distance is not None]
                if len(pairs) < 3:
                    continue
                X_t = np.array([p[0] for p in pairs])
                y = np.array([p[1] for p in pairs])
            X_use = X if target == "distortion" else X_t
            coef, r2 = _ols(X_use, y)
            results.append(RegressionResult(
                family=family, target=target,
                coef_h_mu=float(coef[0]), coef_C_mu=float(coef[1]),
                intercept=float(coef[2]), r_squared=r2,
            ))
    return results


# ---------------------------------------------------------------------------
# summary export

def write_summary_csvs(summary: SuiteSummary, out_dir: str | Path) -> list[Path]:
    """Emit family_stats.csv, histogram.csv and regression.csv into out_dir."""
    import csv

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    p = out_dir / "family_stats.csv"
    with p.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["family"] + [f.name for f in dataclasses.fields(FamilyStats)]
        writer.writerow(header)
        for family, stats in summary.families.items():
            writer.writerow([family] + [getattr(stats, f.name)
                                        for f in dataclasses.fields(FamilyStats)])
    paths.append(p)

    p = out_dir / "histogram.csv"
    with p.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["family", "bin_low", "bin_high", "count"])
        for family, counts in summary.histograms.items():
            for lo, hi, c in zip(summary.histogram_edges[:-1],
                                 summary.histogram_edges[1:], counts):
                writer.writerow([family, repr(float(lo)), repr(float(hi)), int(c)])
    paths.append(p)

    p = out_dir / "regression.csv"
    with p.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["family", "target", "coef_h_mu", "coef_C_mu",
                         "intercept", "r_squared"])
        for reg in summary.regressions:
            writer.writerow([reg.family, reg.target, repr(reg.coef_h_mu),
                             repr(reg.coef_C_mu), repr(reg.intercept),
                             repr(reg.r_squared)])
    paths.append(p)
    return paths
