"""Command-line entry point.

Subcommands: enumerate, stats, curve, run, suite, report.  Options come
from an INI-style config file (key = value, one section per predictor
family) with command-line flags taking precedence; environment variables
are deliberately not consulted.  Exit codes: 0 success, 1 runtime failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import sys
from pathlib import Path

from pdfa_bench import enumeration, library
from pdfa_bench.harness import (
    ProtocolConfig,
    aggregate,
    build_context,
    derive_seed,
    read_store,
    run_single,
    run_suite,
    write_summary_csvs,
)
from pdfa_bench.machine import process_summary
from pdfa_bench.predictors.base import FAMILIES
from pdfa_bench.rate_accuracy import write_curve_csv

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_PROTOCOL_KEYS = {
    "length": ("sequence_length", int),
    "train_fraction": ("train_fraction", float),
    "seeds_per_machine": ("seeds_per_machine", int),
    "exclude_zero_rate": ("exclude_zero_rate", lambda v: v.lower() in ("1", "true", "yes")),
}
_FAMILY_KEYS = {
    "glm": {"sizes": ("glm_orders", None), "l2_strength": ("l2_strength", float)},
    "reservoir": {"sizes": ("reservoir_sizes", None),
                  "spectral_radius": ("spectral_radius", float)},
    "lstm": {"sizes": ("lstm_sizes", None), "learning_rate": ("learning_rate", float),
             "epochs": ("epochs", int), "truncation_window": ("truncation_window", int),
             "optimizer": ("optimizer", str)},
}
_GLOBAL_KEYS = {"seed": int, "jobs": int, "families": str}


class UsageError(Exception):
    pass


@dataclasses.dataclass
class CliConfig:
    protocol: ProtocolConfig
    seed: int = 0
    jobs: int = 1
    families: tuple[str, ...] = FAMILIES


def _parse_sizes(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in value.replace(",", " ").split())
    except ValueError as exc:
        raise UsageError(f"bad size list {value!r}") from exc


def parse_config(path: str | None, overrides: argparse.Namespace) -> CliConfig:
    """Merge defaults < config file < command-line flags."""
    fields: dict = {}
    seed, jobs = 0, 1
    families: tuple[str, ...] = FAMILIES
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise UsageError(f"config file {path!r} not found")
        for section in parser.sections():
            if section == "protocol":
                for key, value in parser["protocol"].items():
                    if key in _GLOBAL_KEYS:
                        try:
                            parsed = _GLOBAL_KEYS[key](value)
                        except ValueError as exc:
                            raise UsageError(f"bad value for {key!r}: {value!r}") from exc
                        if key == "seed":
                            seed = parsed
                        elif key == "jobs":
                            jobs = parsed
                        else:
                            families = tuple(value.replace(",", " ").split())
                        continue
                    if key not in _PROTOCOL_KEYS:
                        raise UsageError(f"unknown config key [protocol] {key!r}")
                    name, conv = _PROTOCOL_KEYS[key]
                    try:
                        fields[name] = conv(value)
                    except ValueError as exc:
                        raise UsageError(f"bad value for {key!r}: {value!r}") from exc
            elif section in _FAMILY_KEYS:
                for key, value in parser[section].items():
                    if key not in _FAMILY_KEYS[section]:
                        raise UsageError(f"unknown config key [{section}] {key!r}")
                    name, conv = _FAMILY_KEYS[section][key]
                    fields[name] = _parse_sizes(value) if conv is None else conv(value)
            else:
                raise UsageError(f"unknown config section {section!r}")
    if getattr(overrides, "length", None) is not None:
        fields["sequence_length"] = overrides.length
    if getattr(overrides, "seed", None) is not None:
        seed = overrides.seed
    if getattr(overrides, "jobs", None) is not None:
        jobs = overrides.jobs
    if getattr(overrides, "families", None):
        families = tuple(overrides.families.replace(",", " ").split())
    for fam in families:
        if fam not in (*FAMILIES, "oracle"):
            raise UsageError(f"unknown family {fam!r}")
    try:
        protocol = ProtocolConfig(**fields)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return CliConfig(protocol=protocol, seed=seed, jobs=jobs, families=families)


def _require_path(value: str | None, flag: str) -> Path:
    if value is None:
        raise UsageError(f"{flag} is required for this command")
    return Path(value)


def _load_library(path: Path):
    if not path.exists():
        raise UsageError(f"library file {path} does not exist")
    return library.read_library(path)


# ---------------------------------------------------------------------------
# commands

def cmd_enumerate(args, cfg: CliConfig) -> int:
    lib_path = _require_path(args.library, "--library")
    n_max = args.n_states or 3
    machines = []
    topologies = []
    for n in range(1, n_max + 1):
        for topo in enumeration.enumerate_topologies(n):
            topologies.append(topo)
            for seed_index in range(max(args.draws, 1)):
                seed = derive_seed(cfg.seed, "emissions", topo.canonical_key, seed_index)
                try:
                    machines.append(enumeration.assign_emissions(
                        topo, seed,
                        machine_id=f"n{n}-t{len(topologies) - 1:04d}-d{seed_index}"))
                except enumeration.DegenerateTopologyError:
                    print(f"skipping degenerate topology {topo.canonical_key}",
                          file=sys.stderr)
    lib_path.parent.mkdir(parents=True, exist_ok=True)
    library.write_library(machines, lib_path)
    topo_path = lib_path.with_suffix(lib_path.suffix + ".topologies.tsv")
    enumeration.write_topologies(topologies, topo_path)
    print(f"wrote {len(machines)} machines to {lib_path} "
          f"({len(topologies)} topologies)")
    return EXIT_OK


def cmd_stats(args, cfg: CliConfig) -> int:
    machines = _load_library(_require_path(args.library, "--library"))
    out = Path(args.out) / "stats.csv" if args.out else None
    rows = []
    for m in machines:
        s = process_summary(m)
        rows.append([m.machine_id, m.n_states, repr(s.entropy_rate_nats),
                     repr(s.statistical_complexity_nats), repr(s.optimal_accuracy),
                     repr(s.optimal_rate_nats)])
    header = ["machine_id", "n_states", "h_mu", "C_mu", "A_opt", "R_opt"]
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        print(f"wrote {out}")
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    return EXIT_OK


def cmd_curve(args, cfg: CliConfig) -> int:
    machines = _load_library(_require_path(args.library, "--library"))
    out_dir = _require_path(args.out, "--out")
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.machine_id:
        machines = [m for m in machines if m.machine_id == args.machine_id]
        if not machines:
            print(f"machine {args.machine_id!r} not in library", file=sys.stderr)
            return EXIT_RUNTIME
    for m in machines:
        context = build_context(m)
        write_curve_csv(context.curve, out_dir / f"curve_{m.machine_id}.csv")
    print(f"wrote {len(machines)} curve files to {out_dir}")
    return EXIT_OK


def cmd_run(args, cfg: CliConfig) -> int:
    machines = _load_library(_require_path(args.library, "--library"))
    by_id = {m.machine_id: m for m in machines}
    if args.machine_id not in by_id:
        print(f"machine {args.machine_id!r} not in library", file=sys.stderr)
        return EXIT_RUNTIME
    record = run_single(by_id[args.machine_id], args.family, args.size,
                        cfg.protocol, cfg.seed)
    print(record.to_json())
    return EXIT_OK


def cmd_suite(args, cfg: CliConfig) -> int:
    machines = _load_library(_require_path(args.library, "--library"))
    store = _require_path(args.store, "--store")
    store.parent.mkdir(parents=True, exist_ok=True)
    records, skipped = run_suite(machines, cfg.protocol, store, cfg.seed,
                                 families=cfg.families, jobs=cfg.jobs)
    if skipped:
        skip_path = store.with_suffix(store.suffix + ".skipped")
        skip_path.write_text("".join(f"{mid}\n" for mid in skipped))
        print(f"skipped {len(skipped)} zero-rate machines (logged to {skip_path})")
    print(f"store {store} holds {len(records)} records")
    return EXIT_OK


def cmd_report(args, cfg: CliConfig) -> int:
    store = _require_path(args.store, "--store")
    records = read_store(store)
    if not records:
        print("no records", file=sys.stderr)
        return EXIT_RUNTIME
    out_dir = _require_path(args.out, "--out")
    summary = aggregate(records)
    paths = write_summary_csvs(summary, out_dir)
    for family, stats in summary.families.items():
        print(f"{family}: mean distortion {stats.mean_distortion_pct:.2f}% "
              f"(optimized {stats.optimized_mean_distortion_pct:.2f}%), "
              f"mean distance {stats.mean_distance:.4f}")
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


COMMANDS = {
    "enumerate": cmd_enumerate,
    "stats": cmd_stats,
    "curve": cmd_curve,
    "run": cmd_run,
    "suite": cmd_suite,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdfa-bench",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--jobs", type=int, help="worker process cap")
    parser.add_argument("--seed", type=int, help="global seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--library", help="machine library file (JSON lines)")
    parser.add_argument("--store", help="record store file (JSON lines)")
    parser.add_argument("--n-states", type=int, dest="n_states",
                        help="maximum state count for enumerate")
    parser.add_argument("--length", type=int, help="sequence length")
    parser.add_argument("--families", help="comma-separated predictor families")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("enumerate").add_argument("--draws", type=int, default=1,
                                             help="emission draws per topology")
    sub.add_parser("stats")
    curve_p = sub.add_parser("curve")
    curve_p.add_argument("--machine-id")
    run_p = sub.add_parser("run")
    run_p.add_argument("--machine-id", required=True)
    run_p.add_argument("--family", required=True, choices=(*FAMILIES, "oracle"))
    run_p.add_argument("--size", type=int, required=True)
    sub.add_parser("suite")
    sub.add_parser("report")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "draws"):
        args.draws = 1
    try:
        cfg = parse_config(args.config, args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError, library.LibraryParseError,
            library.LibraryValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
