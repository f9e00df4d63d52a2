import csv
import json

import pytest

from pdfa_bench import cli, library
from pdfa_bench.machine import biased_coin, even_process, golden_mean


@pytest.fixture()
def lib_path(tmp_path):
    path = tmp_path / "lib.jsonl"
    library.write_library([even_process(0.4), golden_mean(0.7), biased_coin(0.8)],
                          path)
    return path


@pytest.fixture()
def fast_config(tmp_path):
    path = tmp_path / "bench.ini"
    path.write_text(
        "[protocol]\n"
        "length = 600\n"
        "seed = 3\n"
        "[glm]\n"
        "sizes = 1 2\n"
        "[reservoir]\n"
        "sizes = 4\n"
        "[lstm]\n"
        "sizes = 2\n"
        "epochs = 3\n"
    )
    return path


class TestConfigParsing:
    def test_missing_config_file(self):
        assert cli.main(["--config", "/nonexistent.ini", "stats"]) == cli.EXIT_USAGE

    def test_unknown_section_rejected(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[transformer]\nsizes = 1\n")
        assert cli.main(["--config", str(p), "stats"]) == cli.EXIT_USAGE

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[protocol]\nwarmup = 10\n")
        assert cli.main(["--config", str(p), "stats"]) == cli.EXIT_USAGE

    def test_bad_value_rejected(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[protocol]\nlength = soon\n")
        assert cli.main(["--config", str(p), "stats"]) == cli.EXIT_USAGE

    def test_unknown_family_rejected(self, lib_path):
        code = cli.main(["--library", str(lib_path), "--families", "svm", "stats"])
        assert code == cli.EXIT_USAGE

    def test_flag_overrides_config(self, tmp_path, fast_config):
        import argparse
        ns = argparse.Namespace(length=900, seed=None, jobs=None, families=None)
        cfg = cli.parse_config(str(fast_config), ns)
        assert cfg.protocol.sequence_length == 900  # flag beats file's 600
        assert cfg.seed == 3  # file beats default
        assert cfg.protocol.glm_orders == (1, 2)

    def test_defaults_without_config(self):
        import argparse
        ns = argparse.Namespace(length=None, seed=None, jobs=None, families=None)
        cfg = cli.parse_config(None, ns)
        assert cfg.protocol.sequence_length == 5000
        assert cfg.seed == 0
        assert cfg.families == ("glm", "reservoir", "lstm")


class TestEnumerateCommand:
    def test_writes_library_and_topologies(self, tmp_path, capsys):
        lib = tmp_path / "machines.jsonl"
        code = cli.main(["--library", str(lib), "--n-states", "2", "enumerate"])
        assert code == cli.EXIT_OK
        machines = library.read_library(lib)
        assert len(machines) == 3 + 7  # one draw per topology, sizes 1 and 2
        topo_file = tmp_path / "machines.jsonl.topologies.tsv"
        assert topo_file.exists()
        assert len(topo_file.read_text().splitlines()) == 10
        assert "wrote 10 machines" in capsys.readouterr().out

    def test_multiple_draws(self, tmp_path):
        lib = tmp_path / "machines.jsonl"
        code = cli.main(["--library", str(lib), "--n-states", "1",
                         "enumerate", "--draws", "3"])
        assert code == cli.EXIT_OK
        assert len(library.read_library(lib)) == 9

    def test_requires_library_flag(self):
        assert cli.main(["enumerate"]) == cli.EXIT_USAGE

    def test_deterministic_output(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        cli.main(["--library", str(a), "--n-states", "2", "enumerate"])
        cli.main(["--library", str(b), "--n-states", "2", "enumerate"])
        assert a.read_bytes() == b.read_bytes()


class TestStatsCommand:
    def test_stdout_table(self, lib_path, capsys):
        assert cli.main(["--library", str(lib_path), "stats"]) == cli.EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "machine_id,n_states,h_mu,C_mu,A_opt,R_opt"
        assert len(out) == 4
        row = dict(zip(out[0].split(","), out[1].split(",")))
        assert float(row["A_opt"]) == pytest.approx(5 / 7)

    def test_csv_file(self, lib_path, tmp_path):
        out_dir = tmp_path / "out"
        out_dir.mkdir()
        code = cli.main(["--library", str(lib_path), "--out", str(out_dir), "stats"])
        assert code == cli.EXIT_OK
        with (out_dir / "stats.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3
        coin = next(r for r in rows if float(r["R_opt"]) == 0.0)
        assert float(coin["C_mu"]) == 0.0

    def test_missing_library_file(self, tmp_path):
        code = cli.main(["--library", str(tmp_path / "nope.jsonl"), "stats"])
        assert code == cli.EXIT_USAGE


class TestCurveCommand:
    def test_writes_per_machine_files(self, lib_path, tmp_path):
        out_dir = tmp_path / "curves"
        code = cli.main(["--library", str(lib_path), "--out", str(out_dir), "curve"])
        assert code == cli.EXIT_OK
        files = sorted(out_dir.glob("curve_*.csv"))
        assert len(files) == 3
        header = files[0].read_text().splitlines()[0]
        assert header == "beta,rate_nats,accuracy,kind"

    def test_single_machine_filter(self, lib_path, tmp_path):
        out_dir = tmp_path / "curves"
        mid = even_process(0.4).machine_id
        code = cli.main(["--library", str(lib_path), "--out", str(out_dir),
                         "curve", "--machine-id", mid])
        assert code == cli.EXIT_OK
        assert [p.name for p in out_dir.glob("*.csv")] == [f"curve_{mid}.csv"]

    def test_unknown_machine_id(self, lib_path, tmp_path):
        code = cli.main(["--library", str(lib_path), "--out", str(tmp_path),
                         "curve", "--machine-id", "ghost"])
        assert code == cli.EXIT_RUNTIME


class TestRunCommand:
    def test_prints_record_json(self, lib_path, fast_config, capsys):
        mid = even_process(0.4).machine_id
        code = cli.main(["--config", str(fast_config), "--library", str(lib_path),
                         "run", "--machine-id", mid, "--family", "glm",
                         "--size", "2"])
        assert code == cli.EXIT_OK
        record = json.loads(capsys.readouterr().out)
        assert record["machine_id"] == mid
        assert record["family"] == "glm"
        assert record["size"] == 2
        assert not record["failed"]

    def test_unknown_machine(self, lib_path):
        code = cli.main(["--library", str(lib_path), "run", "--machine-id", "ghost",
                         "--family", "glm", "--size", "1"])
        assert code == cli.EXIT_RUNTIME


class TestSuiteAndReport:
    def test_end_to_end(self, lib_path, fast_config, tmp_path, capsys):
        store = tmp_path / "store.jsonl"
        code = cli.main(["--config", str(fast_config), "--library", str(lib_path),
                         "--store", str(store), "--families", "glm", "suite"])
        assert code == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "skipped 1 zero-rate machines" in out
        skip_file = tmp_path / "store.jsonl.skipped"
        assert skip_file.read_text().strip() == biased_coin(0.8).machine_id

        out_dir = tmp_path / "report"
        code = cli.main(["--store", str(store), "--out", str(out_dir), "report"])
        assert code == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "glm:" in out
        assert (out_dir / "family_stats.csv").exists()

    def test_suite_rerun_is_stable(self, lib_path, fast_config, tmp_path):
        s1, s2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for s in (s1, s2):
            cli.main(["--config", str(fast_config), "--library", str(lib_path),
                      "--store", str(s), "--families", "glm", "suite"])
        assert s1.read_bytes() == s2.read_bytes()

    def test_report_empty_store(self, tmp_path):
        store = tmp_path / "empty.jsonl"
        store.write_text("")
        code = cli.main(["--store", str(store), "--out", str(tmp_path / "r"),
                         "report"])
        assert code == cli.EXIT_RUNTIME

    def test_suite_requires_store(self, lib_path):
        assert cli.main(["--library", str(lib_path), "suite"]) == cli.EXIT_USAGE
