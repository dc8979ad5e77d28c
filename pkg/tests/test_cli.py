from __future__ import annotations

import csv
import io
import json

from qnetcomp import textformat
from qnetcomp.apps import build_bqc_app, build_scenario2_local
from qnetcomp.cli import formula_checks, main
from qnetcomp.experiments import CSV_COLUMNS, spec_from_ini


def test_formulas_check_passes(capsys):
    assert main(["formulas", "--check"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == len(formula_checks()) == 10
    assert all(line.startswith("PASS") for line in out)


def test_compile_applies_pipeline_and_validates(tmp_path):
    src = tmp_path / "in.qir"
    dst = tmp_path / "out.qir"
    textformat.dump(build_scenario2_local(True, iterations=4), src)
    assert main(["compile", "--strategy", "block-cooperative", "--n", "8", "--in", str(src), "--out", str(dst)]) == 0
    prog = textformat.load(dst)
    assert len(prog.blocks) == 4


def test_compile_hybrid_and_deadline(tmp_path):
    src = tmp_path / "s.qir"
    _, server = build_bqc_app(2, False)
    textformat.dump(server, src)
    dst = tmp_path / "o.qir"
    assert main(["compile", "--strategy", "hybrid+deadline-cooperative", "--m", "100",
                 "--in", str(src), "--out", str(dst)]) == 0
    prog = textformat.load(dst)
    assert prog.blocks[1].deadline is not None


def test_compile_reports_inapplicable_strategy(tmp_path, capsys):
    src = tmp_path / "l.qir"
    textformat.dump(build_scenario2_local(True, iterations=2), src)
    rc = main(["compile", "--strategy", "critical-section", "--in", str(src), "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_simulate_writes_csv_trace_and_config(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    cfg = tmp_path / "c.ini"
    out = tmp_path / "r.csv"
    rc = main(["simulate", "--scenario", "block1", "--n", "2", "--c", "2", "--sweep", "bin_multiple=1,2",
               "--seeds", "2", "--runs", "2", "--no-quantum", "--trace", str(trace),
               "--write-config", str(cfg), "--out", str(out),
               "--strategy", "local=block-cooperative:8"])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 4
    assert {r["strategy"] for r in rows if r["program_role"] == "local"} == {"block-cooperative:8"}
    first = json.loads(trace.read_text().splitlines()[0])
    assert first["kind"] == "start"
    spec = spec_from_ini(cfg.read_text())
    assert spec.seeds == (0, 1) and spec.sweep_values == (1.0, 2.0)


def test_simulate_from_config_to_stdout(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    assert main(["simulate", "--scenario", "critical", "--n", "1", "--seeds", "1", "--runs", "1",
                 "--sweep", "bin_multiple=1", "--write-config", str(cfg), "--out", str(tmp_path / "a.csv")]) == 0
    capsys.readouterr()
    assert main(["simulate", "--config", str(cfg), "--no-quantum"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert {r["program_role"] for r in rows} == {"c1", "others"}


def test_seed_file(tmp_path, capsys):
    seeds = tmp_path / "seeds.txt"
    seeds.write_text("4 7\n")
    assert main(["simulate", "--scenario", "block3", "--n", "1", "--c", "1", "--seeds", str(seeds),
                 "--runs", "1", "--sweep", "bin_multiple=1", "--no-quantum"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[0]["seeds"] == "2"


def test_bad_strategy_exits_with_error(capsys):
    assert main(["simulate", "--scenario", "block1", "--strategy", "pilot=hybrid", "--seeds", "1",
                 "--runs", "1"]) == 2
    assert "no program role" in capsys.readouterr().err
