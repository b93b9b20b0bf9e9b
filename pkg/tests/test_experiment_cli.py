import csv
from pathlib import Path

import pytest

from contreason import cli
from contreason.curriculum import RunResult, TrainingTrace
from contreason.experiment import (
    RESULTS_HEADER,
    TRACE_HEADER,
    ConfigError,
    ExperimentConfig,
    ReportRow,
    aggregate_seeds,
    build_report,
    parse_config_text,
    parse_seeds,
    read_results_csv,
    read_trace_csv,
    write_results_csv,
    write_trace_csv,
)
from contreason.tasks import data_text


def test_aggregate_single_seed():
    assert aggregate_seeds([0.9]) == (0.9, 0.0)


def test_aggregate_two_seeds():
    mean, std = aggregate_seeds([0.8, 1.0])
    assert mean == pytest.approx(0.9) and std == pytest.approx(0.1414, abs=1e-4)


def test_aggregate_constant():
    assert aggregate_seeds([0.7] * 5)[1] == pytest.approx(0.0, abs=1e-15)


def test_aggregate_needs_values():
    with pytest.raises(ValueError):
        aggregate_seeds([])


def test_report_row_invariants():
    with pytest.raises(ValueError):
        ReportRow("ts", 1, "q", 1.2, 0.0, 1)
    with pytest.raises(ValueError):
        ReportRow("ts", 1, "q", 0.5, 0.0, 0)


def _fake_result(name, seed, values):
    trace = TrainingTrace(["q1", "q2"])
    for stage, (a, b) in enumerate(values, start=1):
        trace.append(stage, stage, {"q1": a, "q2": b})
    return RunResult(name, seed, trace, [{"q1": a, "q2": b} for a, b in values])


def test_report_aggregates_per_stage_and_query():
    results = [_fake_result("ts", 0, [(0.8, 0.1), (1.0, 0.2)]), _fake_result("ts", 1, [(1.0, 0.3), (1.0, 0.4)])]
    rows = build_report(results)
    assert [(r.curriculum, r.stage, r.query) for r in rows] == [("ts", 1, "q1"), ("ts", 1, "q2"), ("ts", 2, "q1"), ("ts", 2, "q2")]
    assert rows[0].mean_sat == 0.9 and rows[0].std_sat == round(0.1414213562, 6) and rows[0].n_seeds == 2


def test_empty_report_is_header_only(tmp_path):
    write_results_csv([], tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == ",".join(RESULTS_HEADER) + "\n"


def test_results_csv_round_trip(tmp_path):
    results = [_fake_result("kc", s, [(0.1 * s + 0.3, 0.123456789)]) for s in range(3)]
    rows = build_report(results)
    write_results_csv(rows, tmp_path / "r.csv")
    assert read_results_csv(tmp_path / "r.csv") == rows
    text = (tmp_path / "r.csv").read_text().splitlines()
    assert text[0] == "curriculum,stage,query,mean_sat,std_sat,n_seeds"
    assert text[2] == "kc,1,q2,0.123457,0.000000,3"


def test_trace_csv_round_trip(tmp_path):
    results = [_fake_result("ts", 0, [(0.5, 0.25), (0.75, 1.0)])]
    write_trace_csv(results, tmp_path / "t.csv")
    rows = read_trace_csv(tmp_path / "t.csv")
    assert rows == [(0, "ts", 1, 1, "q1", 0.5), (0, "ts", 1, 1, "q2", 0.25), (0, "ts", 2, 2, "q1", 0.75), (0, "ts", 2, 2, "q2", 1.0)]
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == ",".join(TRACE_HEADER)


def test_bad_csv_header(tmp_path):
    (tmp_path / "r.csv").write_text("a,b\n")
    with pytest.raises(ValueError):
        read_results_csv(tmp_path / "r.csv")


def test_seeds_parsing():
    assert parse_seeds("3") == [0, 1, 2]
    assert parse_seeds("4, 9") == [4, 9]
    for bad in ("0", "x", "1,y"):
        with pytest.raises(ConfigError):
            parse_seeds(bad)


def test_config_text():
    vals = parse_config_text("task = sf  # comment\n\np = 3\nseeds = 2\ncurricula = kc, ts\n")
    assert vals == {"task": "sf", "p_forall": 3.0, "p_exists": 3.0, "p_kb": 3.0, "seeds": [0, 1], "curricula": ["kc", "ts"]}
    for bad in ("colour = red\n", "epochs\n", "epochs = many\n"):
        with pytest.raises(ConfigError):
            parse_config_text(bad)


def test_experiment_config_validation():
    cfg = ExperimentConfig(task="pet")
    assert cfg.lr == 0.01 and cfg.p_kb == 2.0
    sf = ExperimentConfig(task="sf", curricula=["kc"])
    assert (sf.lr, sf.recall) == (0.005, 0.25)
    assert ExperimentConfig(task="pet", lr=0.5).lr == 0.5
    for bad in (dict(task="babi"), dict(curricula=["bogus"]), dict(task="sf", curricula=["random"]),
                dict(seeds=[]), dict(recall=2.0), dict(jobs=0), dict(epochs=0), dict(p_forall=0.5)):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)


# --- command line ---------------------------------------------------------


def _run(args):
    return cli.main([str(a) for a in args])


def test_run_writes_reports_and_is_byte_identical(tmp_path):
    args = ["run", "--task", "pet", "--curricula", "ts,baseline", "--seeds", "2", "--epochs", "5"]
    assert _run(args + ["--out", tmp_path / "a"]) == 0
    assert _run(args + ["--out", tmp_path / "b"]) == 0
    for name in ("results.csv", "trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = read_results_csv(tmp_path / "a" / "results.csv")
    # 3 stages for ts, 1 for the baseline, 4 queries each, one row per triple
    assert len(rows) == (3 + 1) * 4
    assert len({(r.curriculum, r.stage, r.query) for r in rows}) == len(rows)
    trace = read_trace_csv(tmp_path / "a" / "trace.csv")
    ts_seed0 = [r for r in trace if r[0] == 0 and r[1] == "ts"]
    assert len(ts_seed0) == 3 * 5 * 4
    base = [r for r in trace if r[0] == 0 and r[1] == "baseline"]
    assert len(base) == 15 * 4  # single-stage budget is three stages long
    assert "lr = 0.01" in (tmp_path / "a" / "config.txt").read_text()


def test_run_with_config_file_and_flag_override(tmp_path):
    conf = tmp_path / "exp.conf"
    conf.write_text("task = pet\ncurricula = kc\nseeds = 1\nepochs = 3\nlr = 0.05\n")
    assert _run(["run", "--config", conf, "--epochs", "2", "--out", tmp_path / "o"]) == 0
    assert "epochs = 2" in (tmp_path / "o" / "config.txt").read_text()
    assert "lr = 0.05" in (tmp_path / "o" / "config.txt").read_text()
    trace = read_trace_csv(tmp_path / "o" / "trace.csv")
    assert max(r[3] for r in trace) == 6


def test_parallel_run_matches_serial(tmp_path):
    args = ["run", "--task", "sf", "--curricula", "kc", "--seeds", "2", "--epochs", "3"]
    assert _run(args + ["--out", tmp_path / "s"]) == 0
    assert _run(args + ["--out", tmp_path / "p", "--jobs", "2"]) == 0
    assert (tmp_path / "s" / "results.csv").read_bytes() == (tmp_path / "p" / "results.csv").read_bytes()
    assert len({r.query for r in read_results_csv(tmp_path / "s" / "results.csv")}) == 9


def test_run_bad_config_exit_2(tmp_path, capsys):
    assert _run(["run", "--task", "pet", "--curricula", "nonsense", "--out", tmp_path]) == 2
    assert "unknown curriculum" in capsys.readouterr().err
    assert _run(["run", "--config", tmp_path / "missing.conf"]) == 2


def test_run_unwritable_output_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert _run(["run", "--task", "pet", "--curricula", "kc", "--seeds", "1", "--epochs", "1", "--out", blocker]) == 4


def test_check_shipped_kb(tmp_path, capsys):
    kb = tmp_path / "pet.kb"
    kb.write_text(data_text("pet.kb"))
    cur = tmp_path / "ts.cur"
    cur.write_text(data_text("pet_ts.cur"))
    assert _run(["check", kb, cur, "--task", "pet"]) == 0
    out = capsys.readouterr().out
    assert "8 rules" in out and "3 stages" in out
    assert _run(["check", kb]) == 0


def test_check_unbound_variable(tmp_path, capsys):
    kb = tmp_path / "bad.kb"
    kb.write_text("ok : forall X: p(X)\nbad : forall X: p(Y)\n")
    assert _run(["check", kb]) == 1
    err = capsys.readouterr().err
    assert "bad at 2:17" in err and "unbound variable 'Y'" in err


def test_check_missing_rule_in_curriculum(tmp_path, capsys):
    kb = tmp_path / "pet.kb"
    kb.write_text(data_text("pet.kb"))
    cur = tmp_path / "c.cur"
    cur.write_text("stage 1: birds_fly\nstage 2: dogs_bark\n")
    assert _run(["check", kb, cur]) == 1
    assert "dogs_bark" in capsys.readouterr().err


def test_check_against_task_groundings(tmp_path, capsys):
    kb = tmp_path / "dogs.kb"
    kb.write_text("dogs : forall Dogs: is_bird(Dogs)\n")
    assert _run(["check", kb]) == 0
    assert _run(["check", kb, "--task", "pet"]) == 1
    assert "Dogs" in capsys.readouterr().err


def test_check_syntax_error_and_missing_file(tmp_path, capsys):
    kb = tmp_path / "broken.kb"
    kb.write_text("r : forall X p(X)\n")
    assert _run(["check", kb]) == 1
    assert "1:" in capsys.readouterr().err
    assert _run(["check", tmp_path / "nope.kb"]) == 4


def test_trace_slices(tmp_path, capsys):
    assert _run(["run", "--task", "pet", "--curricula", "ts", "--seeds", "1", "--epochs", "2", "--out", tmp_path]) == 0
    capsys.readouterr()
    assert _run(["trace", tmp_path / "trace.csv", "--stage", "3", "--query", "not(can_fly(Penguins))"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(TRACE_HEADER)
    assert [l.split(",")[3] for l in lines[1:]] == ["5", "6"]
    assert _run(["trace", tmp_path / "missing.csv"]) == 4
    (tmp_path / "junk.csv").write_text("nope\n")
    assert _run(["trace", tmp_path / "junk.csv"]) == 1
