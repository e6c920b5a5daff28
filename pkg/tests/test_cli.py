"""CLI surface: subcommands, exit codes (0 pass, 1 violation, 2 usage or
config, 3 I/O), and the stress -> check pipeline."""

import pytest

from lftree.cli import main
from lftree.verify import OpRecord, SEARCH, write_trace

STRESS_SMALL = ["stress", "--threads", "1", "--ops", "2000",
                "--order", "5", "--leaf-cap", "8", "--min-size", "3",
                "--range", "64", "--seed", "5"]


def test_stress_then_check_own_trace(tmp_path, capsys):
    trace = str(tmp_path / "run.trace")
    assert main(STRESS_SMALL + ["--trace", trace]) == 0
    out = capsys.readouterr().out
    assert "all checks passed" in out
    assert f"trace written to {trace}" in out

    # a passing stress run's own trace must check clean
    assert main(["check", "--trace", trace]) == 0
    out = capsys.readouterr().out
    assert "2000 records, 0 violations" in out
    assert "all checks passed" in out


def test_single_thread_traces_reproduce_byte_for_byte(tmp_path):
    a = tmp_path / "a.trace"
    b = tmp_path / "b.trace"
    assert main(STRESS_SMALL + ["--trace", str(a)]) == 0
    assert main(STRESS_SMALL + ["--trace", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_check_flags_a_violating_trace(tmp_path, capsys):
    trace = tmp_path / "bad.trace"
    # a search result for a key no insert ever produced
    write_trace(trace, [OpRecord(0, SEARCH, 1, 9, 0, 1, 5)])
    assert main(["check", "--trace", str(trace)]) == 1
    assert "search-result-never-present" in capsys.readouterr().out


def test_check_flags_a_corrupted_trace(tmp_path, capsys):
    trace = tmp_path / "corrupt.trace"
    trace.write_text("0\tSEARCH\t1\t1\t0\t1\t0\nnot a record\n")
    assert main(["check", "--trace", str(trace)]) == 1
    assert "malformed trace" in capsys.readouterr().err


def test_check_missing_file_is_an_io_error(tmp_path, capsys):
    assert main(["check", "--trace", str(tmp_path / "nope.trace")]) == 3
    assert "i/o error" in capsys.readouterr().err


def test_check_progress_window(tmp_path, capsys):
    trace = str(tmp_path / "run.trace")
    assert main(STRESS_SMALL + ["--trace", trace]) == 0
    capsys.readouterr()
    assert main(["check", "--trace", trace, "--window",
                 str(10 ** 12)]) == 0
    assert "progress audit: 0" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    STRESS_SMALL[:1] + ["--threads", "0"],
    ["stress", "--leaf-cap", "32", "--min-size", "20"],
    ["stress", "--mix", "1:2"],
    ["bench", "--duration", "0"],
    ["bench", "--threads", "0,2", "--duration", "0.1"],
], ids=["threads", "min-size", "mix", "duration", "thread-list"])
def test_bad_configuration_exits_2(argv, capsys):
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_subcommand_and_scenario_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["schedules", "no-such-scenario"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_schedules_single_scenario_reports_analytic_count(capsys):
    assert main(["schedules", "begin-race"]) == 0
    out = capsys.readouterr().out
    assert "begin-race: 20 schedules (analytic 20), ok" in out


def test_schedules_seeded_scenario(capsys):
    assert main(["schedules", "help-storm", "--runs", "50",
                 "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "help-storm: 50 schedules (seeded), ok" in out


def test_schedules_bound_limits_exploration(capsys):
    assert main(["schedules", "freeze-race", "--bound", "4"]) == 0
    out = capsys.readouterr().out
    # bounded: branch tree of depth 4 over two threads, plus the drain
    assert "freeze-race: 16 schedules, ok" in out


def test_bench_prints_one_row_per_thread_count(capsys):
    assert main(["bench", "--threads", "1", "--duration", "0.1",
                 "--ops", "500", "--order", "5", "--leaf-cap", "8",
                 "--min-size", "3", "--range", "512"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2  # header plus exactly one row
    assert lines[0].split() == ["threads", "ops", "elapsed", "ops/s"]
    assert lines[1].split()[0] == "1"


def test_selftest_smoke(capsys):
    assert main(["selftest"]) == 0
    assert "selftest passed" in capsys.readouterr().out
