import csv
import io
import json

import pytest

from haldane.cli import run_command


def run_jsonl(capsys, argv):
    code = run_command(argv)
    out = capsys.readouterr().out
    records = [json.loads(line) for line in out.splitlines() if line.strip()]
    return code, records


def strip_clock(records):
    return [{k: v for k, v in rec.items() if k != "wall_clock_seconds"} for rec in records]


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------


def test_unknown_flag_exits_2(capsys):
    assert run_command(["fixation", "--N", "10", "--s", "0", "--trials", "5",
                        "--seed", "1", "--bogus"]) == 2


def test_mutually_exclusive_selection_exits_2(capsys):
    assert run_command(["fixation", "--N", "100", "--s", "0.5", "--b", "0.3",
                        "--paintbox", "deterministic", "--x0", "1",
                        "--trials", "10", "--seed", "1"]) == 2


def test_missing_subcommand_exits_2(capsys):
    assert run_command([]) == 2


def test_bad_domain_value_exits_2(capsys):
    # s outside [0,1) is a configuration error
    assert run_command(["fixation", "--N", "100", "--s", "1.5", "--trials", "10",
                        "--seed", "1"]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")


def test_phases_precondition_exits_2(capsys):
    assert run_command(["phases", "--N", "10000", "--b", "0.25", "--delta", "0.3",
                        "--eps", "0.1", "--trials", "10", "--seed", "1"]) == 2


def test_missing_samples_file_exits_2(capsys):
    assert run_command(["duality", "--N", "10", "--k", "2",
                        "--samples", "/nonexistent/aeq.txt"]) == 2


# ---------------------------------------------------------------------------
# fixation records
# ---------------------------------------------------------------------------


def test_fixation_neutral_record(capsys):
    code, records = run_jsonl(capsys, [
        "fixation", "--N", "100", "--s", "0", "--paintbox", "deterministic",
        "--x0", "1", "--trials", "1000", "--seed", "7"])
    assert code == 0
    (rec,) = records
    assert rec["haldane"] == 0.0
    assert rec["ratio"] is None
    assert rec["N"] == 100 and rec["s"] == 0.0 and rec["x0"] == 1
    assert rec["paintbox"] == "deterministic:1"
    assert rec["trials"] == 1000 and rec["seed"] == 7
    assert rec["version"]
    assert "wall_clock_seconds" in rec


def test_fixation_exponent_resolution(capsys):
    code, records = run_jsonl(capsys, [
        "fixation", "--N", "10000", "--b", "0.25", "--paintbox", "gamma:1",
        "--x0", "1", "--trials", "200", "--seed", "3"])
    assert code == 0
    (rec,) = records
    assert rec["s"] == pytest.approx(0.1, rel=1e-12)
    assert rec["b"] == pytest.approx(0.25, abs=1e-12)
    assert rec["moderately_strong"] is True


def test_same_argv_same_bytes(capsys):
    argv = ["fixation", "--N", "50", "--s", "0.1", "--paintbox", "gamma:1",
            "--x0", "1", "--trials", "2000", "--seed", "11"]
    _, first = run_jsonl(capsys, argv)
    _, second = run_jsonl(capsys, argv)
    a = json.dumps(strip_clock(first), sort_keys=True)
    b = json.dumps(strip_clock(second), sort_keys=True)
    assert a == b


def test_record_config_round_trip(capsys):
    argv = ["fixation", "--N", "200", "--b", "0.3", "--paintbox",
            "two-point:0.5,1.5,0.5", "--x0", "2", "--trials", "500", "--seed", "9"]
    _, (rec,) = run_jsonl(capsys, argv)
    rebuilt = ["fixation", "--N", str(rec["N"]), "--b", repr(rec["b"]),
               "--paintbox", rec["paintbox"], "--x0", str(rec["x0"]),
               "--trials", str(rec["trials"]), "--seed", str(rec["seed"])]
    _, (rec2,) = run_jsonl(capsys, rebuilt)
    for key in ("N", "s", "b", "paintbox", "x0", "trials", "seed", "p_hat"):
        assert rec2[key] == rec[key], key


# ---------------------------------------------------------------------------
# other subcommands
# ---------------------------------------------------------------------------


def test_gw_survival_record(capsys):
    code, records = run_jsonl(capsys, [
        "gw-survival", "--model", "mixed-poisson", "--y", "gamma:1", "--m", "1.1"])
    assert code == 0
    (rec,) = records
    assert rec["phi"] == pytest.approx(1 / 11, abs=1e-9)
    assert rec["haldane"] == pytest.approx(0.0865801, abs=1e-7)
    assert rec["offspring_variance"] == pytest.approx(2.31)
    assert rec["residual"] <= 1e-12


def test_gw_survival_missing_param_exits_2(capsys):
    assert run_command(["gw-survival", "--model", "plain-poisson"]) == 2
    assert run_command(["gw-survival", "--model", "mixed-binomial",
                        "--y", "gamma:1", "--m", "1.1"]) == 2


def test_duality_from_file(capsys, tmp_path):
    path = tmp_path / "aeq.txt"
    path.write_text("2\n2\n")
    code, records = run_jsonl(capsys, [
        "duality", "--N", "4", "--k", "2", "--samples", str(path)])
    assert code == 0
    assert records[0]["duality_fixation"] == pytest.approx(5 / 6)
    assert records[0]["n_samples"] == 2


def test_counterexample_record(capsys):
    code, records = run_jsonl(capsys, [
        "counterexample", "--N", "200", "--gamma", "0.1", "--b", "0.45",
        "--trials", "2000", "--seed", "5"])
    assert code == 0
    (rec,) = records
    assert rec["gamma"] == 0.1
    assert rec["neutral_floor"] == pytest.approx(1 / 200)
    assert isinstance(rec["violation"], bool)


def test_moments_table(capsys):
    code, records = run_jsonl(capsys, [
        "moments", "--paintbox", "gamma:1", "--N", "100", "1000",
        "--p", "2", "--trials", "5000", "--seed", "2"])
    assert code == 0
    assert len(records) == 2
    assert {rec["N"] for rec in records} == {100, 1000}
    for rec in records:
        assert rec["moment_value"] > 0 and rec["moment_stderr"] > 0


def test_sweep_streams_records(capsys):
    code, records = run_jsonl(capsys, [
        "sweep", "--N", "50", "100", "--b", "0.3", "--paintbox", "gamma:1",
        "--x0", "1", "--trials", "2000", "--seed", "13"])
    assert code == 0
    assert [rec["N"] for rec in records] == [50, 100]
    for rec in records:
        assert rec["s"] == pytest.approx(rec["N"] ** -0.3, rel=1e-12)


def test_csv_output(capsys, tmp_path):
    out = tmp_path / "res.csv"
    code = run_command([
        "fixation", "--N", "50", "--s", "0.1", "--paintbox", "gamma:1",
        "--x0", "1", "--trials", "500", "--seed", "4",
        "--format", "csv", "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 1
    assert rows[0]["N"] == "50"
    assert rows[0]["p_hat"] != ""
    assert rows[0]["phi"] == ""  # inapplicable column left empty


def test_jsonl_out_appends(capsys, tmp_path):
    out = tmp_path / "res.jsonl"
    argv = ["fixation", "--N", "20", "--s", "0", "--trials", "100",
            "--seed", "1", "--out", str(out)]
    assert run_command(argv) == 0
    assert run_command(argv) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[0])["p_hat"] == json.loads(lines[1])["p_hat"]


def test_summary_line_on_stderr(capsys):
    run_command(["fixation", "--N", "20", "--s", "0", "--trials", "100",
                 "--seed", "1"])
    captured = capsys.readouterr()
    assert "fixation" in captured.err
    assert "p_hat=" in captured.err


def test_parallelism_env_default(capsys, monkeypatch):
    monkeypatch.setenv("HALDANE_PARALLELISM", "3")
    _, (rec,) = run_jsonl(capsys, ["fixation", "--N", "20", "--s", "0",
                                   "--trials", "50", "--seed", "1"])
    assert rec["parallelism"] == 3
    monkeypatch.setenv("HALDANE_PARALLELISM", "junk")
    _, (rec,) = run_jsonl(capsys, ["fixation", "--N", "20", "--s", "0",
                                   "--trials", "50", "--seed", "1"])
    assert rec["parallelism"] == 1
