import json
import subprocess
import sys

import pytest

from mcerr.cli import dumps, main


def run(*args, stdin=None, cwd=None, env=None):
    return subprocess.run(
        [sys.executable, "-m", "mcerr", *args],
        input=stdin, capture_output=True, text=True, cwd=cwd, env=env,
    )


def test_estimate_counterexample_file(tmp_path, capsys):
    f = tmp_path / "w.txt"
    f.write_text("# weights\n0\n0\n\n1\n1\n")
    assert main(["estimate", "--input", str(f)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["e1"] == 0.5
    assert out["e2"] == pytest.approx(0.0833333333333333, rel=1e-14)
    assert out["e4_hat"] == 0.0
    assert out["e4_unbiased"] == pytest.approx(-1 / 288, abs=1e-15)
    assert out["flags"] == []
    assert list(out) == ["n", "e1", "e2", "e4_unbiased", "e4_hat", "first_order_error",
                         "second_order_error", "flags"]


def test_estimate_single_weight(tmp_path, capsys):
    f = tmp_path / "w.txt"
    f.write_text("5\n")
    assert main(["estimate", "--input", str(f)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["e1"] == 5.0 and out["e2"] is None
    assert "e2_undefined" in out["flags"]


def test_estimate_stdin():
    res = run("estimate", "--input", "-", stdin="1\n2\n3\n4\n")
    assert res.returncode == 0
    out = json.loads(res.stdout)
    assert out["e4_hat"] == pytest.approx(1 / 6, rel=1e-14)
    assert out["e4_unbiased"] == pytest.approx(11 / 288, rel=1e-14)


@pytest.mark.parametrize("body,needle", [("1\nabc\n", "line 2"), ("1\nnan\n", "line 2"), ("", "no weights"),
                                         ("# only comments\n\n", "no weights")])
def test_estimate_bad_input(tmp_path, capsys, body, needle):
    f = tmp_path / "w.txt"
    f.write_text(body)
    assert main(["estimate", "--input", str(f)]) == 2
    assert needle in capsys.readouterr().err


def test_estimate_missing_file(tmp_path, capsys):
    assert main(["estimate", "--input", str(tmp_path / "nope.txt")]) == 2


def test_json_number_format():
    assert dumps(0.1) == "0.10000000000000001"
    assert dumps(5.0) == "5.0"
    assert dumps(1 / 3) == "0.33333333333333331"
    assert dumps(1e-300) == "1e-300"
    assert dumps(float("inf")) == "null"
    assert json.loads(dumps({"a": [1.5, 2], "b": None, "c": True, "d": "x"})) == {
        "a": [1.5, 2], "b": None, "c": True, "d": "x"}


def test_counterexample_cli(capsys):
    assert main(["counterexample", "--n", "4", "--b", "0.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["a"] == 0.25
    assert out["threshold"] == 0.225
    assert out["e4"] == pytest.approx(-0.00347222222222222, rel=1e-14)
    assert out["e4_hat"] == 0.0
    assert out["negative"] is True


def test_converge_cli(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert main(["converge", "--dist", "power:-0.1", "--n", "10000", "--seed", "42",
                 "--stride", "10", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#") and "spec=power:-0.1" in lines[0] and "seed=42" in lines[0]
    assert lines[1] == "n,e1,e2,e4hat,err1,err2"
    assert len(lines) - 2 == 1000 == summary["rows"]
    assert summary["slope_e2"] == pytest.approx(-1, abs=0.15)
    assert summary["slope_e4hat"] == pytest.approx(-3, abs=0.4)


def test_converge_json(capsys):
    assert main(["converge", "--dist", "uniform", "--n", "40", "--stride", "10", "--format", "json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n"] == [10, 20, 30, 40]


@pytest.mark.parametrize("args", [
    ["converge", "--dist", "power:0.5"],
    ["converge", "--dist", "power:-1.2"],
    ["converge", "--dist", "banana"],
    ["converge", "--dist", "uniform", "--n", "3"],
    ["converge", "--dist", "uniform", "--stride", "0"],
    ["ensemble", "--dist", "uniform", "--n", "2"],
    ["ensemble", "--dist", "uniform", "--n", "10", "--replicas", "10"],
    ["counterexample", "--n", "3"],
    ["counterexample", "--b", "1.5"],
    ["stability", "--n", "2"],
    [],
])
def test_usage_errors_exit_2(args, capsys):
    try:
        code = main(args)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_invalid_spec_rejected_before_output(tmp_path):
    res = run("converge", "--dist", "power:0.3", "--out", "t.csv", cwd=tmp_path)
    assert res.returncode == 2
    assert "(-1, 0]" in res.stderr
    assert not (tmp_path / "t.csv").exists()


def test_ensemble_cli_files(tmp_path, capsys):
    prefix = tmp_path / "ens"
    assert main(["ensemble", "--dist", "uniform", "--n", "10", "--replicas", "1000",
                 "--seed", "7", "--bins", "20", "--out", str(prefix)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["replicas"] == 1000 and summary["spec"] == "uniform"
    for name in ("e1", "e2"):
        lines = (tmp_path / f"ens_{name}.csv").read_text().splitlines()
        assert lines[0].startswith("#") and "seed=7" in lines[0]
        assert lines[1] == "bin_lo,bin_hi,count,density,overlay"
        assert len(lines) == 22
    assert json.loads((tmp_path / "ens_summary.json").read_text()) == summary


def test_output_dir_env(tmp_path):
    import os

    env = dict(os.environ, MCERR_OUTPUT_DIR=str(tmp_path / "outdir"))
    res = run("converge", "--dist", "exp", "--n", "100", "--out", "t.csv", cwd=tmp_path, env=env)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "outdir" / "t.csv").exists()
    assert not (tmp_path / "t.csv").exists()


def test_stability_cli(capsys):
    assert main(["stability", "--offset", "1e8", "--n", "1000", "--seed", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rel_dev"]["accumulator"]["e2"] < 1e-6
    assert out["rel_dev"]["naive"]["e2"] > 1e-2


def test_console_script_help():
    res = run("--help")
    assert res.returncode == 0
    for sub in ("estimate", "converge", "ensemble", "counterexample", "stability"):
        assert sub in res.stdout
