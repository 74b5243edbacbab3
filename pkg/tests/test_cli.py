import json
import os
import subprocess
import sys

import numpy as np
import pytest

from sdtest.cli import EX_DATAERR, EX_REJECT, EX_SOFTWARE, EX_USAGE, dumps, main

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "test_default.json")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_default_run_matches_golden(capsys):
    code, out, _ = run(capsys, "test")
    assert code == 0
    assert out == open(GOLDEN).read()
    doc = json.loads(out)
    assert doc["reject"] is False and doc["n"] == 50
    assert doc["params"] == {"gamma": 0.3, "lambda": 0.0, "beta": 0.3, "alpha": 0.05, "theta0": 0.0, "sigma": 1.0}


def test_far_null_is_rejected(capsys):
    code, out, _ = run(capsys, "test", "--theta0", "5")
    assert code == 0 and json.loads(out)["reject"] is True
    code, _, _ = run(capsys, "test", "--theta0", "5", "--exit-on-reject")
    assert code == EX_REJECT


def test_header_detection_and_csv_output(tmp_path, capsys):
    p = tmp_path / "x.csv"
    p.write_text("0.1\n-0.3\n0.25\n")
    code, out, _ = run(capsys, "test", str(p), "--output", "csv")
    assert code == 0 and out.splitlines()[0].startswith("statistic,")
    p.write_text("obs\n0.1\n-0.3\n0.25\n")
    _, out2, _ = run(capsys, "test", str(p), "--output", "csv")
    assert out2 == out


def test_input_errors(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run(capsys, "test", str(empty))[0] == EX_DATAERR
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\n2.0\nabc\n")
    code, _, err = run(capsys, "test", str(bad))
    assert code == EX_DATAERR and ":3:" in err
    assert run(capsys, "test", str(tmp_path / "missing.csv"))[0] == EX_USAGE


@pytest.mark.parametrize("argv", [
    ["test", "--gamma", "1.5"],
    ["test", "--beta", "-1"],
    ["test", "--alpha", "1"],
    ["test", "--sigma", "0"],
    ["robust", "--diagnostic", "wobble"],
    ["mixture-cdf", "--zeta", "1"],
    ["power"],
])
def test_usage_errors(argv, capsys):
    assert run(capsys, *argv)[0] == EX_USAGE


def test_argparse_errors_use_usage_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EX_USAGE


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["test", "--help"])
    text = capsys.readouterr().out
    assert "default: 0.3" in text and "default: 0.05" in text and "default: 0.0" in text


def test_if2_grid_without_downweighting(capsys):
    code, out, _ = run(capsys, "robust", "--diagnostic", "if2", "--gamma", "0", "--beta", "0",
                       "--y-min", "-4", "--y-max", "4", "--points", "9")
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    y = np.array([float(r[0]) for r in rows])
    v = np.array([float(r[1]) for r in rows])
    assert code == 0 and np.allclose(v, y**2, rtol=1e-14)


def test_if2_grid_shape(capsys):
    _, out, _ = run(capsys, "robust", "--diagnostic", "if2", "--gamma", "0.5", "--beta", "0.5", "--points", "401")
    v = np.array([float(line.split(",")[1]) for line in out.strip().splitlines()[1:]])
    k = int(np.argmax(v))
    assert 0 < k < v.size - 1 and np.allclose(v, v[::-1], rtol=1e-12)
    # one interior maximum on each side of theta0, nothing else
    d = np.sign(np.diff(v[201:]))
    assert np.count_nonzero(np.diff(d[d != 0])) == 1


def test_slope_grid_at_null(capsys):
    _, out, _ = run(capsys, "robust", "--diagnostic", "slope", "--gamma", "0", "--beta", "0",
                    "--y-min", "-1", "--y-max", "1", "--points", "3")
    mid = out.strip().splitlines()[2].split(",")
    assert float(mid[0]) == 0.0 and float(mid[1]) == pytest.approx(-1.0)


@pytest.mark.parametrize("diag", ["pif", "lif", "inflation"])
def test_other_diagnostics_run(diag, capsys):
    code, out, _ = run(capsys, "robust", "--diagnostic", diag, "--points", "5", "--output", "json")
    doc = json.loads(out)
    assert code == 0 and len(doc["value"]) == 5
    if diag == "lif":
        assert doc["value"] == [0, 0, 0, 0, 0]


def test_mixture_queries(capsys):
    _, out, _ = run(capsys, "mixture-cdf", "--zeta", "1", "--x", "3.8414588206941285")
    assert json.loads(out)["rows"][0]["cdf"] == pytest.approx(0.95, abs=1e-12)
    _, out, _ = run(capsys, "mixture-cdf", "--zeta", "1,0.5", "--delta", "1 2", "--quantile", "0.9", "--output", "csv")
    assert out.splitlines()[0] == "q,quantile"


def test_power_commands(capsys):
    _, out, _ = run(capsys, "power", "--theta-star", "1", "--gamma", "0", "--beta", "0", "--target-power", "0.8")
    assert json.loads(out)["n"] == 9
    _, out, _ = run(capsys, "power", "--delta", "3.1622776601683795", "--gamma", "0", "--beta", "0")
    assert json.loads(out)["contiguous_power"] == pytest.approx(0.8854, abs=1e-4)
    _, out, _ = run(capsys, "power", "--theta-star", "0.5", "--n", "40")
    assert 0 < json.loads(out)["power"] < 1


def test_simulate_seed_override(capsys, monkeypatch):
    argv = ["simulate", "--reps", "50", "--betas", "0.5", "--epsilon", "0.1"]
    a = run(capsys, *argv, "--seed", "1")[1]
    assert run(capsys, *argv, "--seed", "1")[1] == a
    monkeypatch.setenv("SDT_SEED", "2")
    b = run(capsys, *argv, "--seed", "1")[1]
    assert b == run(capsys, *argv, "--seed", "2")[1]
    assert json.loads(b)["meta"]["seed"] == 2


def test_tables_command(tmp_path, capsys):
    code, out, _ = run(capsys, "tables", "--which", "contiguous_power", "--out-dir", str(tmp_path))
    assert code == 0
    assert (tmp_path / "contiguous_power.csv").exists() and (tmp_path / "contiguous_power.json").exists()


def test_serialiser():
    assert dumps({"a": 0.1, "b": [1, True, None]}) == '{"a": 0.10000000000000001, "b": [1, true, null]}'
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})


def test_internal_errors_map_to_software_code(capsys, monkeypatch):
    import sdtest.testing

    def boom(*a, **k):
        raise ArithmeticError("fit failed")

    monkeypatch.setattr(sdtest.testing, "run_test", boom)
    assert run(capsys, "test")[0] == EX_SOFTWARE


def test_console_script_is_byte_stable():
    cmd = [sys.executable, "-m", "sdtest.cli", "test"]
    a = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    assert a == b == open(GOLDEN).read()
