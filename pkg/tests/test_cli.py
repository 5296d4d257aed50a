from __future__ import annotations

import json
import subprocess
import sys

import pytest

from reverting import __version__
from reverting.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def doc(capsys, *argv):
    code, out = run(capsys, *argv)
    assert code == 0
    return json.loads(out)


@pytest.fixture
def offspring_file(tmp_path):
    path = tmp_path / "offspring.txt"
    path.write_text("# W(s) = (1 + s^2) / 2\n0 1/2\n\n2 0.5  # two children\n", encoding="utf-8")
    return str(path)


def test_clock_pmf(capsys):
    d = doc(capsys, "clock", "--n", "4", "--mode", "pmf")
    assert set(d) == {"meta", "params", "result"}
    assert d["result"]["pmf"] == pytest.approx({"1": 1 / 3, "2": 0.5, "3": 1 / 6})
    assert d["result"]["exact"] is True
    assert d["meta"]["version"] == __version__
    assert d["meta"]["seed"] == 0


def test_occasional_moments(capsys):
    d = doc(capsys, "occasional", "--n", "3", "--q", "0.5", "--mode", "moments")
    assert d["result"]["mean"] == 1.75


@pytest.mark.parametrize(
    "argv, key",
    [
        (("clock", "--n", "200", "--mode", "clt"), "ks"),
        (("clock", "--n", "50", "--law", "power:-2", "--mode", "moments"), "variance"),
        (("walk", "--n", "6", "--mode", "moments"), "variance"),
        (("walk", "--n", "6", "--mode", "cf", "--theta", "0.1,0.2"), "cf"),
        (("walk", "--n", "30", "--mode", "pmf"), "pmf"),
        (("integral", "--n", "100", "--mode", "variance"), "var_M"),
        (("integral", "--n", "10", "--mode", "covariance:4"), "covariance"),
        (("integral", "--n", "40", "--mode", "simulate", "--samples", "500"), "max_increment"),
        (("occasional", "--n", "10", "--q", "1/3", "--mode", "gf:0.5,0.3"), "residual"),
        (("occasional", "--n", "100", "--q", "0.25", "--mode", "dobrushin"), "alpha"),
        (("occasional", "--n", "1", "--q", "0.5", "--mode", "martingale", "--epochs", "3", "--samples", "200"), "increments"),
    ],
)
def test_modes(capsys, argv, key):
    assert key in doc(capsys, *argv)["result"]


def test_weights_file(capsys, tmp_path):
    path = tmp_path / "w.txt"
    path.write_text("# alpha_k\n1\n2\n3\n", encoding="utf-8")
    d = doc(capsys, "clock", "--n", "4", "--law", f"weights:{path}", "--mode", "pmf")
    assert d["result"]["pmf"] == pytest.approx({"1": 1 / 6, "2": 0.5, "3": 1 / 3})


def test_branching(capsys, offspring_file):
    d = doc(capsys, "branching", "--n", "3", "--offspring", offspring_file, "--mode", "extinction")
    assert d["result"]["extinction"] == 9 / 16
    d = doc(capsys, "branching", "--n", "3", "--offspring", offspring_file, "--mode", "pgf:1")
    assert d["result"]["pgf"] == 1
    d = doc(capsys, "branching", "--n", "3", "--offspring", offspring_file, "--mode", "simulate", "--samples", "2000")
    assert abs(d["result"]["extinct_fraction"] - 9 / 16) < 0.05


def test_simulation_is_reproducible_and_thread_free(capsys):
    base = ("clock", "--n", "30", "--mode", "simulate", "--samples", "150000", "--seed", "9")
    _, a = run(capsys, *base)
    _, b = run(capsys, *base)
    _, c = run(capsys, *base, "--threads", "3")
    assert a == b
    assert json.loads(a)["result"] == json.loads(c)["result"]
    _, d = run(capsys, "clock", "--n", "30", "--mode", "simulate", "--samples", "150000", "--seed", "10")
    assert json.loads(a)["result"] != json.loads(d)["result"]


def test_env_seed(capsys, monkeypatch):
    monkeypatch.setenv("REVERT_SEED", "77")
    assert doc(capsys, "walk", "--n", "5", "--mode", "simulate", "--samples", "10")["meta"]["seed"] == 77


def test_csv_and_out(capsys, tmp_path):
    code, out = run(capsys, "clock", "--n", "4", "--format", "csv")
    assert code == 0
    assert out.splitlines()[0] == "value,probability,exact"
    assert out.splitlines()[1].endswith("1/3")
    target = tmp_path / "out.json"
    code, out = run(capsys, "integral", "--n", "5", "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["params"] == {"n": 5}
    code, out = run(capsys, "integral", "--n", "5", "--format", "csv")
    assert "var_M" in out


def test_verify_suite(capsys):
    code, out = run(capsys, "verify", "--suite", "branching")
    assert code == 0
    result = json.loads(out)["result"]
    assert result["passed"] and result["failures"] == []


def test_verify_failure_exit_code(capsys, monkeypatch):
    from reverting import checks

    monkeypatch.setitem(checks.SUITES, "branching", [("always fails", lambda: (False, "forced"))])
    code, out = run(capsys, "verify", "--suite", "branching")
    assert code == 1
    assert json.loads(out)["result"]["failures"][0]["detail"] == "forced"


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["clock", "--n", "4", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2
    assert main(["clock", "--n", "4", "--law", "cubic"]) == 2
    assert main(["occasional", "--n", "4", "--q", "2"]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "reverting", "clock", "--n", "3"], capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["result"]["pmf"] == {"1": 0.5, "2": 0.5}
