import json
import subprocess
import sys

import pytest

from resalloc.cli import main


def meta(text):
    out = {}
    for line in text.splitlines():
        if line.startswith("# "):
            k, v = line[2:].split(": ", 1)
            out[k] = json.loads(v)
    return out


def rows(text):
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    head = lines[0].split("\t")
    return [dict(zip(head, l.split("\t"))) for l in lines[1:]]


def test_fixed_point_output(capsys):
    assert main(["fixed-point", "fig1a", "--gamma0", "0", "--damping", "0.5"]) == 0
    out = capsys.readouterr().out
    m = meta(out)
    assert m["decomposable"] and m["certified"]
    assert m["gamma_star"][0] == pytest.approx(269.555, rel=0.01)
    assert len(rows(out)) == 51


def test_single_iteration(capsys):
    assert main(["fixed-point", "--scenario", "fig2", "--max-iter", "1"]) == 0
    m = meta(capsys.readouterr().out)
    assert m["k_star"] == 1


def test_solve_relaxed(capsys):
    assert main(["solve-relaxed", "--scenario", "fig1b", "--gamma", "0"]) == 0
    out = capsys.readouterr().out
    assert rows(out)


def test_simulate_writes_file(tmp_path):
    path = tmp_path / "sim.tsv"
    assert main(["simulate", "--scenario", "fig1b", "--policy", "random", "--h", "1",
                 "--horizon", "20", "--reps-max", "4", "--out", str(path)]) == 0
    text = path.read_text()
    assert meta(text)["command"] == "simulate" and len(rows(text)) == 1


@pytest.mark.parametrize("argv", [
    ["simulate", "--scenario", "fig1b", "--policy", "random"],          # no h
    ["fixed-point", "no_such_scenario"],
    ["fixed-point", "fig1a", "--damping", "2"],
    ["fixed-point", "fig1a", "--gamma0", "-1"],
    ["simulate", "--scenario", "fig1b", "--policy", "greedy", "--h", "1"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_bad_scenario_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"pools": []}')
    assert main(["fixed-point", str(p)]) == 2


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "resalloc.cli", "--version"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and r.stdout.strip()
