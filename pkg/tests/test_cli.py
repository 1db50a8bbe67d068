import json
import subprocess
import sys

import numpy as np
import pytest

from morsdp.cli import run
from morsdp.core import dump_model
from morsdp.instances import random_absorbing_mdp, random_mdp, random_pomdp

COMMANDS = ["solve", "solve-inf", "solve-pomdp", "reduce", "oracle", "bandit", "validate"]


def write(tmp_path, name, model):
    path = tmp_path / name
    path.write_text(dump_model(model) + "\n")
    return str(path)


@pytest.fixture
def mdp_file(tmp_path):
    return write(tmp_path, "m.json", random_mdp(np.random.default_rng(0), 3, 2, 2, integer_costs=True))


@pytest.fixture
def pomdp_file(tmp_path):
    return write(tmp_path, "p.json", random_pomdp(np.random.default_rng(1), 2, 2, 2, 2))


def output(capsys):
    return json.loads(capsys.readouterr().out)


def test_bandit_check(capsys):
    assert run(["bandit", "--mu", "1", "--horizon", "2", "--grid", "5", "--check"]) == 0
    assert output(capsys)["value"] == 0.8125


def test_bandit_check_fails_off_grid(capsys):
    assert run(["bandit", "--mu", "0.6", "--horizon", "2", "--grid", "3", "--check"]) == 1
    assert "check-failed" in capsys.readouterr().err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "morsdp", "bandit", "--check"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["value"] == 0.8125


def test_validate(mdp_file, capsys):
    assert run(["validate", mdp_file]) == 0
    doc = output(capsys)
    assert doc["kind"] == "mdp" and doc["states"] == 3


def test_validate_bad_row(tmp_path, capsys):
    doc = json.loads(dump_model(random_mdp(np.random.default_rng(0), 2, 2, 1)))
    doc["transitions"][0][3] += 0.25  # row (x0, a0) no longer sums to one
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert run(["validate", str(path)]) == 2
    assert capsys.readouterr().err == "code: stochasticity-error: row P(.|'x0';'a0') sums to 1.25\n"


def test_missing_file(capsys):
    assert run(["validate", "/nonexistent/model.json"]) == 2


def test_budget_error(mdp_file, capsys):
    assert run(["solve", mdp_file, "--horizon", "6", "--budget-states", "5"]) == 3
    assert "budget" in capsys.readouterr().err


def test_wrong_kind(mdp_file, capsys):
    assert run(["solve-pomdp", mdp_file, "--horizon", "2"]) == 2


def test_solve_matches_oracle(mdp_file, capsys):
    assert run(["solve", mdp_file, "--horizon", "2"]) == 0
    v = output(capsys)["value"]
    assert run(["oracle", mdp_file, "--horizon", "2"]) == 0
    ref = output(capsys)
    assert abs(v - ref["value"]) <= 1e-9 * max(1, abs(v))
    assert abs(ref["value_markov"] - ref["value"]) <= 1e-9 * max(1, abs(v))


def test_solve_pomdp_matches_oracle(pomdp_file, capsys):
    assert run(["solve-pomdp", pomdp_file, "--horizon", "2", "--theta0", "0.3,0.7"]) == 0
    v = output(capsys)["value"]
    assert run(["oracle", pomdp_file, "--horizon", "2", "--theta0", "0.3,0.7"]) == 0
    assert abs(v - output(capsys)["value"]) <= 1e-9 * abs(v)


def test_reruns_are_byte_identical(pomdp_file, tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"out{i}.json"
        assert run(["solve-pomdp", pomdp_file, "--horizon", "2", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_reduce_and_dump_layers(pomdp_file, tmp_path, capsys):
    layers = tmp_path / "layers.csv"
    assert run(["solve-pomdp", pomdp_file, "--horizon", "2", "--dump-layers", str(layers)]) == 0
    assert layers.read_text().splitlines()[0] == "stage,states,pairs,successors"
    capsys.readouterr()
    assert run(["reduce", pomdp_file, "--horizon", "2"]) == 0
    assert output(capsys)["states"][0] == "i0"


def test_csv_format(mdp_file, capsys):
    assert run(["solve", mdp_file, "--horizon", "2", "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("stage,x,")


def test_solve_inf(tmp_path, capsys):
    path = write(tmp_path, "a.json", random_absorbing_mdp(np.random.default_rng(2), beta=0.5))
    assert run(["solve-inf", path, "--tol", "1e-6"]) == 0
    doc = output(capsys)
    lo, hi = doc["bracket"]
    assert 0 <= hi - lo <= 1e-6


@pytest.mark.parametrize("cmd", COMMANDS)
def test_help(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        run([cmd, "--help"])
    assert exc.value.code == 0 and "usage" in capsys.readouterr().out


def test_unknown_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["bandit", "--no-such-flag"])
    assert exc.value.code == 2
