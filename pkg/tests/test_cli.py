import json

import numpy as np

from noregret import dynamics as dyn
from noregret.cli import main
from noregret.games import canonical_game


def write_config(path, **over):
    data = {
        "name": "cli",
        "game": {"kind": "random", "players": 2, "actions": 3},
        "learners": [
            {"kind": "optimistic", "eta": 0.1},
            {"kind": "bm", "eta": {"rule": "fixed", "value": 0.05}},
        ],
        "T_grid": [20, 40, 80, 160],
        "seeds": [0, 1],
        "metrics": ["max_external_regret", "mean_swap_regret"],
    }
    data.update(over)
    path.write_text(json.dumps(data, indent=1))
    return str(path)


def test_experiment_and_simulate(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    assert main(["experiment", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "cli_cells.csv").exists()
    assert "slope=" in capsys.readouterr().out
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "sim"), "--seed", "4"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["seed"] == 4 and summary["T"] == 20
    assert main(["audit", "--trace", str(tmp_path / "sim" / "cli_trace")]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_validation_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", T_grid=[20, 10, 40, 80])
    assert main(["experiment", "--config", cfg]) == 1
    assert "line" in capsys.readouterr().err
    assert main(["experiment", "--config", str(tmp_path / "missing.json")]) == 1


def test_audit_flags_corrupted_trace(tmp_path, capsys):
    tr = dyn.run(canonical_game("matching_pennies_G1"), dyn.LearnerConfig("hedge", 1.0, (0.4, 0.6)), 30)
    tr.losses[5, 0] = np.array([0.9, 0.1])
    dyn.export_trace(tr, tmp_path / "bad")
    assert main(["audit", "--trace", str(tmp_path / "bad")]) == 3
    assert "FAIL losses_match_profile" in capsys.readouterr().out


def test_numerical_exit_code(tmp_path, monkeypatch):
    from noregret import experiments
    from noregret.errors import NumericalError

    def boom(*args, **kwargs):
        raise NumericalError("singular", residual=float("inf"))

    monkeypatch.setattr(experiments, "run_experiment", boom)
    assert main(["experiment", "--config", write_config(tmp_path / "c.json")]) == 2


def test_oracle_and_probe(capsys):
    assert main(["oracle", "--trials", "20"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 2
    assert main(["probe", "--T", "400", "--eta", "4"]) == 0
    assert json.loads(capsys.readouterr().out)["case"] == "cooperation_G3"
