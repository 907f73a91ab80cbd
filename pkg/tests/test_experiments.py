import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noregret import experiments as exp
from noregret.errors import ConfigError, FitError

GRID = [2**k for k in range(10, 17)]


@pytest.mark.parametrize("power", [1.0, 0.5, 1 / 6, 0.25])
def test_fit_recovers_power_laws(power):
    fit = exp.fit_slope([(T, 3.7 * T**power) for T in GRID])
    assert fit.slope == pytest.approx(power, abs=1e-9)
    assert fit.intercept == pytest.approx(math.log(3.7), abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.points[0][0] == pytest.approx(math.log(GRID[0]))


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_fit_exponent_property(power, c, seed):
    fit = exp.fit_slope([(T, c * T**power) for T in GRID])
    assert fit.slope == pytest.approx(power, abs=1e-9)
    noisy = np.random.default_rng(seed).uniform(0.5, 2.0, len(GRID))
    fit = exp.fit_slope([(T, c * T**power * e) for T, e in zip(GRID, noisy)])
    assert 0.0 <= fit.r_squared <= 1.0


def test_fit_errors():
    with pytest.raises(FitError):
        exp.fit_slope([(1, 1), (2, 2), (3, 3)])
    with pytest.raises(FitError):
        exp.fit_slope([(1, 1), (2, 0), (3, 3), (4, 4)])
    fit = exp.fit_slope([(1, 1), (2, 0), (3, 3), (4, 4)], offset=True)
    assert math.isfinite(fit.slope)


def valid_config(**over):
    data = {
        "name": "tiny",
        "game": {"kind": "random", "players": 2, "actions": 3},
        "learners": {"kind": "optimistic", "eta": {"rule": "theorem", "kind": "two_player_opt"}},
        "T_grid": [16, 32, 64, 128],
        "seeds": [0, 1, 2],
        "metrics": ["max_external_regret", "max_swap_regret"],
    }
    data.update(over)
    return data


def test_config_validation_messages():
    text = json.dumps(valid_config(T_grid=[16, 8, 32, 64]), indent=1)
    with pytest.raises(ConfigError) as err:
        exp.parse_config(json.loads(text), text)
    line = next(i for i, s in enumerate(text.splitlines(), 1) if '"T_grid"' in s)
    assert err.value.line == line and str(err.value).startswith(f"line {line}:")
    with pytest.raises(ConfigError, match="at least 4"):
        exp.parse_config(valid_config(T_grid=[16, 32, 64]))
    exp.parse_config(valid_config(T_grid=[16, 32], fit=False))
    with pytest.raises(ConfigError, match="metrics"):
        exp.parse_config(valid_config(metrics=["avg_welfare"]))
    with pytest.raises(ConfigError, match="eta"):
        exp.parse_config(valid_config(learners={"kind": "hedge", "eta": {"rule": "guess"}}))
    with pytest.raises(ConfigError, match="canonical"):
        exp.parse_config(valid_config(game={"kind": "canonical", "name": "chess"}))


def test_config_file_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n "name": "x",\n "game": {\n')
    with pytest.raises(ConfigError) as err:
        exp.load_config(p)
    assert err.value.line is not None


def test_builtins_parse():
    for name in exp.BUILTINS:
        cfg = exp.builtin_config(name)
        assert cfg.name == name
    with pytest.raises(ConfigError):
        exp.builtin_config("thm99")
    thm31 = exp.builtin_config("thm31")
    assert thm31.T_grid == GRID and len(thm31.seeds) >= 10
    g, _ = exp.build_game(thm31.game, 0)
    (cfg,) = set(exp.build_learners(thm31.learners, g, 4096))
    assert cfg.eta == pytest.approx((math.log(10) / 4096) ** (1 / 6))
    labels = [v["game"]["players"] for v in exp.builtin_config("thm51").variants]
    assert labels == [2, 3]


def test_run_experiment_outputs_and_reruns(tmp_path):
    cfg = exp.parse_config(valid_config())
    a = exp.run_experiment(cfg, tmp_path / "a")
    exp.run_experiment(cfg, tmp_path / "b")
    for suffix in ("_cells.csv", ".json"):
        assert (tmp_path / "a" / f"tiny{suffix}").read_bytes() == (tmp_path / "b" / f"tiny{suffix}").read_bytes()
    rows = (tmp_path / "a" / "tiny_cells.csv").read_text().splitlines()
    assert rows[0] == "variant,T,seed,metric,value" and len(rows) == 1 + 4 * 3 * 2
    entry = a["results"]["tiny"]["max_external_regret"]
    assert [r["T"] for r in entry["per_T"]] == [16, 32, 64, 128]
    assert 0 <= entry["fit"]["r_squared"] <= 1


def test_parallel_cells_match_serial(tmp_path):
    cfg = exp.parse_config(valid_config(seeds=[0, 1]))
    exp.run_experiment(cfg, tmp_path / "s", jobs=1)
    exp.run_experiment(cfg, tmp_path / "p", jobs=2)
    assert (tmp_path / "s" / "tiny_cells.csv").read_bytes() == (tmp_path / "p" / "tiny_cells.csv").read_bytes()
    assert (tmp_path / "s" / "tiny.json").read_bytes() == (tmp_path / "p" / "tiny.json").read_bytes()


def test_builtin_rerun_byte_identical(tmp_path):
    cfg = exp.builtin_config("thm41")
    cfg.T_grid = [100, 200, 400, 800]
    exp.run_experiment(cfg, tmp_path / "a")
    exp.run_experiment(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "thm41_cells.csv").read_bytes() == (tmp_path / "b" / "thm41_cells.csv").read_bytes()


def test_nonpositive_cells_are_excluded():
    cfg = exp.parse_config(valid_config(metrics=["max_external_regret"]))
    results = {("", T, s): {"max_external_regret": (-1.0 if s == 0 else float(T))} for T in cfg.T_grid for s in cfg.seeds}
    summary = exp.aggregate(cfg, results)["tiny"]["max_external_regret"]
    assert all(r["excluded"] == 1 and r["used"] == 2 for r in summary["per_T"])
    assert summary["fit"]["slope"] == pytest.approx(1.0)


def test_probe_router():
    T = 10**6
    assert exp.probe_case(T, 0.01) == "invariant_G2"
    assert exp.probe_case(T, 0.5) == "matching_pennies_G1"
    assert exp.probe_case(T, 3.0) == "cooperation_G3"
    with pytest.raises(ConfigError):
        exp.lower_bound_probe(50, 1.0)


def test_probe_middle_regime():
    rep = exp.lower_bound_probe(10**4, 1.0)
    assert rep.case == "matching_pennies_G1"
    assert rep.window_max_regret >= 0.05 * math.sqrt(10**4)


def test_probe_cooperation_regime():
    rep = exp.lower_bound_probe(2000, 4.0)
    assert rep.case == "cooperation_G3"
    assert rep.min_round_loss > 0
    lo, hi = rep.corridor
    assert 4 * math.exp(-8) <= lo and hi <= 0.4


@pytest.mark.slow
def test_probe_small_eta_invariant_game():
    rep = exp.lower_bound_probe(10**6, 0.01)
    assert rep.case == "invariant_G2"
    assert rep.p1_regret >= 10.0
