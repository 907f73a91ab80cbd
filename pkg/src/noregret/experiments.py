"""Seeded sweeps over round counts, log-log slope fits, and lower-bound probes."""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from .errors import ConfigError, FitError
from .games import CANONICAL_NAMES, canonical_game, load_game, random_game, smooth_congestion_game
from .learners import ETA_KINDS, theorem_eta

METRICS = (
    "max_external_regret",
    "p1_external_regret",
    "max_swap_regret",
    "mean_swap_regret",
    "window_max_regret",
    "avg_welfare",
    "poa_bound",
)
GAME_KINDS = ("canonical", "random", "smooth", "file")
ETA_RULES = ("fixed", "theorem", "power")
DEFAULT_T_GRID = [2**k for k in range(10, 17)]


# --- slope fitting -----------------------------------------------------------


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    points: list[tuple[float, float]]

    def to_json(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "points": [list(p) for p in self.points],
        }


def fit_slope(points, offset: bool = False) -> SlopeFit:
    """Ordinary least squares of ``ln metric`` on ``ln T``.

    Nonpositive metrics raise :class:`FitError`; with ``offset=True`` they are
    replaced by machine epsilon instead.
    """
    pts = [(float(t), float(v)) for t, v in points]
    if len(pts) < 4:
        raise FitError(f"slope fits need at least 4 points, got {len(pts)}")
    if any(t <= 0 for t, _ in pts):
        raise FitError("round counts must be positive")
    if any(v <= 0 for _, v in pts):
        if not offset:
            raise FitError("nonpositive metric in slope fit")
        eps = np.finfo(float).eps
        pts = [(t, v if v > 0 else eps) for t, v in pts]
    x = np.log([t for t, _ in pts])
    y = np.log([v for _, v in pts])
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0:
        raise FitError("all round counts are equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return SlopeFit(slope, intercept, r2, list(zip(x.tolist(), y.tolist())))


# --- config -------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    name: str
    game: dict
    learners: list[dict]
    T_grid: list[int]
    seeds: list[int]
    metrics: list[str]
    raw: bool = False
    fit: bool = True
    eps: float = 0.1
    variants: list[dict] = field(default_factory=list)
    output: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "game": self.game,
            "learners": self.learners,
            "T_grid": self.T_grid,
            "seeds": self.seeds,
            "metrics": self.metrics,
            "raw": self.raw,
            "fit": self.fit,
            "eps": self.eps,
            "variants": self.variants,
            "output": self.output,
        }


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    m = re.search(rf'"{re.escape(key)}"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _validate_eta(eta, where, text):
    if isinstance(eta, (int, float)):
        if not eta > 0:
            raise ConfigError(f"{where}: eta must be positive", _line_of(text, "eta"))
        return
    if not isinstance(eta, dict) or eta.get("rule") not in ETA_RULES:
        raise ConfigError(f"{where}: eta needs a rule in {ETA_RULES}", _line_of(text, "eta"))
    rule = eta["rule"]
    if rule == "fixed" and not eta.get("value", 0) > 0:
        raise ConfigError(f"{where}: fixed eta needs a positive value", _line_of(text, "value"))
    if rule == "theorem" and eta.get("kind") not in ETA_KINDS:
        raise ConfigError(f"{where}: theorem eta kind must be one of {ETA_KINDS}", _line_of(text, "rule"))
    if rule == "power" and not (eta.get("coef", 1.0) > 0 and "exponent" in eta):
        raise ConfigError(f"{where}: power eta needs coef > 0 and an exponent", _line_of(text, "rule"))


def _validate_game(game, text):
    if not isinstance(game, dict) or game.get("kind") not in GAME_KINDS:
        raise ConfigError(f"game.kind must be one of {GAME_KINDS}", _line_of(text, "game"))
    kind = game["kind"]
    if kind == "canonical" and game.get("name") not in CANONICAL_NAMES:
        raise ConfigError(f"canonical game name must be one of {CANONICAL_NAMES}", _line_of(text, "name"))
    if kind in ("random", "smooth"):
        if int(game.get("players", 0)) < 2:
            raise ConfigError("game.players must be >= 2", _line_of(text, "players"))
        size_key = "actions" if kind == "random" else "resources"
        if int(game.get(size_key, 0)) < (2 if kind == "random" else 1):
            raise ConfigError(f"game.{size_key} is missing or too small", _line_of(text, size_key))
    if kind == "file" and "path" not in game:
        raise ConfigError("file games need a path", _line_of(text, "game"))


def parse_config(data: dict, text: str | None = None) -> ExperimentConfig:
    """Validate a decoded config; ``text`` (the JSON source) locates errors."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", 1)
    for key in ("name", "game", "learners", "T_grid"):
        if key not in data:
            raise ConfigError(f"missing required field {key!r}", 1)
    _validate_game(data["game"], text)
    learners = data["learners"]
    if isinstance(learners, dict):
        learners = [learners]
    if not isinstance(learners, list) or not learners:
        raise ConfigError("learners must be an object or a non-empty list", _line_of(text, "learners"))
    for k, spec in enumerate(learners):
        if spec.get("kind") not in dyn.LEARNER_KINDS:
            raise ConfigError(
                f"learners[{k}].kind must be one of {dyn.LEARNER_KINDS}", _line_of(text, "kind")
            )
        if spec["kind"] != "fixed":
            _validate_eta(spec.get("eta"), f"learners[{k}]", text)
    grid = data["T_grid"]
    if not isinstance(grid, list) or not grid or not all(isinstance(t, int) and t >= 1 for t in grid):
        raise ConfigError("T_grid must be a non-empty list of positive integers", _line_of(text, "T_grid"))
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("T_grid must be strictly increasing", _line_of(text, "T_grid"))
    fit = bool(data.get("fit", True))
    if fit and len(grid) < 4:
        raise ConfigError("slope fits need at least 4 T_grid points", _line_of(text, "T_grid"))
    metrics = data.get("metrics", ["max_external_regret"])
    bad = [mt for mt in metrics if mt not in METRICS]
    if bad:
        raise ConfigError(f"unknown metrics {bad}; choose from {METRICS}", _line_of(text, "metrics"))
    if any(mt in ("avg_welfare", "poa_bound") for mt in metrics) and data["game"]["kind"] != "smooth":
        raise ConfigError("welfare metrics need a smooth game", _line_of(text, "metrics"))
    seeds = data.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be a non-empty list of integers", _line_of(text, "seeds"))
    eps = float(data.get("eps", 0.1))
    if not 0 < eps < 2.0 / 3.0:
        raise ConfigError("eps must lie in (0, 1 - mu) = (0, 2/3)", _line_of(text, "eps"))
    variants = data.get("variants", [])
    for k, var in enumerate(variants):
        if not isinstance(var, dict) or "label" not in var:
            raise ConfigError(f"variants[{k}] needs a label", _line_of(text, "variants"))
        if "game" in var:
            _validate_game({**data["game"], **var["game"]}, text)
    return ExperimentConfig(
        name=str(data["name"]),
        game=data["game"],
        learners=learners,
        T_grid=grid,
        seeds=seeds,
        metrics=list(metrics),
        raw=bool(data.get("raw", False)),
        fit=fit,
        eps=eps,
        variants=variants,
        output=data.get("output", {}),
    )


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return parse_config(data, text)


def _builtin(name, game, learners, metrics, T_grid=None, seeds=None, **extra):
    data = {
        "name": name,
        "game": game,
        "learners": learners,
        "T_grid": T_grid or list(DEFAULT_T_GRID),
        "seeds": seeds if seeds is not None else list(range(10)),
        "metrics": metrics,
    }
    data.update(extra)
    return data


BUILTINS = {
    "thm31": _builtin(
        "thm31",
        {"kind": "random", "players": 2, "actions": 10},
        {"kind": "optimistic", "eta": {"rule": "theorem", "kind": "two_player_opt"}},
        ["max_external_regret"],
    ),
    "thm41": _builtin(
        "thm41",
        {"kind": "canonical", "name": "matching_pennies_G1"},
        {"kind": "hedge", "eta": {"rule": "fixed", "value": 1.0}, "initial": [0.4, 0.6]},
        ["window_max_regret"],
        seeds=[0],
        raw=True,
        variants=[
            {"label": "eta=1"},
            {
                "label": "eta=T^-1/4",
                "learners": {
                    "kind": "hedge",
                    "eta": {"rule": "power", "coef": 1.0, "exponent": -0.25},
                    "initial": [0.4, 0.6],
                },
            },
        ],
    ),
    "thm51": _builtin(
        "thm51",
        {"kind": "random", "players": 2, "actions": 4},
        {"kind": "bm", "eta": {"rule": "theorem", "kind": "bm_swap"}},
        ["max_swap_regret"],
        variants=[{"label": "m=2", "game": {"players": 2}}, {"label": "m=3", "game": {"players": 3}}],
    ),
    "poa": _builtin(
        "poa",
        {"kind": "smooth", "players": 2, "resources": 3},
        {"kind": "bm", "eta": {"rule": "theorem", "kind": "bm_swap"}},
        ["avg_welfare", "poa_bound"],
        T_grid=[2**14],
        seeds=[0],
        fit=False,
        eps=0.1,
    ),
}


def builtin_config(name: str) -> ExperimentConfig:
    if name not in BUILTINS:
        raise ConfigError(f"unknown built-in experiment {name!r}; choose from {sorted(BUILTINS)}")
    return parse_config(copy.deepcopy(BUILTINS[name]))


# --- running ------------------------------------------------------------------


def resolve_eta(eta, n: int, m: int, T: int) -> float:
    if isinstance(eta, (int, float)):
        return float(eta)
    rule = eta["rule"]
    if rule == "fixed":
        return float(eta["value"])
    if rule == "theorem":
        return theorem_eta(eta["kind"], n, m, T)
    return float(eta.get("coef", 1.0)) * T ** float(eta["exponent"])


def build_game(spec: dict, seed: int):
    """Return ``(game, smooth_spec_or_None)``."""
    kind = spec["kind"]
    if kind == "canonical":
        return canonical_game(spec["name"]), None
    if kind == "random":
        return random_game(int(spec["players"]), int(spec["actions"]), seed), None
    if kind == "smooth":
        sm = smooth_congestion_game(int(spec["players"]), int(spec["resources"]), seed, spec.get("costs"))
        return sm.game, sm
    return load_game(spec["path"]), None


def build_learners(specs: list[dict], game, T: int) -> list[dyn.LearnerConfig]:
    m, n = game.num_players, game.num_actions
    if len(specs) == 1:
        specs = specs * m
    out = []
    for s in specs:
        eta = 1.0 if s["kind"] == "fixed" else resolve_eta(s["eta"], n, m, T)
        init = tuple(s["initial"]) if s.get("initial") is not None else None
        out.append(dyn.LearnerConfig(s["kind"], eta, init, s.get("mode", "full")))
    return out


def cell_metrics(trace: dyn.Trace, T: int, metrics, raw: bool, smooth=None, eps: float = 0.1) -> dict:
    m = trace.num_players
    out = {}
    for name in metrics:
        if name == "max_external_regret":
            out[name] = max(dyn.external_regret(trace, i, T, raw) for i in range(m))
        elif name == "p1_external_regret":
            out[name] = dyn.external_regret(trace, 0, T, raw)
        elif name == "max_swap_regret":
            out[name] = max(dyn.swap_regret(trace, i, T, raw)[0] for i in range(m))
        elif name == "mean_swap_regret":
            out[name] = float(np.mean([dyn.swap_regret(trace, i, T, raw)[0] for i in range(m)]))
        elif name == "window_max_regret":
            out[name] = dyn.window_max_regret(trace, T, raw)
        elif name in ("avg_welfare", "poa_bound"):
            avg, bound = dyn.poa_report(trace, smooth, eps)
            out[name] = avg if name == "avg_welfare" else bound
    return out


def run_cell(config: ExperimentConfig, variant: dict | None, T: int, seed: int) -> dict:
    game_spec = dict(config.game)
    learner_specs = config.learners
    if variant:
        game_spec.update(variant.get("game", {}))
        if "learners" in variant:
            ls = variant["learners"]
            learner_specs = [ls] if isinstance(ls, dict) else ls
    game, smooth = build_game(game_spec, seed)
    learners = build_learners(learner_specs, game, T)
    rounds = T + math.isqrt(T) if "window_max_regret" in config.metrics else T
    trace = dyn.run(game, learners, rounds, seed)
    return cell_metrics(trace, T, config.metrics, config.raw, smooth, config.eps)


def _cell_job(args):
    config_json, variant, T, seed = args
    cfg = parse_config(config_json)
    return (variant["label"] if variant else "", T, seed), run_cell(cfg, variant, T, seed)


def aggregate(config: ExperimentConfig, results: dict) -> dict:
    """Per-variant, per-metric means over seeds (nonpositive cells excluded) and fits."""
    labels = [v["label"] for v in config.variants] or [""]
    summary = {}
    for label in labels:
        per_metric = {}
        for metric in config.metrics:
            rows, points = [], []
            for T in config.T_grid:
                vals = [results[(label, T, s)][metric] for s in config.seeds]
                used = [v for v in vals if v > 0]
                mean = float(np.mean(used)) if used else None
                rows.append({"T": T, "mean": mean, "used": len(used), "excluded": len(vals) - len(used)})
                if mean is not None:
                    points.append((T, mean))
            entry = {"per_T": rows}
            if config.fit and metric not in ("poa_bound",):
                try:
                    entry["fit"] = fit_slope(points).to_json()
                except FitError as exc:
                    entry["fit"] = None
                    entry["fit_error"] = str(exc)
            per_metric[metric] = entry
        summary[label or config.name] = per_metric
    return summary


def run_experiment(config: ExperimentConfig, out_dir=None, jobs: int = 1) -> dict:
    """Run every ``(variant, T, seed)`` cell; write ``<name>_cells.csv`` and ``<name>.json``."""
    variants = config.variants or [None]
    cells = [(v, T, s) for v in variants for T in config.T_grid for s in config.seeds]
    results = {}
    if jobs > 1:
        payload = [(config.to_json(), v, T, s) for v, T, s in cells]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, metrics in pool.map(_cell_job, payload):
                results[key] = metrics
    else:
        for v, T, s in cells:
            results[(v["label"] if v else "", T, s)] = run_cell(config, v, T, s)
    summary = {
        "name": config.name,
        "config": config.to_json(),
        "units": "raw" if config.raw else "unit",
        "results": aggregate(config, results),
    }
    out_dir = out_dir or config.output.get("dir")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{config.name}_cells.csv").write_text(cells_csv(results))
        (out / f"{config.name}.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    return summary


def cells_csv(results: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "T", "seed", "metric", "value"])
    for (label, T, seed) in sorted(results):
        for metric, value in sorted(results[(label, T, seed)].items()):
            w.writerow([label, T, seed, metric, repr(float(value))])
    return buf.getvalue()


# --- lower-bound probe ----------------------------------------------------------


@dataclass
class LowerBoundReport:
    case: str
    eta: float
    T: int
    p1_regret: float
    max_regret: float
    window_max_regret: float
    min_round_loss: float
    corridor: tuple[float, float] | None


def probe_case(T: int, eta: float, c0: float = 1.0) -> str:
    """Pick the construction: G2 below ``64 / (c0 sqrt T)``, G3 from 3 up, G1 between."""
    if eta < 64.0 / (c0 * math.sqrt(T)):
        return "invariant_G2"
    if eta >= 3.0:
        return "cooperation_G3"
    return "matching_pennies_G1"


def lower_bound_probe(T: int, eta: float, c0: float = 1.0, case: str | None = None) -> LowerBoundReport:
    """Run both players on vanilla Hedge from (0.4, 0.6) in the matching lower-bound game.

    Regrets are in raw units.  ``corridor`` is ``(min a_t, max a_t)`` for the
    cooperation game, where ``a_t`` is ``x_t`` on even steps and ``1 - x_t`` on odd.
    """
    if T < 100:
        raise ConfigError("lower_bound_probe needs T >= 100")
    case = case or probe_case(T, eta, c0)
    game = canonical_game(case)
    cfg = dyn.LearnerConfig("hedge", eta, (0.4, 0.6))
    trace = dyn.run(game, [cfg, cfg], T + math.isqrt(T))
    regrets = [dyn.external_regret(trace, i, T, raw=True) for i in range(2)]
    corridor = None
    if case == "cooperation_G3":
        a = cooperation_sequence(trace.strategies[:T, 0, 0])
        corridor = (float(a.min()), float(a.max()))
    return LowerBoundReport(
        case=case,
        eta=eta,
        T=T,
        p1_regret=regrets[0],
        max_regret=max(regrets),
        window_max_regret=dyn.window_max_regret(trace, T, raw=True),
        min_round_loss=float(trace.raw_realized()[:T, 0].min()),
        corridor=corridor,
    )


def cooperation_sequence(x_first: np.ndarray) -> np.ndarray:
    """Map player 1's first-action probabilities to the alternating ``a_t`` sequence."""
    a = np.array(x_first, dtype=float)
    a[1::2] = 1.0 - a[1::2]
    return a
