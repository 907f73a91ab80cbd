"""Simultaneous-move repeated play and regret accounting over recorded traces.

All regrets are computed from expected (full-information) losses.  Traces
store loss vectors in [0, 1]; pass ``raw=True`` to the diagnostics to get
values in the game's native units (a factor 2 for games stored on [-1, 1]).
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import learners as lrn
from . import swap as sw
from .errors import CapacityError, ParameterError, StructuralError
from .games import Game, SmoothGameSpec, as_strategy, contract_losses

TRACE_SCHEMA = "noregret.trace/1"
LEARNER_KINDS = ("hedge", "optimistic", "bm", "bm_wrapper", "meta", "fixed")
KL_FLOOR = 1e-300


@dataclass(frozen=True)
class LearnerConfig:
    """Per-player algorithm choice.

    ``eta`` is expressed in the game's native loss units: on a game stored in
    [-1, 1] the learner, which sees ``(v + 1) / 2``, runs with ``2 * eta`` so
    its trajectory matches Hedge run directly on the raw losses.
    For ``bm_wrapper`` ``eta`` is the cap on every restart's rate.
    """

    kind: str
    eta: float = 0.1
    initial: tuple[float, ...] | None = None
    mode: str = "full"

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ParameterError(f"learner kind must be one of {LEARNER_KINDS}, got {self.kind!r}")
        if self.kind != "fixed" and not self.eta > 0:
            raise ParameterError(f"learning rate must be positive, got {self.eta!r}")
        if self.initial is not None:
            object.__setattr__(self, "initial", tuple(float(v) for v in self.initial))

    def to_json(self) -> dict:
        return asdict(self)


class _Player:
    """Uniform step interface over the different learner states."""

    def __init__(self, cfg: LearnerConfig, n: int, eta: float):
        self.cfg = cfg
        self.kind = cfg.kind
        if cfg.kind in ("hedge", "optimistic"):
            variant = "vanilla" if cfg.kind == "hedge" else "optimistic"
            self.state = lrn.hedge_init(n, eta, variant, cfg.initial)
        elif cfg.kind == "bm":
            self.state = sw.bm_init(n, eta)
        elif cfg.kind == "bm_wrapper":
            self.state = lrn.wrapper_init(n, eta)
        elif cfg.kind == "meta":
            self.state = sw.meta_init(n, eta, cfg.mode)
        else:
            self.state = None
            self._fixed = as_strategy(cfg.initial if cfg.initial is not None else np.full(n, 1.0 / n), n)

    @property
    def strategy(self) -> np.ndarray:
        return self._fixed if self.state is None else self.state.strategy

    @property
    def log_strategy(self):
        return getattr(self.state, "log_strategy", None)

    def step(self, loss: np.ndarray) -> None:
        k = self.kind
        if k in ("hedge", "optimistic"):
            self.state = lrn.hedge_step(self.state, loss)
        elif k == "bm":
            self.state, _ = sw.bm_step(self.state, loss)
        elif k == "bm_wrapper":
            self.state, _ = lrn.wrapper_step(self.state, loss)
        elif k == "meta":
            self.state, _ = sw.meta_step(self.state, loss)


@dataclass(eq=False)
class Trace:
    """Every round of a run; diagnostics are computed from it after the fact.

    ``strategies[t - 1, i]`` is player ``i``'s strategy in round ``t`` and
    ``losses[t - 1, i]`` the unit-scale loss vector it observed.
    ``final_strategies`` holds ``x^{T+1}``.  ``log_strategies`` is filled
    for Hedge learners (NaN elsewhere) so divergences stay exact near the
    simplex boundary.
    """

    game: Game | None
    configs: list[LearnerConfig]
    seed: int
    strategies: np.ndarray
    losses: np.ndarray
    realized: np.ndarray
    final_strategies: np.ndarray
    learner_etas: list[float]
    log_strategies: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.strategies.shape[0]

    @property
    def num_players(self) -> int:
        return self.strategies.shape[1]

    @property
    def num_actions(self) -> int:
        return self.strategies.shape[2]

    def raw_losses(self) -> np.ndarray:
        if self.game is None:
            return self.losses
        return self.game.to_native(self.losses)

    def raw_realized(self) -> np.ndarray:
        if self.game is None:
            return self.realized
        return self.game.to_native(self.realized)


def _configs_for(game: Game, learners) -> list[LearnerConfig]:
    if isinstance(learners, LearnerConfig):
        learners = [learners] * game.num_players
    learners = list(learners)
    if len(learners) != game.num_players:
        raise StructuralError(
            f"{len(learners)} learner configs for a {game.num_players}-player game"
        )
    for cfg in learners:
        if cfg.initial is not None and len(cfg.initial) != game.num_actions:
            raise StructuralError(
                f"initial strategy of length {len(cfg.initial)} for {game.num_actions} actions"
            )
    return learners


def run(game: Game, learners, T: int, seed: int = 0) -> Trace:
    """Play ``T`` rounds; each round fixes all strategies before any update."""
    if T < 0:
        raise ParameterError("T must be nonnegative")
    configs = _configs_for(game, learners)
    m, n = game.num_players, game.num_actions
    etas = [cfg.eta * game.regret_scale for cfg in configs]
    players = [_Player(cfg, n, eta) for cfg, eta in zip(configs, etas)]
    U = game.unit_losses
    strategies = np.empty((T, m, n))
    losses = np.empty((T, m, n))
    track_log = any(p.log_strategy is not None for p in players)
    logs = np.full((T, m, n), np.nan) if track_log else None
    two = m == 2
    for t in range(T):
        xs = [p.strategy for p in players]
        strategies[t] = xs
        if track_log:
            for i, p in enumerate(players):
                if p.log_strategy is not None:
                    logs[t, i] = p.log_strategy
        if two:
            losses[t, 0] = U[0] @ xs[1]
            losses[t, 1] = xs[0] @ U[1]
        else:
            for i in range(m):
                losses[t, i] = contract_losses(U[i], i, xs)
        for i, p in enumerate(players):
            p.step(losses[t, i])
    realized = np.einsum("tij,tij->ti", strategies, losses)
    final = np.array([p.strategy for p in players]) if m else np.empty((0, n))
    return Trace(
        game=game,
        configs=configs,
        seed=seed,
        strategies=strategies,
        losses=losses,
        realized=realized,
        final_strategies=final,
        learner_etas=etas,
        log_strategies=logs,
    )


def run_adversarial(learner: LearnerConfig, losses, seed: int = 0) -> Trace:
    """Feed a fixed ``(T, n)`` sequence of [0, 1] loss vectors to one learner.

    The result is a one-player trace with ``game=None``; ``eta`` is used as is.
    """
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 2:
        raise StructuralError(f"losses must have shape (T, n), got {losses.shape}")
    T, n = losses.shape
    if learner.initial is not None and len(learner.initial) != n:
        raise StructuralError(f"initial strategy of length {len(learner.initial)} for {n} actions")
    p = _Player(learner, n, learner.eta)
    strategies = np.empty((T, 1, n))
    logs = np.full((T, 1, n), np.nan) if p.log_strategy is not None else None
    for t in range(T):
        strategies[t, 0] = p.strategy
        if logs is not None:
            logs[t, 0] = p.log_strategy
        p.step(losses[t])
    L = losses[:, None, :].copy()
    return Trace(
        game=None,
        configs=[learner],
        seed=seed,
        strategies=strategies,
        losses=L,
        realized=np.einsum("tij,tij->ti", strategies, L),
        final_strategies=p.strategy[None, :].copy(),
        learner_etas=[learner.eta],
        log_strategies=logs,
    )


# --- regrets ---------------------------------------------------------------


def _upto(trace: Trace, upto):
    t = trace.T if upto is None else int(upto)
    if not 0 <= t <= trace.T:
        raise ParameterError(f"upto={t} outside [0, {trace.T}]")
    return t


def _scale(trace: Trace, raw: bool) -> float:
    return trace.game.regret_scale if raw and trace.game is not None else 1.0


def external_regret(trace: Trace, player: int, upto: int | None = None, raw: bool = False) -> float:
    """Cumulative loss minus that of the best fixed action over rounds ``1..upto``."""
    t = _upto(trace, upto)
    if t == 0:
        return 0.0
    own = trace.realized[:t, player].sum()
    best = trace.losses[:t, player].sum(axis=0).min()
    return float(own - best) * _scale(trace, raw)


def best_action(trace: Trace, player: int, upto: int | None = None) -> int:
    t = _upto(trace, upto)
    return int(np.argmin(trace.losses[:t, player].sum(axis=0)))


def external_regret_curve(trace: Trace, player: int, raw: bool = False) -> np.ndarray:
    """``Regret_t`` for ``t = 1..T``."""
    own = np.cumsum(trace.realized[:, player])
    best = np.cumsum(trace.losses[:, player], axis=0).min(axis=1)
    return (own - best) * _scale(trace, raw)


def swap_loss_matrix(strategies: np.ndarray, losses: np.ndarray) -> np.ndarray:
    """``C[j, k] = sum_t x^t(j) l^t(k)`` for one player's ``(T, n)`` records."""
    return strategies.T @ losses


def swap_regret(trace: Trace, player: int, upto: int | None = None, raw: bool = False):
    """Swap regret with its minimizing map ``phi`` (ties to the smallest index).

    The best swap map decouples across actions: ``phi(j) = argmin_k C[j, k]``.
    """
    t = _upto(trace, upto)
    return swap_regret_from(trace.strategies[:t, player], trace.losses[:t, player], _scale(trace, raw))


def swap_regret_from(strategies: np.ndarray, losses: np.ndarray, scale: float = 1.0):
    C = swap_loss_matrix(strategies, losses)
    phi = np.argmin(C, axis=1)
    n = C.shape[0]
    value = np.trace(C) - C[np.arange(n), phi].sum()
    return float(value) * scale, tuple(int(k) for k in phi)


def swap_regret_bruteforce(strategies: np.ndarray, losses: np.ndarray):
    """Minimize over all ``n^n`` swap maps; exhaustive oracle for small ``n``."""
    n = strategies.shape[1]
    if n > 6:
        raise CapacityError("brute-force swap regret limited to n <= 6")
    C = swap_loss_matrix(strategies, losses)
    rows = np.arange(n)
    best, best_phi = np.inf, None
    for phi in itertools.product(range(n), repeat=n):
        v = C[rows, phi].sum()
        if v < best:
            best, best_phi = v, phi
    return float(np.trace(C) - best), tuple(best_phi)


def swap_regret_direct(strategies: np.ndarray, losses: np.ndarray, phi) -> float:
    """Swap regret against a given ``phi``, summed round by round."""
    phi = np.asarray(phi)
    own = np.einsum("tj,tj->", strategies, losses)
    swapped = np.einsum("tj,tj->", strategies, losses[:, phi])
    return float(own - swapped)


@dataclass
class RegretReport:
    external: list[float]
    swap: list[float]
    best_action: list[int]
    best_swap: list[tuple[int, ...]]
    checkpoints: list[int]
    external_curve: list[list[float]]
    swap_curve: list[list[float]]


def default_checkpoints(T: int) -> list[int]:
    """Powers of two up to ``T`` plus the final ``sqrt(T)`` window."""
    pts = {1 << k for k in range(int(math.log2(T)) + 1)} if T >= 1 else set()
    r = math.isqrt(T)
    pts.update(range(max(1, T - r), T + 1))
    return sorted(p for p in pts if 1 <= p <= T)


def regret_report(trace: Trace, checkpoints=None, raw: bool = False) -> RegretReport:
    cps = default_checkpoints(trace.T) if checkpoints is None else sorted(checkpoints)
    m = trace.num_players
    ext, swp, ba, bs, ec, sc = [], [], [], [], [], []
    for i in range(m):
        ext.append(external_regret(trace, i, raw=raw))
        v, phi = swap_regret(trace, i, raw=raw)
        swp.append(v)
        bs.append(phi)
        ba.append(best_action(trace, i))
        curve = external_regret_curve(trace, i, raw=raw)
        ec.append([float(curve[t - 1]) for t in cps])
        sc.append([swap_regret(trace, i, upto=t, raw=raw)[0] for t in cps])
    return RegretReport(ext, swp, ba, bs, list(cps), ec, sc)


def window_max_regret(trace: Trace, T: int, raw: bool = True) -> float:
    """``max_{T' in [T, T + isqrt(T)]} max_i Regret^i_{T'}``."""
    hi = T + math.isqrt(T)
    if hi > trace.T:
        raise ParameterError(f"trace has {trace.T} rounds, window needs {hi}")
    curves = np.array(
        [external_regret_curve(trace, i, raw=raw) for i in range(trace.num_players)]
    )
    return float(curves[:, T - 1 : hi].max())


# --- divergences and RVU bookkeeping ----------------------------------------


def _log_strategy(trace: Trace, player: int, t: int) -> np.ndarray:
    if trace.log_strategies is not None and not np.isnan(trace.log_strategies[t - 1, player, 0]):
        return trace.log_strategies[t - 1, player]
    x = trace.strategies[t - 1, player]
    with np.errstate(divide="ignore"):
        return np.where(x < KL_FLOOR, -np.inf, np.log(np.maximum(x, KL_FLOOR)))


def kl_to_center(trace: Trace, player: int, t: int) -> float:
    """``D_KL(u || x^t)`` for the uniform ``u`` on two actions, natural log.

    Returns ``+inf`` when a coordinate of ``x^t`` is (numerically) zero.
    """
    if trace.num_actions != 2:
        raise StructuralError("kl_to_center is defined for two-action games")
    if not 1 <= t <= trace.T:
        raise ParameterError(f"round {t} outside [1, {trace.T}]")
    logx = _log_strategy(trace, player, t)
    if np.any(np.isneginf(logx)):
        return math.inf
    return float(np.sum(0.5 * (math.log(0.5) - logx)))


def kl_curve(trace: Trace, player: int) -> np.ndarray:
    return np.array([kl_to_center(trace, player, t) for t in range(1, trace.T + 1)])


def rvu_terms(trace: Trace, player: int) -> tuple[float, float, float, float]:
    """``(Regret_T, 2 ln n / eta, eta sum ||dl||_inf^2, sum ||dx||_1^2 / (4 eta))``.

    Unit-scale; ``l^0 = 0`` and the movement sum runs over ``x^{t+1} - x^t``
    for ``t = 1..T`` using the post-run strategy.
    """
    eta = trace.learner_etas[player]
    n = trace.num_actions
    L = trace.losses[:, player]
    dl = np.diff(np.vstack([np.zeros(n), L]), axis=0)
    xs = np.vstack([trace.strategies[:, player], trace.final_strategies[player]])
    dx = np.diff(xs, axis=0)
    return (
        external_regret(trace, player),
        2.0 * math.log(n) / eta,
        eta * float(np.sum(np.max(np.abs(dl), axis=1) ** 2)),
        float(np.sum(np.sum(np.abs(dx), axis=1) ** 2)) / (4.0 * eta),
    )


def movement_terms(trace: Trace, player: int) -> tuple[float, float]:
    """``(sum_{t=2..T} ||x^t - x^{t-1}||_1^2, sum_{t=1..T-1} ||l^t - l^{t-1}||_inf)``."""
    n = trace.num_actions
    xs = trace.strategies[:, player]
    moves = float(np.sum(np.sum(np.abs(np.diff(xs, axis=0)), axis=1) ** 2))
    L = np.vstack([np.zeros(n), trace.losses[:-1, player]])
    var = float(np.sum(np.max(np.abs(np.diff(L, axis=0)), axis=1)))
    return moves, var


def path_lengths(trace: Trace, player: int) -> tuple[float, float]:
    """``(sum_{t>=2} ||dx||_1^2, sum_{t>=1} ||dl||_inf^2)`` with ``l^0 = 0``."""
    n = trace.num_actions
    xs = trace.strategies[:, player]
    L = np.vstack([np.zeros(n), trace.losses[:, player]])
    return (
        float(np.sum(np.sum(np.abs(np.diff(xs, axis=0)), axis=1) ** 2)),
        float(np.sum(np.max(np.abs(np.diff(L, axis=0)), axis=1) ** 2)),
    )


# --- welfare ---------------------------------------------------------------


def poa_report(trace: Trace, spec: SmoothGameSpec, eps: float) -> tuple[float, float]:
    """Average social cost and the smooth-game bound for swap-regret learners."""
    denom = 1.0 - spec.mu - eps
    if not 0 < eps or denom <= 1e-12:
        raise ParameterError(f"eps must lie in (0, 1 - mu) = (0, {1 - spec.mu:g}), got {eps!r}")
    T = trace.T
    if T == 0:
        raise ParameterError("empty trace")
    m, n = trace.num_players, trace.num_actions
    avg = float(trace.realized.sum()) / T
    bound = spec.lam / denom * spec.opt + (m / T) * (1.0 / denom) * (n * math.log(n) / eps)
    return avg, bound


def approximate_regret(trace: Trace, player: int, eps: float) -> float:
    """``(1 - eps) sum <x, l> - min_j L(j)``; compare against ``A(n) / eps``."""
    own = trace.realized[:, player].sum()
    return float((1.0 - eps) * own - trace.losses[:, player].sum(axis=0).min())


# --- export -----------------------------------------------------------------


def export_trace(trace: Trace, prefix) -> tuple[Path, Path]:
    """Write ``<prefix>.csv`` (one row per round/player/action) and ``<prefix>.json``."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = prefix.with_suffix(".csv"), prefix.with_suffix(".json")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "player", "action", "strategy_prob", "loss_value"])
        for t in range(trace.T):
            for i in range(trace.num_players):
                for j in range(trace.num_actions):
                    w.writerow(
                        [t + 1, i, j, repr(float(trace.strategies[t, i, j])),
                         repr(float(trace.losses[t, i, j]))]
                    )
    sidecar = {
        "schema": TRACE_SCHEMA,
        "units": "unit",
        "rounds": trace.T,
        "seed": trace.seed,
        "game": None if trace.game is None else trace.game.to_json(),
        "shape": [trace.num_players, trace.num_actions],
        "learners": [c.to_json() for c in trace.configs],
        "learner_etas": trace.learner_etas,
        "final_strategies": trace.final_strategies.tolist(),
        "meta": trace.meta,
    }
    json_path.write_text(json.dumps(sidecar, indent=1))
    return csv_path, json_path


def load_trace(prefix) -> Trace:
    prefix = Path(prefix)
    side = json.loads(prefix.with_suffix(".json").read_text())
    if side.get("schema") != TRACE_SCHEMA:
        raise StructuralError(f"unsupported trace schema {side.get('schema')!r}")
    game = None if side["game"] is None else Game.from_json(side["game"])
    T, (m, n) = side["rounds"], side["shape"]
    strategies = np.zeros((T, m, n))
    losses = np.zeros((T, m, n))
    with prefix.with_suffix(".csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            t, i, j = int(row["round"]) - 1, int(row["player"]), int(row["action"])
            strategies[t, i, j] = float(row["strategy_prob"])
            losses[t, i, j] = float(row["loss_value"])
    configs = [
        LearnerConfig(**{**c, "initial": tuple(c["initial"]) if c.get("initial") else None})
        for c in side["learners"]
    ]
    return Trace(
        game=game,
        configs=configs,
        seed=side["seed"],
        strategies=strategies,
        losses=losses,
        realized=np.einsum("tij,tij->ti", strategies, losses),
        final_strategies=np.array(side["final_strategies"], dtype=float).reshape(m, n),
        learner_etas=list(side["learner_etas"]),
        meta=side.get("meta", {}),
    )
