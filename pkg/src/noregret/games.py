"""Finite normal-form games with per-player loss tensors.

A game with ``m`` players and ``n`` actions each stores one dense loss tensor
of shape ``(n,) * m`` per player, stacked into an array of shape
``(m,) + (n,) * m``.  Games printed with payoffs in ``[-1, 1]`` keep their raw
entries (``scale="raw"``); learners always see the affine image
``v -> (v + 1) / 2`` in ``[0, 1]``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CapacityError, ContractError, ParameterError, StructuralError

MAX_TENSOR_ENTRIES = 10**7
MAX_OPT_PROFILES = 10**6
SCALES = ("raw", "unit")

_STRATEGY_TOL = 1e-9


def as_strategy(probs, n: int | None = None) -> np.ndarray:
    """Validate ``probs`` as a mixed strategy and return it as a float array."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1:
        raise StructuralError(f"strategy must be a vector, got shape {p.shape}")
    if n is not None and p.shape[0] != n:
        raise StructuralError(f"strategy has length {p.shape[0]}, expected {n}")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0):
        raise ParameterError(f"strategy has negative or non-finite entries: {p}")
    if abs(p.sum() - 1.0) > _STRATEGY_TOL:
        raise ParameterError(f"strategy sums to {p.sum()!r}, not 1")
    return p


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


@dataclass(frozen=True, eq=False)
class Game:
    """Dense ``m``-player game with ``n`` actions per player.

    ``losses[i]`` is player ``i``'s loss tensor indexed by the pure profile.
    With ``scale="raw"`` entries live in ``[-1, 1]`` and :attr:`unit_losses`
    applies the affine map; with ``scale="unit"`` they already lie in ``[0, 1]``.
    """

    losses: np.ndarray
    scale: str = "unit"
    name: str | None = None

    def __post_init__(self):
        arr = np.array(self.losses, dtype=float)
        if arr.ndim < 3:
            raise StructuralError("losses must have shape (m, n, ..., n) with m >= 2")
        m = arr.shape[0]
        n = arr.shape[1]
        if arr.ndim != m + 1 or any(d != n for d in arr.shape[1:]):
            raise StructuralError(
                f"losses shape {arr.shape} is not (m,) + (n,)*m for m={m}"
            )
        if n**m > MAX_TENSOR_ENTRIES:
            raise CapacityError(f"n^m = {n**m} exceeds {MAX_TENSOR_ENTRIES} entries")
        if self.scale not in SCALES:
            raise ParameterError(f"scale must be one of {SCALES}, got {self.scale!r}")
        lo, hi = (-1.0, 1.0) if self.scale == "raw" else (0.0, 1.0)
        if arr.min() < lo or arr.max() > hi:
            raise ContractError(f"{self.scale} losses must lie in [{lo}, {hi}]")
        arr.flags.writeable = False
        object.__setattr__(self, "losses", arr)

    @property
    def num_players(self) -> int:
        return self.losses.shape[0]

    @property
    def num_actions(self) -> int:
        return self.losses.shape[1]

    @cached_property
    def unit_losses(self) -> np.ndarray:
        if self.scale == "unit":
            return self.losses
        out = self.to_unit(self.losses)
        out.flags.writeable = False
        return out

    @property
    def regret_scale(self) -> float:
        """Factor converting unit-scale regrets to the game's native units."""
        return 2.0 if self.scale == "raw" else 1.0

    def to_unit(self, values):
        values = np.asarray(values, dtype=float)
        return (values + 1.0) / 2.0 if self.scale == "raw" else values

    def to_native(self, values):
        values = np.asarray(values, dtype=float)
        return 2.0 * values - 1.0 if self.scale == "raw" else values

    def to_json(self) -> dict:
        out = {
            "players": self.num_players,
            "actions": self.num_actions,
            "losses": self.losses.tolist(),
            "scale": self.scale,
        }
        if self.name is not None:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Game":
        try:
            m, n = int(data["players"]), int(data["actions"])
            losses = np.array(data["losses"], dtype=float)
        except KeyError as exc:
            raise StructuralError(f"game JSON is missing field {exc}") from None
        if losses.shape != (m,) + (n,) * m:
            raise StructuralError(
                f"losses shape {losses.shape} disagrees with players={m}, actions={n}"
            )
        return cls(losses, scale=data.get("scale", "unit"), name=data.get("name"))


def save_game(game: Game, path) -> None:
    Path(path).write_text(json.dumps(game.to_json()))


def load_game(path) -> Game:
    return Game.from_json(json.loads(Path(path).read_text()))


def _check_profile(game: Game, profile) -> list[np.ndarray]:
    if len(profile) != game.num_players:
        raise StructuralError(
            f"profile has {len(profile)} strategies for a {game.num_players}-player game"
        )
    return [as_strategy(x, game.num_actions) for x in profile]


def contract_losses(tensor: np.ndarray, player: int, profile: Sequence[np.ndarray]):
    """Marginalize ``tensor`` over every opponent of ``player``.

    No validation; ``tensor`` has shape ``(n,) * m``.
    """
    t = np.moveaxis(tensor, player, 0)
    others = [k for k in range(len(profile)) if k != player]
    for k in reversed(others):
        t = t @ profile[k]
    return t


def expected_loss_vector(game: Game, player: int, profile, raw: bool = False) -> np.ndarray:
    """Expected loss of each pure action of ``player`` against ``profile``.

    Unit-scale by default; ``raw=True`` returns the game's native units.
    """
    if not 0 <= player < game.num_players:
        raise StructuralError(f"player index {player} out of range")
    xs = _check_profile(game, profile)
    src = game.losses if raw else game.unit_losses
    return contract_losses(src[player], player, xs)


def realized_loss(game: Game, profile, raw: bool = False) -> np.ndarray:
    """Per-player expected loss ``<x_i, l_i>`` under the product profile."""
    xs = _check_profile(game, profile)
    src = game.losses if raw else game.unit_losses
    return np.array(
        [xs[i] @ contract_losses(src[i], i, xs) for i in range(game.num_players)]
    )


def social_cost(game: Game, profile) -> float:
    return float(realized_loss(game, profile).sum())


# --- canonical 2x2 games --------------------------------------------------

_A = [[1.0, -1.0], [-1.0, 1.0]]
_CANONICAL = {
    "matching_pennies_G1": [[-1.0, 1.0], [1.0, -1.0]],
    "invariant_G2": [[1.0, 1.0], [1.0, 1.0]],
    "cooperation_G3": [[1.0, -1.0], [-1.0, 1.0]],
}
CANONICAL_NAMES = tuple(_CANONICAL)


def bimatrix_game(A, B, scale: str = "unit", name: str | None = None) -> Game:
    """Two-player game where ``A[i, j]`` / ``B[i, j]`` are the row / column losses."""
    return Game(np.stack([np.asarray(A, float), np.asarray(B, float)]), scale, name)


def canonical_game(name: str) -> Game:
    """One of the three 2x2 lower-bound games ``(A, B_k)``, stored raw in [-1, 1]."""
    if name not in _CANONICAL:
        raise ParameterError(f"unknown canonical game {name!r}; choose from {CANONICAL_NAMES}")
    return bimatrix_game(_A, _CANONICAL[name], scale="raw", name=name)


def random_game(m: int, n: int, seed: int) -> Game:
    """I.i.d. uniform [0, 1] losses; deterministic in ``seed``."""
    if m < 2 or n < 2:
        raise ParameterError("random_game needs m >= 2 and n >= 2")
    if n**m > MAX_TENSOR_ENTRIES:
        raise CapacityError(f"n^m = {n**m} exceeds {MAX_TENSOR_ENTRIES} entries")
    rng = np.random.default_rng(seed)
    return Game(rng.uniform(0.0, 1.0, size=(m,) + (n,) * m), "unit", f"random_{m}x{n}_s{seed}")


# --- smooth congestion games ----------------------------------------------


@dataclass(frozen=True, eq=False)
class SmoothGameSpec:
    game: Game
    lam: float
    mu: float
    optimal_profile: tuple[int, ...]
    opt: float
    costs: np.ndarray = field(repr=False, default=None)


def _all_profiles(m: int, n: int) -> np.ndarray:
    return np.array(list(itertools.product(range(n), repeat=m)), dtype=int)


def smooth_congestion_game(m: int, resources: int, seed: int, costs=None) -> SmoothGameSpec:
    """Singleton load-balancing game with affine resource costs ``a * load + b``.

    Each player picks one resource.  Costs are divided by the largest possible
    resource cost so losses fall in [0, 1]; positive rescaling keeps the
    affine-congestion smoothness pair (5/3, 1/3).  ``costs`` is an optional
    ``(resources, 2)`` array of ``(a, b)`` rows; otherwise ``a, b ~ U[0, 1]``.
    """
    if m < 2:
        raise ParameterError("smooth_congestion_game needs m >= 2")
    if resources < 1:
        raise ParameterError("need at least one resource")
    n = resources
    if n**m > MAX_OPT_PROFILES:
        raise CapacityError(f"exhaustive OPT over n^m = {n**m} profiles exceeds {MAX_OPT_PROFILES}")
    if costs is None:
        costs = np.random.default_rng(seed).uniform(0.0, 1.0, size=(n, 2))
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (n, 2) or np.any(costs < 0):
        raise ParameterError("costs must be a nonnegative (resources, 2) array")
    a, b = costs[:, 0], costs[:, 1]
    cmax = float(np.max(a * m + b))
    if cmax <= 0:
        raise ParameterError("all resource costs are zero")

    profiles = _all_profiles(m, n)
    loads = np.zeros((len(profiles), n))
    for i in range(m):
        np.add.at(loads, (np.arange(len(profiles)), profiles[:, i]), 1.0)
    per_player = np.empty((len(profiles), m))
    for i in range(m):
        s = profiles[:, i]
        per_player[:, i] = (a[s] * loads[np.arange(len(profiles)), s] + b[s]) / cmax
    tensor = np.empty((m,) + (n,) * m)
    for i in range(m):
        tensor[i] = per_player[:, i].reshape((n,) * m)

    total = per_player.sum(axis=1)
    best = int(np.argmin(total))
    game = Game(tensor, "unit", f"congestion_{m}p_{n}r_s{seed}")
    return SmoothGameSpec(
        game=game,
        lam=5.0 / 3.0,
        mu=1.0 / 3.0,
        optimal_profile=tuple(int(s) for s in profiles[best]),
        opt=float(total[best]),
        costs=costs,
    )


def smoothness_violation(spec: SmoothGameSpec, pairs: int, seed: int) -> float:
    """Largest ``lhs - rhs`` of the smoothness inequality over sampled profiles.

    Samples pure pairs ``(s, s*)`` and mixed ``x`` against pure ``s*`` (the
    inequality is linear in ``x`` for fixed pure ``s*``).  A nonpositive
    return value means no violation was found.
    """
    game = spec.game
    m, n = game.num_players, game.num_actions
    L = game.unit_losses
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for k in range(pairs):
        star = rng.integers(0, n, size=m)
        if k % 2 == 0:
            xs = [np.eye(n)[s] for s in rng.integers(0, n, size=m)]
        else:
            xs = [rng.dirichlet(np.ones(n)) for _ in range(m)]
        lhs = sum(contract_losses(L[i], i, xs)[star[i]] for i in range(m))
        cost_star = sum(L[(i,) + tuple(star)] for i in range(m))
        cost_x = sum(xs[i] @ contract_losses(L[i], i, xs) for i in range(m))
        worst = max(worst, lhs - spec.lam * cost_star - spec.mu * cost_x)
    return float(worst)
