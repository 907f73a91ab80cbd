"""Vanilla and optimistic Hedge, the doubling wrapper, and learning-rate recipes.

States are immutable; every ``*_step`` returns a new state.  Weights are
kept as normalized log-probabilities so long runs with large ``eta * t``
never overflow.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, ParameterError, StructuralError
from .games import as_strategy

log = logging.getLogger(__name__)

VARIANTS = ("vanilla", "optimistic")
LOSS_TOL = 1e-9


def check_loss(loss, n: int) -> np.ndarray:
    v = np.asarray(loss, dtype=float)
    if v.shape != (n,):
        raise StructuralError(f"loss vector has shape {v.shape}, expected ({n},)")
    if not np.all(np.isfinite(v)) or v.min() < -LOSS_TOL or v.max() > 1.0 + LOSS_TOL:
        raise ContractError(f"loss entries must lie in [0, 1]; got range [{v.min()}, {v.max()}]")
    return v


def log_normalize(z: np.ndarray) -> np.ndarray:
    """Shift log-weights along the last axis so they exponentiate to a distribution."""
    top = np.max(z, axis=-1, keepdims=True)
    return z - (top + np.log(np.sum(np.exp(z - top), axis=-1, keepdims=True)))


def probs_from_log(logp: np.ndarray) -> np.ndarray:
    p = np.exp(logp)
    return p / np.sum(p, axis=-1, keepdims=True)


def hedge_exponent(loss, prev_loss, optimistic: bool):
    """The loss estimate entering the exponent: ``l`` or ``2 l - l_prev``."""
    return 2.0 * loss - prev_loss if optimistic else loss


@dataclass(frozen=True, eq=False)
class HedgeState:
    strategy: np.ndarray
    log_strategy: np.ndarray
    eta: float
    variant: str
    prev_loss: np.ndarray
    cumulative_loss: np.ndarray

    @property
    def n(self) -> int:
        return self.strategy.shape[0]


def hedge_init(n: int, eta: float, variant: str = "vanilla", initial=None) -> HedgeState:
    if not eta > 0 or not math.isfinite(eta):
        raise ParameterError(f"learning rate must be positive, got {eta!r}")
    if variant not in VARIANTS:
        raise ParameterError(f"variant must be one of {VARIANTS}, got {variant!r}")
    x = np.full(n, 1.0 / n) if initial is None else as_strategy(initial, n).copy()
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    return HedgeState(
        strategy=x,
        log_strategy=logx,
        eta=float(eta),
        variant=variant,
        prev_loss=np.zeros(n),
        cumulative_loss=np.zeros(n),
    )


def hedge_step(state: HedgeState, loss) -> HedgeState:
    """One multiplicative-weights update after observing ``loss``.

    The vanilla variant exponentiates ``-eta * l``; the optimistic variant
    uses ``-eta * (2 l - l_prev)`` with ``l_prev`` starting at zero.
    """
    loss = check_loss(loss, state.n)
    g = hedge_exponent(loss, state.prev_loss, state.variant == "optimistic")
    logp = log_normalize(state.log_strategy - state.eta * g)
    return replace(
        state,
        strategy=probs_from_log(logp),
        log_strategy=logp,
        prev_loss=loss.copy(),
        cumulative_loss=state.cumulative_loss + loss,
    )


# --- learning-rate recipes --------------------------------------------------

ETA_KINDS = ("two_player_opt", "bm_swap", "meta_swap")


def theorem_eta(kind: str, n: int, m: int = 2, T: int = 1) -> float:
    """Closed-form learning rate with every hidden constant set to 1.

    ``two_player_opt``: ``(ln n / T)^(1/6)``;
    ``bm_swap``: ``(n ln n / (m^2 T))^(1/4)``;
    ``meta_swap``: ``(ln n / (n m^2 T))^(1/4)``.
    """
    if n < 2 or T < 1:
        raise ParameterError("theorem_eta needs n >= 2 and T >= 1")
    log.debug("theorem_eta(%s, n=%s, m=%s, T=%s) with hidden constants set to 1", kind, n, m, T)
    if kind == "two_player_opt":
        return (math.log(n) / T) ** (1.0 / 6.0)
    if m < 2:
        raise ParameterError("theorem_eta needs m >= 2 for swap-regret rates")
    if kind == "bm_swap":
        return (n * math.log(n) / (m * m * T)) ** 0.25
    if kind == "meta_swap":
        return (math.log(n) / (n * m * m * T)) ** 0.25
    raise ParameterError(f"unknown theorem_eta kind {kind!r}; choose from {ETA_KINDS}")


# --- doubling wrapper around BM-Optimistic-Hedge ---------------------------


@dataclass(frozen=True, eq=False)
class WrapperState:
    """Restarting BM-Optimistic-Hedge with a doubling variation budget.

    ``accumulated_variation`` sums ``||l^t - l^{t-1}||_inf^2 + ||x^t - x^{t-1}||_1^2``
    over the current run; each run starts with ``l^0 = 0`` and ``x^0 = x^1``.
    """

    round_index: int
    budget: float
    eta_r: float
    inner: "object"
    accumulated_variation: float
    eta_cap: float
    prev_loss: np.ndarray
    prev_x: np.ndarray | None
    restarts: tuple[int, ...] = ()
    t: int = 0

    @property
    def strategy(self) -> np.ndarray:
        return self.inner.x

    @property
    def n(self) -> int:
        return self.prev_loss.shape[0]


def wrapper_eta(n: int, budget: float, eta_cap: float) -> float:
    return min(math.sqrt(n * math.log(n) / budget), eta_cap)


def wrapper_init(n: int, eta_cap: float) -> WrapperState:
    from .swap import bm_init

    if not eta_cap > 0:
        raise ParameterError(f"eta cap must be positive, got {eta_cap!r}")
    eta_1 = wrapper_eta(n, 1.0, eta_cap)
    return WrapperState(
        round_index=1,
        budget=1.0,
        eta_r=eta_1,
        inner=bm_init(n, eta_1, warn=False),
        accumulated_variation=0.0,
        eta_cap=float(eta_cap),
        prev_loss=np.zeros(n),
        prev_x=None,
    )


def wrapper_step(state: WrapperState, loss) -> tuple[WrapperState, np.ndarray]:
    """Feed ``loss`` to the current run; restart it once the budget is spent."""
    from .swap import bm_init, bm_step

    loss = check_loss(loss, state.n)
    x = state.inner.x
    prev_x = x if state.prev_x is None else state.prev_x
    acc = (
        state.accumulated_variation
        + float(np.max(np.abs(loss - state.prev_loss))) ** 2
        + float(np.sum(np.abs(x - prev_x))) ** 2
    )
    inner, _ = bm_step(state.inner, loss)
    t = state.t + 1
    if acc >= state.budget:
        budget = 2.0 * state.budget
        eta_r = wrapper_eta(state.n, budget, state.eta_cap)
        new = replace(
            state,
            round_index=state.round_index + 1,
            budget=budget,
            eta_r=eta_r,
            inner=bm_init(state.n, eta_r, warn=False),
            accumulated_variation=0.0,
            prev_loss=np.zeros(state.n),
            prev_x=None,
            restarts=state.restarts + (t,),
            t=t,
        )
    else:
        new = replace(
            state, inner=inner, accumulated_variation=acc, prev_loss=loss, prev_x=x, t=t
        )
    return new, new.inner.x
