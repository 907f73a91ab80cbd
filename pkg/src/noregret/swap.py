"""Swap-regret learners built on optimistic Hedge.

``bm_*``: the Blum-Mansour reduction, one optimistic Hedge instance per
action, playing the stationary distribution of the chain whose rows are the
instances' strategies.

``meta_*``: optimistic Hedge over swap matrices treated as experts, either
all ``n^n`` maps or the identity plus every single-coordinate swap.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import CapacityError, ParameterError
from .learners import HedgeState, check_loss, hedge_exponent, log_normalize, probs_from_log
from .markov import fixed_point_residual, stationary

BM_ETA_LIMIT = 1.0 / 6.0
META_MODES = ("full", "single_coordinate")
MAX_FULL_ACTIONS = 4


@dataclass(frozen=True, eq=False)
class BMState:
    """State of BM-Optimistic-Hedge.

    Row ``i`` of ``log_q`` holds the log-strategy of the ``i``-th inner
    optimistic Hedge.  ``x`` is the strategy for the coming round; ``prev_x``
    and ``prev_loss`` are the previous round's played strategy and loss
    (``x^0`` uniform, ``l^0 = 0``), so inner ``i`` last saw ``prev_x[i] * prev_loss``.
    """

    eta: float
    log_q: np.ndarray
    Q: np.ndarray
    x: np.ndarray
    prev_x: np.ndarray
    prev_loss: np.ndarray
    t: int = 0

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def strategy(self) -> np.ndarray:
        return self.x

    @property
    def inner(self) -> list[HedgeState]:
        scaled = np.outer(self.prev_x, self.prev_loss)
        return [
            HedgeState(
                strategy=self.Q[i],
                log_strategy=self.log_q[i],
                eta=self.eta,
                variant="optimistic",
                prev_loss=scaled[i],
                cumulative_loss=np.full(self.n, np.nan),
            )
            for i in range(self.n)
        ]

    @property
    def residual(self) -> float:
        return fixed_point_residual(self.x, self.Q)


def bm_init(n: int, eta: float, warn: bool = True) -> BMState:
    if not eta > 0:
        raise ParameterError(f"learning rate must be positive, got {eta!r}")
    if eta > BM_ETA_LIMIT and warn:
        warnings.warn(
            f"eta={eta:g} exceeds 1/6; the per-round drift guarantee does not apply",
            RuntimeWarning,
            stacklevel=2,
        )
    u = np.full(n, 1.0 / n)
    return BMState(
        eta=float(eta),
        log_q=np.full((n, n), -np.log(n)),
        Q=np.full((n, n), 1.0 / n),
        x=u,
        prev_x=u.copy(),
        prev_loss=np.zeros(n),
    )


def bm_step(state: BMState, loss) -> tuple[BMState, np.ndarray]:
    """Distribute ``x(i) * loss`` to inner ``i``, rebuild the chain, resolve ``x``."""
    loss = check_loss(loss, state.n)
    scaled = np.outer(state.x, loss)
    prev_scaled = np.outer(state.prev_x, state.prev_loss)
    log_q = log_normalize(state.log_q - state.eta * hedge_exponent(scaled, prev_scaled, True))
    Q = probs_from_log(log_q)
    x = stationary(Q, check=False)
    new = BMState(
        eta=state.eta, log_q=log_q, Q=Q, x=x, prev_x=state.x, prev_loss=loss, t=state.t + 1
    )
    return new, x


# --- swap matrices as experts ---------------------------------------------


@dataclass(frozen=True, eq=False)
class SwapMatrix:
    mapping: tuple[int, ...]

    @property
    def matrix(self) -> np.ndarray:
        n = len(self.mapping)
        S = np.zeros((n, n))
        S[np.arange(n), self.mapping] = 1.0
        return S


def swap_experts(n: int, mode: str) -> np.ndarray:
    """Expert maps as an ``(K, n)`` index array; row ``k`` is ``phi_k``."""
    if mode == "full":
        if n > MAX_FULL_ACTIONS:
            raise CapacityError(f"full swap enumeration limited to n <= {MAX_FULL_ACTIONS}")
        return np.array(list(itertools.product(range(n), repeat=n)), dtype=int)
    if mode == "single_coordinate":
        maps = [list(range(n))]
        for i in range(n):
            for j in range(n):
                if j != i:
                    phi = list(range(n))
                    phi[i] = j
                    maps.append(phi)
        return np.array(maps, dtype=int)
    raise ParameterError(f"mode must be one of {META_MODES}, got {mode!r}")


@dataclass(frozen=True, eq=False)
class MetaExpertState:
    mode: str
    eta: float
    experts: np.ndarray
    log_w: np.ndarray
    Q: np.ndarray
    x: np.ndarray
    prev_x: np.ndarray
    prev_loss: np.ndarray
    t: int = 0

    @property
    def weights(self) -> np.ndarray:
        return probs_from_log(self.log_w)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def strategy(self) -> np.ndarray:
        return self.x


def chain_from_weights(experts: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``sum_phi w(phi) S^phi`` without materializing the swap matrices."""
    K, n = experts.shape
    Q = np.zeros((n, n))
    rows = np.broadcast_to(np.arange(n), (K, n))
    np.add.at(Q, (rows, experts), np.broadcast_to(weights[:, None], (K, n)))
    return Q


def expert_losses(experts: np.ndarray, x: np.ndarray, loss: np.ndarray) -> np.ndarray:
    """``x S^phi l = sum_i x(i) l(phi(i))`` for every expert."""
    return loss[experts] @ x


def meta_init(n: int, eta: float, mode: str = "full") -> MetaExpertState:
    if not eta > 0:
        raise ParameterError(f"learning rate must be positive, got {eta!r}")
    experts = swap_experts(n, mode)
    K = experts.shape[0]
    log_w = np.full(K, -np.log(K))
    Q = chain_from_weights(experts, np.full(K, 1.0 / K))
    x = stationary(Q)
    return MetaExpertState(
        mode=mode, eta=float(eta), experts=experts, log_w=log_w, Q=Q,
        x=x, prev_x=x.copy(), prev_loss=np.zeros(n),
    )


def meta_step(state: MetaExpertState, loss) -> tuple[MetaExpertState, np.ndarray]:
    loss = check_loss(loss, state.n)
    cur = expert_losses(state.experts, state.x, loss)
    prev = expert_losses(state.experts, state.prev_x, state.prev_loss)
    log_w = log_normalize(state.log_w - state.eta * hedge_exponent(cur, prev, True))
    Q = chain_from_weights(state.experts, probs_from_log(log_w))
    x = stationary(Q)
    new = replace(state, log_w=log_w, Q=Q, x=x, prev_x=state.x, prev_loss=loss, t=state.t + 1)
    return new, x


def strategy_drift(xs) -> float:
    """Largest ``l1`` move between consecutive strategies of a trace."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[0] < 2:
        raise ParameterError("strategy_drift needs a (T, n) trace with T >= 2")
    return float(np.max(np.sum(np.abs(np.diff(xs, axis=0)), axis=1)))
