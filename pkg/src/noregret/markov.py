"""Stationary distributions of row-stochastic chains.

Two independent routes: a dense LU solve (:func:`stationary`) and
enumeration of rooted spanning arborescences (:func:`tree_stationary`), plus
entrywise multiplicative certificates between two chains.
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache
from math import gcd

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import CapacityError, CertificateError, NumericalError, StructuralError

log = logging.getLogger(__name__)

ROW_TOL = 1e-12
RESIDUAL_TARGET = 1e-10
RESIDUAL_FAIL = 1e-8
MAX_TREE_STATES = 6


def as_stochastic(Q, tol: float = 1e-9) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise StructuralError(f"chain must be square, got shape {Q.shape}")
    if np.any(Q < 0) or np.any(np.abs(Q.sum(axis=1) - 1.0) > tol):
        raise StructuralError("chain must be row-stochastic with nonnegative entries")
    return Q


def is_ergodic(Q: np.ndarray) -> bool:
    """Strict positivity, or irreducible and aperiodic by graph search."""
    if Q.min() > 0:
        return True
    adj = Q > 0
    ncomp, _ = connected_components(adj, directed=True, connection="strong")
    if ncomp != 1:
        return False
    # period = gcd over edges (u, v) of level(u) + 1 - level(v), BFS levels from 0
    n = Q.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    period = 0
    for u, v in zip(*np.nonzero(adj)):
        period = gcd(period, int(level[u] + 1 - level[v]))
    return period == 1


def closed_classes(Q: np.ndarray) -> int:
    """Number of strongly connected components with no edge leaving them."""
    adj = Q > 0
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    leaves = np.zeros(ncomp, dtype=bool)
    u, v = np.nonzero(adj)
    leaves[labels[u][labels[u] != labels[v]]] = True
    return int(ncomp - leaves.sum())


def fixed_point_residual(p: np.ndarray, Q: np.ndarray) -> float:
    return float(np.sum(np.abs(p @ Q - p)))


def stationary(Q, check: bool = True) -> np.ndarray:
    """Unique ``p`` with ``p = p Q`` via LU on ``(Q^T - I)`` with a row of ones.

    Ergodic chains are the intended input.  A chain whose only defect is a
    set of transient states (one closed class, e.g. after weights underflow
    to exactly zero) still has a unique solution and is accepted.  Raises
    :class:`NumericalError` otherwise, or when the ``l1`` residual exceeds
    ``1e-8``.
    """
    if check:
        Q = as_stochastic(Q)
        if not is_ergodic(Q) and closed_classes(Q) != 1:
            raise NumericalError("chain has several closed classes", residual=np.inf)
    n = Q.shape[0]
    A = Q.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        p = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular stationary system: {exc}", residual=np.inf) from None
    res = fixed_point_residual(p, Q)
    if not res <= RESIDUAL_FAIL or np.any(p < -RESIDUAL_FAIL):
        raise NumericalError(f"stationary residual {res:.3e} exceeds {RESIDUAL_FAIL:g}", residual=res)
    if res > RESIDUAL_TARGET:
        log.warning("stationary residual %.3e above target %.0e", res, RESIDUAL_TARGET)
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def power_stationary(Q, iters: int = 100_000) -> np.ndarray:
    """Iterate ``p <- p Q`` from uniform; a slow cross-check only."""
    Q = as_stochastic(Q)
    p = np.full(Q.shape[0], 1.0 / Q.shape[0])
    for _ in range(iters):
        p = p @ Q
    return p / p.sum()


@lru_cache(maxsize=None)
def rooted_trees(n: int, root: int) -> np.ndarray:
    """All arborescences on ``n`` nodes pointing into ``root``.

    Row ``k`` gives the out-neighbour of every node in tree ``k`` (``-1``
    at the root).  Built by assigning one out-edge per non-root node and
    rejecting any assignment that closes a cycle.
    """
    nodes = [v for v in range(n) if v != root]
    parent = [-1] * n
    out = []

    def closes_cycle(v):
        u = parent[v]
        while u != root and parent[u] != -1:
            if u == v:
                return True
            u = parent[u]
        return u == v

    def assign(k):
        if k == len(nodes):
            out.append(list(parent))
            return
        v = nodes[k]
        for w in range(n):
            if w == v:
                continue
            parent[v] = w
            if not closes_cycle(v):
                assign(k + 1)
            parent[v] = -1

    assign(0)
    arr = np.array(out, dtype=int).reshape(len(out), n)
    arr.flags.writeable = False
    return arr


def tree_weights(Q) -> np.ndarray:
    """``Sigma_i``: summed edge-weight products of all trees rooted at ``i``."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if n > MAX_TREE_STATES:
        raise CapacityError(f"tree enumeration limited to n <= {MAX_TREE_STATES}, got {n}")
    if n == 1:
        return np.ones(1)
    sigma = np.empty(n)
    for root in range(n):
        trees = rooted_trees(n, root)
        src = np.array([v for v in range(n) if v != root])
        # sorted factors and an exact sum make the result independent of state labels
        weights = np.prod(np.sort(Q[src, trees[:, src]], axis=1), axis=1)
        sigma[root] = math.fsum(weights)
    return sigma


def tree_stationary(Q) -> np.ndarray:
    """Stationary distribution from the Markov chain tree theorem (``n <= 6``)."""
    Q = as_stochastic(Q)
    sigma = tree_weights(Q)
    total = math.fsum(sigma)
    if not total > 0:
        raise NumericalError("chain has no spanning arborescence", residual=np.inf)
    return sigma / total


def certify_multiplicative(Q, Qp) -> np.ndarray:
    """Smallest per-row ``eta_i`` with ``(1-eta_i) q'_ij <= q_ij <= (1+eta_i) q'_ij``."""
    Q = np.asarray(Q, dtype=float)
    Qp = np.asarray(Qp, dtype=float)
    if Q.shape != Qp.shape:
        raise StructuralError(f"chain shapes differ: {Q.shape} vs {Qp.shape}")
    bad = (Qp == 0) & (Q != 0)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise CertificateError(f"q'[{i},{j}] = 0 while q[{i},{j}] = {Q[i, j]!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.where(Qp > 0, np.abs(Q / Qp - 1.0), 0.0)
    return dev.max(axis=1)


def perturbation_gap(Q, Qp, constant: float = 8.0) -> tuple[float, float]:
    """``(||p - p'||_1, constant * sum(eta_i))`` for the two chains."""
    gap = float(np.sum(np.abs(stationary(Q) - stationary(Qp))))
    return gap, constant * float(np.sum(certify_multiplicative(Q, Qp)))
