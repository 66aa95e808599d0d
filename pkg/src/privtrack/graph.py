"""Communication graphs and their doubly stochastic mixing matrices.

A mixing matrix W is a symmetric, doubly stochastic weighting of a connected
undirected graph.  Two spectral scalars drive every convergence statement in
this package:

* ``rho_w``     -- spectral radius of W - (1/n) 11^T, the consensus
                   contraction factor (< 1 iff the graph is connected),
* ``lambda_wi`` -- spectral radius of W - I, which scales the compression
                   error terms.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

# Tolerance for the doubly stochastic invariant (row/column sums).
STOCHASTIC_TOL = 1e-12

# Named graph presets usable from run configs.  "paper-fig1" is the 6-agent
# topology used by the bundled experiment presets.
PRESET_GRAPHS: dict[str, tuple[int, tuple[tuple[int, int], ...]]] = {
    "paper-fig1": (6, ((0, 1), (0, 3), (0, 5), (1, 2), (1, 4), (2, 3), (3, 4), (4, 5))),
}

WEIGHT_RULES = ("metropolis", "uniform")


class GraphError(ValueError):
    """Malformed edge list, disconnected graph, or invalid mixing parameter."""


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Validated mixing matrix with its spectral scalars."""

    n: int
    weights: np.ndarray  # (n, n) symmetric doubly stochastic
    rho_w: float
    lambda_wi: float
    edges: tuple[tuple[int, int], ...] = ()
    rule: str = "metropolis"


def normalize_edges(edges, n: int) -> tuple[tuple[int, int], ...]:
    """Canonicalize an edge list: sorted (i, j) pairs with i < j.

    Rejects self-loops, duplicates, and out-of-range endpoints.
    """
    seen = set()
    out = []
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise GraphError(f"self-loop ({i},{j}) is not allowed")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge ({i},{j}) out of range for n={n}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphError(f"duplicate edge ({i},{j})")
        seen.add(key)
        out.append(key)
    return tuple(sorted(out))


def _is_connected(edges, n: int) -> bool:
    if n == 1:
        return True
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return all(seen)


def matrix_spectral_scalars(w: np.ndarray) -> tuple[float, float]:
    """Largest singular values of W - 11^T/n and W - I for symmetric W.

    This is the raw numeric kernel; it does not require a valid (connected)
    mixing matrix, so degenerate inputs like W = I are fine.
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    avg = np.full((n, n), 1.0 / n)
    rho_w = float(np.max(np.abs(np.linalg.eigvalsh(w - avg))))
    lambda_wi = float(np.max(np.abs(np.linalg.eigvalsh(w - np.eye(n)))))
    return rho_w, lambda_wi


def build_mixing_matrix(edges, n: int, rule: str = "metropolis") -> MixingMatrix:
    """Build a symmetric doubly stochastic W for a connected graph.

    ``metropolis`` sets w_ij = 1 / (1 + max(deg_i, deg_j)) on edges,
    ``uniform`` sets w_ij = 1 / (1 + max degree) on every edge; in both
    cases the diagonal absorbs the remainder.
    """
    if n < 1:
        raise GraphError(f"agent count must be >= 1, got {n}")
    if rule not in WEIGHT_RULES:
        raise GraphError(f"unknown weight rule {rule!r}; expected one of {WEIGHT_RULES}")
    canon = normalize_edges(edges, n)
    if not _is_connected(canon, n):
        raise GraphError(f"graph on {n} vertices with {len(canon)} edges is not connected")

    deg = np.zeros(n, dtype=int)
    for i, j in canon:
        deg[i] += 1
        deg[j] += 1

    w = np.zeros((n, n))
    if rule == "metropolis":
        for i, j in canon:
            w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    else:
        wij = 1.0 / (1.0 + (int(deg.max()) if n > 1 else 0))
        for i, j in canon:
            w[i, j] = w[j, i] = wij
    for i in range(n):
        w[i, i] = 1.0 - w[i].sum()

    _check_invariants(w, canon, n)
    rho_w, lambda_wi = matrix_spectral_scalars(w)
    if n > 1 and rho_w >= 1.0:
        raise GraphError(f"connected graph must give rho_w < 1, got {rho_w}")
    return MixingMatrix(n=n, weights=w, rho_w=rho_w, lambda_wi=lambda_wi, edges=canon, rule=rule)


def _check_invariants(w: np.ndarray, edges, n: int) -> None:
    if not np.array_equal(w, w.T):
        raise GraphError("weight matrix is not symmetric")
    if np.max(np.abs(w.sum(axis=0) - 1.0)) > STOCHASTIC_TOL:
        raise GraphError("column sums deviate from 1 beyond tolerance")
    if np.max(np.abs(w.sum(axis=1) - 1.0)) > STOCHASTIC_TOL:
        raise GraphError("row sums deviate from 1 beyond tolerance")
    edge_set = set(edges)
    for i in range(n):
        for j in range(i + 1, n):
            on_edge = (i, j) in edge_set
            if on_edge and w[i, j] <= 0:
                raise GraphError(f"edge ({i},{j}) received non-positive weight")
            if not on_edge and w[i, j] != 0:
                raise GraphError(f"non-edge ({i},{j}) received weight {w[i, j]}")


def graph_preset(name: str, rule: str = "metropolis") -> MixingMatrix:
    """Construct one of the named preset graphs."""
    if name not in PRESET_GRAPHS:
        raise GraphError(f"unknown graph preset {name!r}; available: {sorted(PRESET_GRAPHS)}")
    n, edges = PRESET_GRAPHS[name]
    return build_mixing_matrix(edges, n, rule=rule)


def spectral_scalars(mixing: MixingMatrix) -> tuple[float, float]:
    """Return (rho_w, lambda_wi) of a validated mixing matrix."""
    return mixing.rho_w, mixing.lambda_wi


def lazy_mix(mixing: MixingMatrix, gamma: float) -> np.ndarray:
    """(1 - gamma) I + gamma W for gamma in (0, 1]; stays doubly stochastic."""
    if not (0.0 < gamma <= 1.0):
        raise GraphError(f"gamma must lie in (0, 1], got {gamma}")
    return (1.0 - gamma) * np.eye(mixing.n) + gamma * mixing.weights
