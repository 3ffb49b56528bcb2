"""Interaction graphs, Laplacians and per-round mixing matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

CONNECTIVITY_TOL = 1e-10

# Connected 5-agent graph (ring plus one chord) used as the default network.
PRESETS: dict[str, tuple[int, tuple[tuple[int, int], ...]]] = {
    "five-agent": (5, ((0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2))),
}


class TopologyError(ValueError):
    pass


class DisconnectedGraphError(TopologyError):
    """Raised when the interaction graph has more than one component.

    ``components`` lists the node sets of every component, largest first.
    """

    def __init__(self, components: list[list[int]]):
        self.components = components
        detail = "; ".join(str(c) for c in components)
        super().__init__(f"graph is disconnected: components {detail}")


class StabilityError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """Symmetric, zero-diagonal coupling weights of a connected undirected graph."""

    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise TopologyError(f"weight matrix must be square, got shape {W.shape}")
        if not np.all(np.isfinite(W)) or np.any(W < 0):
            raise TopologyError("weights must be finite and nonnegative")
        if not np.array_equal(W, W.T):
            raise TopologyError("weight matrix must be symmetric")
        if np.any(np.diag(W) != 0):
            raise TopologyError("self-coupling weights must be zero")
        _check_connected(W > 0)
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """Weighted degrees d_ii = sum_j w_ij."""
        return self.W.sum(axis=1)

    def neighbors(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.W[i] > 0)]

    def edges(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.W > 0))
        return [(int(i), int(j)) for i, j in zip(rows, cols)]


def _components(adjacency: np.ndarray) -> list[list[int]]:
    n, labels = connected_components(adjacency.astype(np.int8), directed=False)
    comps = [sorted(np.flatnonzero(labels == c).tolist()) for c in range(n)]
    return sorted(comps, key=lambda c: (-len(c), c[0]))


def _check_connected(adjacency: np.ndarray) -> None:
    if adjacency.shape[0] == 0:
        raise TopologyError("graph must have at least one agent")
    comps = _components(adjacency)
    if len(comps) > 1:
        raise DisconnectedGraphError(comps)


def adjacency_from_edges(m: int, edges: Iterable[Sequence[int]]) -> np.ndarray:
    """Boolean symmetric adjacency matrix for an undirected edge list."""
    A = np.zeros((m, m), dtype=bool)
    for edge in edges:
        i, j = (int(v) for v in edge)
        if not (0 <= i < m and 0 <= j < m):
            raise TopologyError(f"edge ({i}, {j}) out of range for {m} agents")
        if i == j:
            raise TopologyError(f"self-loop at agent {i}")
        A[i, j] = A[j, i] = True
    return A


def build_metropolis(adjacency) -> Topology:
    """Metropolis weights w_ij = 1 / (1 + max(deg_i, deg_j)) on each edge.

    Parameters
    ----------
    adjacency : array_like of bool, shape (m, m)
        Symmetric adjacency with an empty diagonal.

    Returns
    -------
    Topology

    Raises
    ------
    DisconnectedGraphError
        If the graph has more than one connected component.
    """
    A = np.asarray(adjacency, dtype=bool)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise TopologyError(f"adjacency must be square, got shape {A.shape}")
    if not np.array_equal(A, A.T):
        raise TopologyError("adjacency must be symmetric")
    if np.any(np.diag(A)):
        raise TopologyError("adjacency must have a zero diagonal")
    _check_connected(A)
    deg = A.sum(axis=1)
    W = np.where(A, 1.0 / (1.0 + np.maximum.outer(deg, deg)), 0.0)
    return Topology(W)


def from_edges(m: int, edges: Iterable[Sequence[int]]) -> Topology:
    return build_metropolis(adjacency_from_edges(m, edges))


def preset(name: str) -> Topology:
    try:
        m, edges = PRESETS[name]
    except KeyError:
        raise TopologyError(f"unknown topology preset {name!r}; known: {sorted(PRESETS)}") from None
    return from_edges(m, edges)


def ring(m: int) -> Topology:
    if m < 2:
        raise TopologyError("a ring needs at least 2 agents")
    return from_edges(m, [(i, (i + 1) % m) for i in range(m)])


def laplacian(t: Topology) -> np.ndarray:
    """L = D - W; every row sums to zero."""
    return np.diag(t.degrees) - t.W


def algebraic_connectivity(t: Topology) -> float:
    """Second smallest Laplacian eigenvalue (dense symmetric eigensolve)."""
    if t.m < 2:
        raise TopologyError("algebraic connectivity needs at least 2 agents")
    rho = float(np.linalg.eigvalsh(laplacian(t))[1])
    if rho <= CONNECTIVITY_TOL:
        raise DisconnectedGraphError(_components(t.W > 0))
    return rho


def mixing_matrix(t: Topology, eps: float) -> np.ndarray:
    """Per-round averaging operator I - eps * L.

    Requires ``eps * max_i d_ii <= 1`` so the result is entrywise nonnegative
    and doubly stochastic.
    """
    if eps < 0:
        raise StabilityError(f"step size must be nonnegative, got {eps}")
    dmax = float(t.degrees.max())
    if eps * dmax > 1.0 + 1e-12:
        raise StabilityError(
            f"eps * max_i d_ii = {eps * dmax:.6g} exceeds 1 (need eps <= {1.0 / dmax:.6g})"
        )
    return np.eye(t.m) - eps * laplacian(t)
