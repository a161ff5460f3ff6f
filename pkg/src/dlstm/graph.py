"""Communication topology between agents and the consensus mixing matrix."""

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GraphTopology:
    """Undirected simple graph on agents ``0 .. n_agents - 1``.

    ``edges`` holds sorted ``(i, j)`` pairs with ``i < j``; use
    :func:`build_topology` rather than constructing this directly.
    """

    n_agents: int
    edges: tuple

    def adjacency(self):
        A = np.zeros((self.n_agents, self.n_agents), dtype=int)
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1
        return A

    def degrees(self):
        return self.adjacency().sum(axis=1)

    def neighbors(self, i):
        return [j for j in range(self.n_agents) if self.adjacency()[i, j]]


def build_topology(n_agents, edges=()):
    """Validate and normalize an edge list.

    Duplicate edges (in either orientation) collapse to one.
    """
    n_agents = int(n_agents)
    if n_agents < 1:
        raise ValueError("a topology needs at least one agent")
    normalized = set()
    for edge in edges:
        i, j = (int(v) for v in edge)
        for v in (i, j):
            if not 0 <= v < n_agents:
                raise ValueError(f"agent index {v} out of range [0, {n_agents})")
        if i == j:
            raise ValueError(f"self-loop on agent {i}")
        normalized.add((min(i, j), max(i, j)))
    return GraphTopology(n_agents, tuple(sorted(normalized)))


def named_topology(name, n_agents):
    """``ring``, ``path``, ``complete`` or ``star`` (hub is agent 0)."""
    n = int(n_agents)
    if name == "ring":
        if n <= 2:
            edges = [(i, i + 1) for i in range(n - 1)]
        else:
            edges = [(i, (i + 1) % n) for i in range(n)]
    elif name == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif name == "complete":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    elif name == "star":
        edges = [(0, j) for j in range(1, n)]
    else:
        raise ValueError(f"unknown topology {name!r}; expected ring, path, complete or star")
    return build_topology(n, edges)


def laplacian(g):
    """Graph Laplacian ``D - A`` as an integer matrix."""
    A = g.adjacency()
    return np.diag(A.sum(axis=1)) - A


def is_connected(g):
    """Breadth-first reachability from agent 0."""
    A = g.adjacency()
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(A[i]):
            if j not in seen:
                seen.add(int(j))
                queue.append(int(j))
    return len(seen) == g.n_agents


def metropolis_weights(g):
    """Metropolis-Hastings mixing matrix for a connected graph.

    Each edge gets ``1 / (1 + max(deg_i, deg_j))`` and the diagonal absorbs
    the remainder, so the matrix is symmetric, nonnegative, doubly stochastic
    and zero off the graph's edges.
    """
    if not is_connected(g):
        raise ValueError("metropolis weights need a connected graph")
    deg = g.degrees()
    W = np.zeros((g.n_agents, g.n_agents))
    for i, j in g.edges:
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    W[np.diag_indices_from(W)] = 1.0 - W.sum(axis=1)
    return W


def contraction_factor(W, tol=1e-10, max_iter=10_000, seed=0):
    """Second-largest eigenvalue magnitude of a symmetric doubly stochastic matrix.

    Power iteration restricted to the complement of the all-ones vector: the
    iterate is re-centred (mean removed) every step so the consensus direction
    never re-enters through round-off. The estimate is ``||W v||`` for unit
    ``v``, which converges to the largest magnitude even when ``+lambda`` and
    ``-lambda`` are both present.

    Raises
    ------
    RuntimeError
        If the estimate has not settled to ``tol`` within ``max_iter`` steps.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if n == 1:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(n)
    v -= v.mean()
    v /= np.linalg.norm(v)
    estimate = None
    for _ in range(max_iter):
        w = W @ v
        w -= w.mean()
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0
        if estimate is not None and abs(norm - estimate) < tol:
            return float(norm)
        estimate = norm
        v = w / norm
    raise RuntimeError(f"power iteration did not converge after {max_iter} iterations")
