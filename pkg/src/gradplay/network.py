"""Communication graphs and doubly stochastic mixing matrices.

The mixing matrix ``W`` drives consensus: it is nonnegative, its sparsity
pattern matches the graph's edges (plus a positive diagonal), and its row
and column sums are 1.  Its effectiveness is measured by ``sigma``, the
largest singular value of ``W - (1/n) 11^T``: applying ``W`` shrinks the
disagreement of any vector with its mean by at least that factor.

The shipped construction is the Metropolis rule, which is symmetric and
doubly stochastic on any connected graph.  ``sigma`` lies in ``[0, 1)`` for
connected graphs; 0 occurs only for exact averaging (e.g. the Metropolis
matrix of the 2-node complete graph).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DisconnectedGraphError

__all__ = [
    "Graph",
    "MixingMatrix",
    "random_tree",
    "ring",
    "complete",
    "star",
    "metropolis_weights",
    "second_largest_singular_value",
    "average_property_check",
    "graph_to_edgelist",
    "graph_from_edgelist",
    "save_graph",
    "load_graph",
    "save_mixing_matrix",
]


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0 .. n-1``.

    Edges are stored as sorted ``(i, j)`` pairs with ``i < j``.  The named
    constructors in this module always produce connected graphs; a raw
    ``Graph`` may be disconnected, and consumers that need connectivity
    (e.g. :func:`metropolis_weights`) check :meth:`is_connected` themselves.
    """

    n: int
    edges: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        normalized = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop ({i}, {j}) not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(normalized)))

    def neighbors(self, i: int) -> tuple:
        return tuple(
            sorted(j if u == i else u for u, j in self.edges if i in (u, j))
        )

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n


@dataclass(frozen=True)
class MixingMatrix:
    """A doubly stochastic weight matrix together with its contraction factor.

    ``sigma`` is the second largest singular value of ``w`` (equivalently the
    top singular value of the deflated matrix ``w - (1/n) 11^T``).  The
    constructor enforces double stochasticity to 1e-12 and ``sigma < 1``;
    ``sigma = 0`` is admitted as the perfect-mixing boundary case.
    """

    w: np.ndarray
    sigma: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"mixing matrix must be square, got shape {w.shape}")
        if np.any(w < 0):
            raise ValueError("mixing matrix entries must be nonnegative")
        row_err = float(np.max(np.abs(w.sum(axis=1) - 1.0)))
        col_err = float(np.max(np.abs(w.sum(axis=0) - 1.0)))
        if max(row_err, col_err) > 1e-12:
            raise ValueError(
                f"matrix is not doubly stochastic: row error {row_err:.3e}, "
                f"column error {col_err:.3e} (tolerance 1e-12)"
            )
        if not 0.0 <= self.sigma < 1.0:
            raise ValueError(
                f"sigma={self.sigma!r} outside [0, 1): the graph cannot be "
                "connected (or the matrix does not mix)"
            )
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "sigma", float(self.sigma))

    @classmethod
    def from_matrix(cls, w: np.ndarray) -> "MixingMatrix":
        """Wrap an existing doubly stochastic matrix, computing sigma."""
        return cls(w=np.asarray(w, dtype=float), sigma=second_largest_singular_value(w))

    @property
    def n(self) -> int:
        return self.w.shape[0]


def random_tree(n: int, seed: int) -> Graph:
    """Random spanning tree on ``n`` nodes, deterministic in ``seed``.

    Node ``k`` (k = 1 .. n-1) attaches to a uniformly random earlier node,
    which guarantees connectivity with exactly ``n - 1`` edges.
    """
    if n < 2:
        raise ValueError(f"tree needs n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    edges = [(int(rng.integers(0, k)), k) for k in range(1, n)]
    return Graph(n=n, edges=tuple(edges))


def ring(n: int) -> Graph:
    if n < 3:
        raise ValueError(f"ring needs n >= 3, got {n}")
    return Graph(n=n, edges=tuple((k, (k + 1) % n) for k in range(n)))


def complete(n: int) -> Graph:
    if n < 2:
        raise ValueError(f"complete graph needs n >= 2, got {n}")
    return Graph(n=n, edges=tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def star(n: int) -> Graph:
    """Star with center node 0."""
    if n < 2:
        raise ValueError(f"star needs n >= 2, got {n}")
    return Graph(n=n, edges=tuple((0, k) for k in range(1, n)))


def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis mixing matrix of a connected graph.

    ``w_ij = 1 / (1 + max(deg_i, deg_j))`` on edges, diagonal filled so each
    row sums to 1.  The result is symmetric, doubly stochastic, has a
    strictly positive diagonal, and its off-diagonal support is exactly the
    edge set.

    On a complete graph every weight is ``1/n``, i.e. exact averaging; its
    true ``sigma`` is 0 but floating rounding reports ~1e-16, so values at
    rounding level are snapped to exactly 0 to make the perfect-mixing
    boundary case deterministic.
    """
    if not g.is_connected():
        raise DisconnectedGraphError(
            "metropolis_weights requires a connected graph"
        )
    deg = g.degrees
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(g.n):
        w[i, i] = 1.0 - float(np.sum(w[i]))
    sigma = second_largest_singular_value(w)
    if sigma < 1e-12:
        sigma = 0.0
    return MixingMatrix(w=w, sigma=sigma)


def second_largest_singular_value(w: np.ndarray) -> float:
    """Second largest singular value of a doubly stochastic matrix.

    Computed as the largest singular value of ``w - (1/n) 11^T``; this is the
    exact contraction factor of disagreement under one application of ``w``,
    and for symmetric ``w`` it equals the largest absolute eigenvalue on the
    subspace orthogonal to the all-ones vector.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {w.shape}")
    n = w.shape[0]
    deflated = w - np.full((n, n), 1.0 / n)
    return float(np.linalg.svd(deflated, compute_uv=False)[0])


def average_property_check(w: MixingMatrix, x: np.ndarray):
    """Both sides of the averaging contraction for one vector.

    Returns ``(lhs, rhs) = (||W x - 1 xbar||, sigma * ||x - 1 xbar||)``;
    the mixing property asserts ``lhs <= rhs`` (up to rounding).
    """
    x = np.asarray(x, dtype=float)
    n = w.n
    if x.shape != (n,):
        raise ValueError(f"x has shape {x.shape}, expected ({n},)")
    xbar = float(np.mean(x))
    lhs = float(np.linalg.norm(w.w @ x - xbar))
    rhs = w.sigma * float(np.linalg.norm(x - xbar))
    return lhs, rhs


def graph_to_edgelist(g: Graph) -> str:
    """Edge-list text: one ``i j`` pair per line, 1-indexed."""
    return "".join(f"{i + 1} {j + 1}\n" for i, j in g.edges)


def graph_from_edgelist(text: str, n: int | None = None) -> Graph:
    """Parse a 1-indexed edge-list; node count defaults to the largest index."""
    edges = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"malformed edge line: {line!r}")
        i, j = int(parts[0]) - 1, int(parts[1]) - 1
        edges.append((i, j))
    if n is None:
        if not edges:
            raise ValueError("empty edge list and no node count given")
        n = max(max(e) for e in edges) + 1
    return Graph(n=n, edges=tuple(edges))


def save_graph(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(graph_to_edgelist(g))


def load_graph(path, n: int | None = None) -> Graph:
    with open(path, "r", encoding="utf-8") as f:
        return graph_from_edgelist(f.read(), n=n)


def save_mixing_matrix(w: MixingMatrix, path) -> None:
    """Dense CSV, row-major, shortest round-trip decimal per entry."""
    with open(path, "w", encoding="utf-8") as f:
        for row in w.w:
            f.write(",".join(repr(float(v)) for v in row))
            f.write("\n")
