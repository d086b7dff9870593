"""Weighted directed graphs, their Laplacians and the admissible classes.

Convention: ``weights[i, j]`` is the weight of the edge j -> i, so row i of
the Laplacian collects the in-neighbourhood of node i.  Reachability runs on
the unweighted support; weights enter only the Laplacian matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NetsyncError
from .lti import spectrum

# Density of extra edges added on top of the random spanning structure.
EXTRA_EDGE_DENSITY = 0.3


@dataclass(frozen=True)
class DiGraph:
    """Weighted digraph on nodes 1..N given by its adjacency weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if w.shape[0] != w.shape[1]:
            raise DimensionError(f"adjacency must be square, got {w.shape}")
        if np.any(np.diag(w) != 0.0):
            raise NetsyncError("self-loop forbidden: diagonal adjacency entries must be zero")
        if np.any(w < 0.0):
            raise NetsyncError("adjacency weights must be nonnegative")
        w = np.ascontiguousarray(w)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self):
        return self.weights.shape[0]

    def successors(self, j):
        """Nodes reachable from node j along one edge (0-based)."""
        return np.nonzero(self.weights[:, j] > 0.0)[0]


@dataclass(frozen=True)
class RootSet:
    """Nonempty subset of nodes that measure the reference directly."""

    members: frozenset

    def __post_init__(self):
        members = frozenset(int(i) for i in self.members)
        if not members:
            raise NetsyncError("root set must be nonempty")
        if any(i < 1 for i in members):
            raise NetsyncError("root set members are 1-based node indices")
        object.__setattr__(self, "members", members)

    def indicator(self, n):
        """0/1 vector over nodes 1..n."""
        if max(self.members) > n:
            raise DimensionError("root set member exceeds node count")
        iota = np.zeros(n)
        for i in self.members:
            iota[i - 1] = 1.0
        return iota


def laplacian(g: DiGraph):
    """Graph Laplacian: row sums zero, off-diagonal -a_ij."""
    w = g.weights
    lap = -w.copy()
    np.fill_diagonal(lap, w.sum(axis=1))
    return lap


def _reachable_from(g: DiGraph, sources):
    seen = np.zeros(g.n, dtype=bool)
    stack = list(sources)
    for s in stack:
        seen[s] = True
    while stack:
        j = stack.pop()
        for i in g.successors(j):
            if not seen[i]:
                seen[i] = True
                stack.append(i)
    return seen


def contains_spanning_tree(g: DiGraph):
    """True iff some node reaches every node along directed edges."""
    return any(bool(np.all(_reachable_from(g, [root]))) for root in range(g.n))


def is_rootset_connected(g: DiGraph, roots: RootSet):
    """True iff every node is reachable from some root-set member.

    Deliberately weaker than spanning-tree existence: a forest of trees
    rooted inside the root set qualifies.
    """
    sources = [i - 1 for i in roots.members]
    if any(s >= g.n for s in sources):
        raise DimensionError("root set member exceeds node count")
    return bool(np.all(_reachable_from(g, sources)))


def expanded_laplacian(g: DiGraph, roots: RootSet):
    """L + diag(iota); invertible with spectrum in the open RHP when the
    graph is root-set connected."""
    return laplacian(g) + np.diag(roots.indicator(g.n))


def reduced_laplacian(L):
    """(N-1)-dimensional reduction carrying exactly the nonzero spectrum.

    Entrywise: out[i, j] = L[i, j] - L[N-1, j].
    """
    lap = np.atleast_2d(np.asarray(L, dtype=float))
    n = lap.shape[0]
    if lap.shape[1] != n:
        raise DimensionError(f"Laplacian must be square, got {lap.shape}")
    if n < 2:
        return np.zeros((0, 0))
    return lap[: n - 1, : n - 1] - lap[n - 1, : n - 1]


def random_admissible_graph(n, kind="spanning_tree", seed=0, roots=None,
                            extra_edge_density=EXTRA_EDGE_DENSITY,
                            weight_range=(1.0, 1.0), acyclic_extras=False):
    """Random member of an admissible graph class, deterministic in seed.

    ``kind='spanning_tree'`` anchors every node under one random root;
    ``kind='rootset'`` grows a forest whose tree roots all lie in ``roots``
    (so the result can lack a spanning tree while staying admissible).
    Extra edges are then sprinkled with probability ``extra_edge_density``
    and weights drawn uniformly from ``weight_range``.  With
    ``acyclic_extras`` the extra edges follow the anchoring order, keeping
    the graph a DAG: the (expanded) Laplacian is then triangular in that
    order, so its eigenvalues equal the in-degree (+1 on roots) and never
    degrade with density.
    """
    if n < 1:
        raise DimensionError("need at least one node")
    rng = np.random.default_rng(seed)
    w = np.zeros((n, n))

    def draw_weight():
        lo, hi = weight_range
        if lo == hi:
            return float(lo)
        return float(rng.uniform(lo, hi))

    if kind == "spanning_tree":
        order = list(rng.permutation(n))
        for pos in range(1, n):
            parent = order[rng.integers(0, pos)]
            child = order[pos]
            w[child, parent] = draw_weight()
    elif kind == "rootset":
        if roots is None:
            raise NetsyncError("rootset class needs a RootSet")
        order = [i - 1 for i in sorted(roots.members)]
        pending = [i for i in rng.permutation(n) if i not in order]
        for child in pending:
            parent = order[rng.integers(0, len(order))]
            w[child, parent] = draw_weight()
            order.append(child)
    else:
        raise NetsyncError(f"unknown graph class {kind!r}")

    rank = {node: pos for pos, node in enumerate(order)}
    for i in range(n):
        for j in range(n):
            if i == j or w[i, j] != 0.0:
                continue
            if acyclic_extras and rank[j] > rank[i]:
                continue  # edge j -> i must follow the anchoring order
            if rng.random() < extra_edge_density:
                w[i, j] = draw_weight()

    g = DiGraph(w)
    if kind == "spanning_tree":
        assert contains_spanning_tree(g)
    else:
        assert is_rootset_connected(g, roots)
    return g


def laplacian_spectrum(g: DiGraph):
    return spectrum(laplacian(g))


def read_edge_list(text):
    """Parse the exchange format: one ``src dst weight`` triple per line.

    Node indices are 1-based; blank lines and ``#`` comments are skipped.
    Returns (edges, n) where n is the largest node index seen.
    """
    edges = []
    n = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise NetsyncError(f"edge list line {lineno}: expected 'src dst [weight]'")
        src, dst = int(parts[0]), int(parts[1])
        weight = float(parts[2]) if len(parts) == 3 else 1.0
        if src < 1 or dst < 1:
            raise NetsyncError(f"edge list line {lineno}: node indices are 1-based")
        edges.append((src, dst, weight))
        n = max(n, src, dst)
    return edges, n


def graph_from_edges(edges, n):
    """Build a DiGraph from (src, dst, weight) triples (1-based indices)."""
    w = np.zeros((n, n))
    for src, dst, weight in edges:
        if src == dst:
            raise NetsyncError("self-loop forbidden")
        w[dst - 1, src - 1] = weight
    return DiGraph(w)


def write_edge_list(g: DiGraph):
    """Serialize to the exchange format (full decimal precision)."""
    lines = []
    for i in range(g.n):
        for j in range(g.n):
            if g.weights[i, j] > 0.0:
                lines.append(f"{j + 1} {i + 1} {float(g.weights[i, j])!r}")
    return "\n".join(lines) + ("\n" if lines else "")
