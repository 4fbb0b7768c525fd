"""Undirected simple graphs: construction, generators, permutations, and I/O.

Graphs are immutable after construction; every transform returns a new value,
so instances are safe to share across threads. Generators take explicit seeds
and never touch global RNG state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Graph",
    "Permutation",
    "build_graph",
    "builtin",
    "BUILTIN_NAMES",
    "cycle_pair",
    "random_regular",
    "permute_graph",
    "brute_force_isomorphic",
    "parse_graph",
    "serialize_graph",
]

BUILTIN_NAMES = ("two_triangles", "hexagon")

# brute_force_isomorphic searches permutations; keep it honest about scale.
ISO_NODE_LIMIT = 10


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on nodes 0..num_nodes-1.

    Edges are stored canonically as a sorted tuple of (u, v) pairs with
    u < v. ``node_features`` is an optional (n, f) float array;
    ``edge_features`` an optional map from canonical edge to a 1-D float
    vector, one entry per edge. Use :func:`build_graph` to construct from
    unnormalized input.
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    node_features: np.ndarray | None = None
    edge_features: dict[tuple[int, int], np.ndarray] | None = None
    _indptr: np.ndarray = field(init=False, repr=False)
    _indices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.num_nodes
        if n < 0:
            raise ValueError("num_nodes must be non-negative")
        prev = None
        for u, v in self.edges:
            if not (0 <= u < v < n):
                raise ValueError(f"edge ({u}, {v}) violates 0 <= u < v < {n}")
            if prev is not None and (u, v) <= prev:
                raise ValueError("edges must be sorted and unique")
            prev = (u, v)
        if self.node_features is not None:
            f = self.node_features
            if f.ndim != 2 or f.shape[0] != n:
                raise ValueError(
                    f"node_features must be (n, f), got {f.shape} for n={n}"
                )
            object.__setattr__(self, "node_features", _freeze(f.astype(np.float64)))
        if self.edge_features is not None:
            ef = self.edge_features
            if set(ef) != set(self.edges):
                raise ValueError("edge_features must have exactly one vector per edge")
            widths = {np.asarray(v).shape for v in ef.values()}
            if len(widths) > 1 or any(len(s) != 1 for s in widths):
                raise ValueError("edge feature vectors must be 1-D and equal width")
            frozen = {e: _freeze(np.asarray(v, dtype=np.float64)) for e, v in ef.items()}
            object.__setattr__(self, "edge_features", frozen)
        # CSR adjacency, neighbor lists sorted: deterministic traversal order.
        if self.edges:
            e = np.asarray(self.edges, dtype=np.int64)
            src = np.concatenate([e[:, 0], e[:, 1]])
            dst = np.concatenate([e[:, 1], e[:, 0]])
            order = np.lexsort((dst, src))
            indices = dst[order]
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        else:
            indices = np.empty(0, dtype=np.int64)
            indptr = np.zeros(n + 1, dtype=np.int64)
        object.__setattr__(self, "_indptr", _freeze(indptr))
        object.__setattr__(self, "_indices", _freeze(indices))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self._indptr)

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted neighbor ids of ``v``."""
        return self._indices[self._indptr[v] : self._indptr[v + 1]]

    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR (indptr, indices) arrays of the adjacency structure."""
        return self._indptr, self._indices

    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.edges)

    # identity hashing: graphs serve as cache keys; equality stays structural
    __hash__ = object.__hash__

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if self.num_nodes != other.num_nodes or self.edges != other.edges:
            return False
        a, b = self.node_features, other.node_features
        if (a is None) != (b is None):
            return False
        if a is not None and not np.array_equal(a, b):
            return False
        a, b = self.edge_features, other.edge_features
        if (a is None) != (b is None):
            return False
        if a is not None:
            return all(np.array_equal(a[e], b[e]) for e in a)
        return True

    def __repr__(self) -> str:
        feat = "" if self.node_features is None else f", features {self.node_features.shape[1]}d"
        return f"Graph(n={self.num_nodes}, m={self.num_edges}{feat})"


@dataclass(frozen=True)
class Permutation:
    """Bijection of 0..n-1, as the array ``mapping`` with node i -> mapping[i]."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        n = len(self.mapping)
        if sorted(self.mapping) != list(range(n)):
            raise ValueError("mapping must contain each of 0..n-1 exactly once")

    def __len__(self) -> int:
        return len(self.mapping)

    def __getitem__(self, i: int) -> int:
        return self.mapping[i]

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def random(cls, n: int, seed: int) -> "Permutation":
        rng = np.random.default_rng(seed)
        return cls(tuple(int(x) for x in rng.permutation(n)))


def _normalize_edges(num_nodes: int, edges) -> tuple[tuple[int, int], ...]:
    seen = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise ValueError(f"edge ({u}, {v}) out of range for {num_nodes} nodes")
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        seen.add((u, v) if u < v else (v, u))
    return tuple(sorted(seen))


def build_graph(n, edges, node_features=None, edge_features=None) -> Graph:
    """Build a validated Graph, deduplicating edges after (u, v) -> u < v.

    Raises ValueError on out-of-range endpoints, self-loops, or feature
    shape mismatches.
    """
    norm = _normalize_edges(n, edges)
    feats = None if node_features is None else np.asarray(node_features, dtype=np.float64)
    efeats = None
    if edge_features is not None:
        efeats = {}
        for (u, v), vec in edge_features.items():
            u, v = int(u), int(v)
            key = (u, v) if u < v else (v, u)
            efeats[key] = np.asarray(vec, dtype=np.float64)
    return Graph(int(n), norm, feats, efeats)


def builtin(name: str) -> Graph:
    """Small named graphs: ``two_triangles`` and ``hexagon``.

    Both are 2-regular with 6 nodes and 6 edges; they are non-isomorphic but
    1-WL cannot tell them apart, which makes them the canonical smoke-test
    pair for anything claiming more than 1-WL power.
    """
    if name == "two_triangles":
        return build_graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    if name == "hexagon":
        return build_graph(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)])
    raise ValueError(f"unknown builtin graph {name!r}; choose from {BUILTIN_NAMES}")


def cycle_pair(k: int) -> tuple[Graph, Graph]:
    """Two disjoint k-cycles vs. one 2k-cycle, both on 2k nodes.

    Both graphs are 2-regular with identical degree sequences, so 1-WL cannot
    separate them; connectivity differs, so they are never isomorphic.
    cycle_pair(3) is exactly (two_triangles, hexagon).
    """
    if k < 3:
        raise ValueError("k must be at least 3")
    two = [(i, (i + 1) % k) for i in range(k)]
    two += [(k + i, k + (i + 1) % k) for i in range(k)]
    one = [(i, (i + 1) % (2 * k)) for i in range(2 * k)]
    return build_graph(2 * k, two), build_graph(2 * k, one)


def random_regular(n: int, r: int, seed: int) -> Graph:
    """Uniform-ish random simple r-regular graph via the pairing model.

    Draws a perfect matching on n*r stubs and restarts the whole sample
    whenever it contains a self-loop or a duplicate edge. Acceptance
    probability is fine for r <= 5 at desk scale. Deterministic given seed.
    """
    if n < 0 or r < 0:
        raise ValueError("n and r must be non-negative")
    if r >= n and not (n == 0 and r == 0):
        raise ValueError(f"need r < n, got r={r}, n={n}")
    if (n * r) % 2 != 0:
        raise ValueError(f"n*r must be even, got n={n}, r={r}")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n, dtype=np.int64), r)
    while True:
        rng.shuffle(stubs)
        u = np.minimum(stubs[0::2], stubs[1::2])
        v = np.maximum(stubs[0::2], stubs[1::2])
        if np.any(u == v):
            continue
        key = u * n + v
        if np.unique(key).size != key.size:
            continue
        return build_graph(n, zip(u.tolist(), v.tolist()))


def permute_graph(g: Graph, p: Permutation) -> Graph:
    """Relabel node i as p[i]; edges and features move consistently."""
    if len(p) != g.num_nodes:
        raise ValueError(f"permutation length {len(p)} != num_nodes {g.num_nodes}")
    edges = [(p[u], p[v]) for u, v in g.edges]
    feats = None
    if g.node_features is not None:
        feats = np.empty_like(g.node_features)
        feats[list(p.mapping)] = g.node_features
    efeats = None
    if g.edge_features is not None:
        efeats = {(p[u], p[v]): vec for (u, v), vec in g.edge_features.items()}
    return build_graph(g.num_nodes, edges, feats, efeats)


def brute_force_isomorphic(g1: Graph, g2: Graph) -> bool:
    """Exact structural isomorphism by backtracking search (features ignored).

    Size mismatch returns False without searching; graphs larger than
    ISO_NODE_LIMIT nodes are rejected with an error.
    """
    if g1.num_nodes != g2.num_nodes:
        return False
    n = g1.num_nodes
    if n > ISO_NODE_LIMIT:
        raise ValueError(f"brute-force isomorphism is limited to n <= {ISO_NODE_LIMIT}")
    if g1.num_edges != g2.num_edges:
        return False
    deg1 = [len(g1.neighbors(v)) for v in range(n)]
    deg2 = [len(g2.neighbors(v)) for v in range(n)]
    if sorted(deg1) != sorted(deg2):
        return False
    adj1 = [set(g1.neighbors(v).tolist()) for v in range(n)]
    adj2 = [set(g2.neighbors(v).tolist()) for v in range(n)]
    # high-degree nodes first: prunes the search tree early
    order = sorted(range(n), key=lambda v: -deg1[v])
    mapping = [-1] * n
    used = [False] * n

    def extend(i: int) -> bool:
        if i == n:
            return True
        v = order[i]
        for w in range(n):
            if used[w] or deg2[w] != deg1[v]:
                continue
            ok = True
            for u in order[:i]:
                if (u in adj1[v]) != (mapping[u] in adj2[w]):
                    ok = False
                    break
            if not ok:
                continue
            mapping[v] = w
            used[w] = True
            if extend(i + 1):
                return True
            mapping[v] = -1
            used[w] = False
        return False

    return extend(0)


def serialize_graph(g: Graph) -> str:
    """Edge-list text: "n m", m lines "u v", optional "F f" + n feature rows.

    Floats are written with repr so parse(serialize(g)) round-trips exactly.
    Edge features have no representation in this format and raise.
    """
    if g.edge_features is not None:
        raise ValueError("edge features are not representable in the edge-list format")
    lines = [f"{g.num_nodes} {g.num_edges}"]
    lines += [f"{u} {v}" for u, v in g.edges]
    if g.node_features is not None:
        f = g.node_features.shape[1]
        lines.append(f"F {f}")
        for row in g.node_features:
            lines.append(" ".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> Graph:
    """Inverse of :func:`serialize_graph`. Raises ValueError on malformed input."""
    lines = [ln for ln in text.split("\n") if ln.strip() != ""]
    if not lines:
        raise ValueError("empty graph text")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"malformed header {lines[0]!r}; expected 'n m'")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError as exc:
        raise ValueError(f"malformed header {lines[0]!r}") from exc
    if len(lines) < 1 + m:
        raise ValueError(f"expected {m} edge lines, found {len(lines) - 1}")
    edges = []
    for ln in lines[1 : 1 + m]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"malformed edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    feats = None
    rest = lines[1 + m :]
    if rest:
        head = rest[0].split()
        if len(head) != 2 or head[0] != "F":
            raise ValueError(f"unexpected trailing content {rest[0]!r}")
        f = int(head[1])
        if len(rest) != 1 + n:
            raise ValueError(f"expected {n} feature rows, found {len(rest) - 1}")
        rows = []
        for ln in rest[1:]:
            vals = [float(x) for x in ln.split()]
            if len(vals) != f:
                raise ValueError(f"feature row width {len(vals)} != declared {f}")
            rows.append(vals)
        feats = np.asarray(rows, dtype=np.float64).reshape(n, f)
    g = build_graph(n, edges, feats)
    if g.num_edges != m:
        raise ValueError("duplicate or self-loop edges in edge list")
    return g
