"""Rooted subgraph extraction, distance features, and boundary edge profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, build_graph

__all__ = [
    "RootedSubgraph",
    "DEConfig",
    "EdgeConfiguration",
    "extract_rooted",
    "resistance_vector",
    "resistance_to_root",
    "distance_encoding",
    "encoded_width",
    "edge_configuration",
]

BASE_FEATURE_POLICIES = ("keep_original", "constant_one")

# eigenvalues below this are treated as the Laplacian nullspace
_EIG_CUTOFF = 1e-10


@dataclass(frozen=True)
class RootedSubgraph:
    """Induced subgraph of everything within ``height`` hops of a root.

    Local node order is (distance to root, original id), so the root is
    always local index 0 and extraction is deterministic. ``graph`` is the
    induced subgraph over local indices; ``origin_nodes[i]`` is the original
    id of local node i; ``dist_to_root[i]`` its hop distance.
    """

    origin_nodes: tuple[int, ...]
    root_local: int
    graph: Graph
    dist_to_root: tuple[int, ...]
    height: int


@dataclass(frozen=True)
class DEConfig:
    """Per-subgraph node feature recipe.

    The base channel is always present: original rows under
    ``keep_original`` (falling back to a constant 1 when the graph has no
    features), or a constant 1 under ``constant_one``. ``use_spd`` appends a
    one-hot hop distance of width height+2 (0..height plus an overflow
    bucket); ``use_resistance`` appends the root-to-node effective
    resistance as a raw scalar.
    """

    use_spd: bool = False
    use_resistance: bool = False
    base_feature_policy: str = "keep_original"

    def __post_init__(self):
        if self.base_feature_policy not in BASE_FEATURE_POLICIES:
            raise ValueError(
                f"base_feature_policy must be one of {BASE_FEATURE_POLICIES}"
            )


@dataclass(frozen=True)
class EdgeConfiguration:
    """counts[i-1] = number of hop-(k+1) nodes with exactly i edges from hop k."""

    counts: tuple[int, ...]
    k: int


def _bfs_distances(g: Graph, v: int, limit: int | None = None) -> np.ndarray:
    """Hop distances from v, -1 where unreached; stops past ``limit`` hops."""
    indptr, indices = g.adjacency()
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[v] = 0
    frontier = np.asarray([v], dtype=np.int64)
    depth = 0
    while frontier.size and (limit is None or depth < limit):
        depth += 1
        nbrs = np.concatenate([indices[indptr[u] : indptr[u + 1]] for u in frontier])
        nbrs = np.unique(nbrs)
        frontier = nbrs[dist[nbrs] < 0]
        dist[frontier] = depth
    return dist


def extract_rooted(g: Graph, v: int, h: int) -> RootedSubgraph:
    """BFS to depth h around v and induce the subgraph on the reached nodes."""
    if not 0 <= v < g.num_nodes:
        raise ValueError(f"root {v} out of range for {g.num_nodes} nodes")
    if h < 0:
        raise ValueError("height must be >= 0")
    dist = _bfs_distances(g, v, limit=h)
    members = np.flatnonzero(dist >= 0)
    members = members[np.lexsort((members, dist[members]))]
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[members] = np.arange(members.size)
    edges = []
    for u, w in g.edges:
        lu, lw = local[u], local[w]
        if lu >= 0 and lw >= 0:
            edges.append((int(lu), int(lw)))
    feats = None if g.node_features is None else g.node_features[members]
    efeats = None
    if g.edge_features is not None:
        efeats = {}
        for (u, w), vec in g.edge_features.items():
            lu, lw = local[u], local[w]
            if lu >= 0 and lw >= 0:
                key = (int(lu), int(lw)) if lu < lw else (int(lw), int(lu))
                efeats[key] = vec
    sub = build_graph(members.size, edges, feats, efeats)
    return RootedSubgraph(
        origin_nodes=tuple(int(x) for x in members),
        root_local=0,
        graph=sub,
        dist_to_root=tuple(int(x) for x in dist[members]),
        height=h,
    )


def resistance_to_root(n: int, edges, root: int) -> np.ndarray:
    """Effective resistance from ``root`` to every node, unit resistors.

    Computed from the Moore-Penrose pseudoinverse of the graph Laplacian via
    dense symmetric eigendecomposition, eigenvalues below 1e-10 treated as
    the nullspace: R(a, b) = L+[a,a] + L+[b,b] - 2 L+[a,b].
    """
    lap = np.zeros((n, n), dtype=np.float64)
    for u, v in edges:
        lap[u, u] += 1.0
        lap[v, v] += 1.0
        lap[u, v] -= 1.0
        lap[v, u] -= 1.0
    w, q = np.linalg.eigh(lap)
    inv = np.where(w > _EIG_CUTOFF, 1.0 / np.where(w > _EIG_CUTOFF, w, 1.0), 0.0)
    pinv = (q * inv) @ q.T
    d = np.diag(pinv)
    r = np.maximum(d[root] + d - 2.0 * pinv[root], 0.0)
    r[root] = 0.0
    return r


def resistance_vector(sub: RootedSubgraph) -> np.ndarray:
    """Root-to-node effective resistances of a rooted subgraph.

    BFS extraction guarantees the subgraph is connected, so the Laplacian
    nullspace is 1-D and every entry is finite.
    """
    return resistance_to_root(sub.graph.num_nodes, sub.graph.edges, sub.root_local)


def encoded_width(cfg: DEConfig, height: int, base_dim: int = 1) -> int:
    """Feature width produced by :func:`distance_encoding`."""
    width = base_dim
    if cfg.use_spd:
        width += height + 2
    if cfg.use_resistance:
        width += 1
    return width


def distance_encoding(sub: RootedSubgraph, cfg: DEConfig) -> np.ndarray:
    """Per-node feature rows for the subgraph: base | SPD one-hot | resistance.

    The same original node can receive different rows in different rooted
    subgraphs, since distances are measured to this subgraph's root.
    """
    n = sub.graph.num_nodes
    if cfg.base_feature_policy == "keep_original" and sub.graph.node_features is not None:
        base = sub.graph.node_features
    else:
        base = np.ones((n, 1), dtype=np.float64)
    blocks = [base]
    if cfg.use_spd:
        onehot = np.zeros((n, sub.height + 2), dtype=np.float64)
        idx = np.minimum(np.asarray(sub.dist_to_root), sub.height + 1)
        onehot[np.arange(n), idx] = 1.0
        blocks.append(onehot)
    if cfg.use_resistance:
        blocks.append(resistance_vector(sub)[:, None])
    return np.hstack(blocks)


def edge_configuration(g: Graph, v: int, k: int) -> EdgeConfiguration:
    """Count hop-(k+1) nodes by how many edges they receive from hop-k nodes.

    Hop sets are taken in the full graph. Empty counts when there is no
    hop-(k+1) layer.
    """
    if not 0 <= v < g.num_nodes:
        raise ValueError(f"node {v} out of range for {g.num_nodes} nodes")
    if k < 0:
        raise ValueError("k must be >= 0")
    dist = _bfs_distances(g, v, limit=k + 1)
    outer = np.flatnonzero(dist == k + 1)
    if outer.size == 0:
        return EdgeConfiguration((), k)
    per_node = [int(np.count_nonzero(dist[g.neighbors(u)] == k)) for u in outer]
    counts = np.bincount(per_node)[1:]  # a node in hop k+1 has >= 1 such edge
    return EdgeConfiguration(tuple(int(c) for c in counts), k)
