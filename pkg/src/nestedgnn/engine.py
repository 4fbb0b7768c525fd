"""GIN-style message passing, plain and nested forward passes, pooling.

The nested forward implements two-level message passing: a shared-parameter
base network runs independently inside every node's rooted subgraph, a
subgraph pooling stage turns each subgraph into its root's final
representation, and a graph pooling stage reduces those to one vector.

Message/update functions are instantiated as GIN (sum aggregation + MLP):
h_v <- MLP_t((1 + eps_t) * h_v + sum_{u in N(v)} h_u), all nodes updated
simultaneously from pre-update states. Summation order is fixed (ascending
local node id) so results are reproducible.

Internally all rooted subgraphs of a graph are flattened into one disjoint
union and processed in a single vectorized pass; ``base_forward`` over a
single extracted subgraph is the reference semantics the batched path must
match.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graphs import Graph
from .subgraphs import (
    DEConfig,
    RootedSubgraph,
    distance_encoding,
    encoded_width,
    resistance_to_root,
)

__all__ = [
    "NGNNConfig",
    "LayerParams",
    "ModelParams",
    "GraphEmbedding",
    "UnsupportedFeatureError",
    "init_params",
    "message_pass",
    "base_forward",
    "forward",
    "reps_distinguish",
    "DEFAULT_TOL",
]

SUBGRAPH_POOLS = ("mean", "sum", "center")
GRAPH_POOLS = ("mean", "sum")
MODES = ("nested", "plain")

# operationalization of "machine accuracy" for representation comparison
DEFAULT_TOL = 1e-6


class UnsupportedFeatureError(ValueError):
    """Raised when a graph carries inputs the engine does not consume."""


@dataclass(frozen=True)
class NGNNConfig:
    """Architecture hyperparameters.

    ``layers=None`` resolves to height + 1, the depth that lets even the
    root-only (center) pooling see the whole subgraph. ``subgraph_pool`` is
    ignored in plain mode; distance encoding applies only in nested mode.
    """

    height: int = 3
    layers: int | None = None
    hidden_dim: int = 16
    subgraph_pool: str = "mean"
    graph_pool: str = "mean"
    de: DEConfig = DEConfig()
    mode: str = "nested"

    def __post_init__(self):
        if self.height < 1:
            raise ValueError("height must be >= 1")
        if self.layers is not None and self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.subgraph_pool not in SUBGRAPH_POOLS:
            raise ValueError(f"subgraph_pool must be one of {SUBGRAPH_POOLS}")
        if self.graph_pool not in GRAPH_POOLS:
            raise ValueError(f"graph_pool must be one of {GRAPH_POOLS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @property
    def num_layers(self) -> int:
        return self.height + 1 if self.layers is None else self.layers


@dataclass(frozen=True)
class LayerParams:
    """One GIN layer: scalar epsilon and a two-layer ReLU MLP."""

    epsilon: float
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]


@dataclass(frozen=True)
class ModelParams:
    """Per-layer parameters, shared across all rooted subgraphs."""

    layers: tuple[LayerParams, ...]

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def hidden_dim(self) -> int:
        return self.layers[-1].out_dim


@dataclass(frozen=True)
class GraphEmbedding:
    """Final per-node representations and the pooled whole-graph vector."""

    node_reps: np.ndarray
    graph_rep: np.ndarray


def init_params(cfg: NGNNConfig, seed: int, base_feature_dim: int = 1) -> ModelParams:
    """Glorot-uniform weights ([-a, a], a = sqrt(6/(fan_in+fan_out))),
    zero biases and epsilons. Deterministic given seed.

    The first layer's input width is the base feature width plus the
    distance-encoding channels (nested mode only).
    """
    if base_feature_dim < 1:
        raise ValueError("base_feature_dim must be >= 1")
    rng = np.random.default_rng(seed)
    if cfg.mode == "nested":
        in_dim = encoded_width(cfg.de, cfg.height, base_feature_dim)
    else:
        in_dim = base_feature_dim
    hid = cfg.hidden_dim
    layers = []
    for t in range(cfg.num_layers):
        d = in_dim if t == 0 else hid
        layers.append(
            LayerParams(
                epsilon=0.0,
                w1=_glorot(rng, d, hid),
                b1=np.zeros(hid),
                w2=_glorot(rng, hid, hid),
                b2=np.zeros(hid),
            )
        )
    return ModelParams(tuple(layers))


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def _csr(g: Graph) -> sp.csr_matrix:
    indptr, indices = g.adjacency()
    data = np.ones(indices.shape[0], dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(g.num_nodes, g.num_nodes))


def message_pass(g: Graph, feats: np.ndarray, layer: LayerParams) -> np.ndarray:
    """One GIN update on ``g``: MLP((1+eps) * h_v + sum of neighbor rows)."""
    feats = np.asarray(feats, dtype=np.float64)
    if feats.shape != (g.num_nodes, layer.in_dim):
        raise ValueError(
            f"feature shape {feats.shape} does not match ({g.num_nodes}, {layer.in_dim})"
        )
    s = (1.0 + layer.epsilon) * feats + _csr(g) @ feats
    return np.maximum(s @ layer.w1 + layer.b1, 0.0) @ layer.w2 + layer.b2


# ---------------------------------------------------------------------------
# prepared computations (parameter-independent structure, reusable per graph)
# ---------------------------------------------------------------------------


@dataclass
class PreparedGraph:
    """Input rows plus adjacency for one forward pass.

    In nested mode the rows are all rooted subgraphs stacked into a disjoint
    union; ``offsets`` delimits the block of rows belonging to each root
    (block row 0 is the root itself, blocks ordered by root id).
    """

    feats: np.ndarray
    adj: sp.csr_matrix
    num_roots: int
    offsets: np.ndarray | None = None  # (num_roots + 1,), nested only
    sizes: np.ndarray | None = None  # (num_roots,), nested only

    @property
    def nested(self) -> bool:
        return self.offsets is not None

    @property
    def max_subgraph_size(self) -> int:
        return int(self.sizes.max()) if self.nested else self.feats.shape[0]


def _base_rows(g: Graph, de: DEConfig | None) -> np.ndarray:
    if de is not None and de.base_feature_policy == "constant_one":
        return np.ones((g.num_nodes, 1), dtype=np.float64)
    if g.node_features is not None:
        return g.node_features
    return np.ones((g.num_nodes, 1), dtype=np.float64)


def _bfs_ball(indptr, indices, visited, v: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Members and hop distances of the radius-h ball around v.

    Members come out in (distance, node id) order. ``visited`` is a reusable
    all-False boolean scratch buffer; it is restored before returning.
    Total work is proportional to the edges inside the ball, which keeps
    whole-graph extraction at O(n * c * d).
    """
    hops = [np.asarray([v], dtype=np.int64)]
    visited[v] = True
    frontier = hops[0]
    for _ in range(h):
        starts = indptr[frontier]
        counts = indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        cum = np.cumsum(counts)
        flat = np.arange(total, dtype=np.int64) + np.repeat(starts - (cum - counts), counts)
        nbrs = indices[flat]
        fresh = nbrs[~visited[nbrs]]
        if fresh.size == 0:
            break
        frontier = np.unique(fresh)
        visited[frontier] = True
        hops.append(frontier)
    members = np.concatenate(hops)
    dists = np.repeat(
        np.arange(len(hops), dtype=np.int64),
        np.asarray([hp.size for hp in hops], dtype=np.int64),
    )
    visited[members] = False
    return members, dists


def prepare_graph(g: Graph, cfg: NGNNConfig) -> PreparedGraph:
    """Build the parameter-independent structure for :func:`forward`."""
    if g.edge_features is not None:
        raise UnsupportedFeatureError("edge features are not supported by the GIN layer")
    if g.num_nodes == 0:
        raise ValueError("cannot run a forward pass on an empty graph")
    if cfg.mode == "plain":
        return PreparedGraph(feats=_base_rows(g, None), adj=_csr(g), num_roots=g.num_nodes)

    n = g.num_nodes
    h = cfg.height
    base = _base_rows(g, cfg.de)
    indptr, indices = g.adjacency()
    edge_arr = np.asarray(g.edges, dtype=np.int64).reshape(-1, 2)
    eu, ev = edge_arr[:, 0], edge_arr[:, 1]
    local = np.full(n, -1, dtype=np.int64)
    reach = np.zeros(n, dtype=bool)
    visited = np.zeros(n, dtype=bool)

    sizes = np.empty(n, dtype=np.int64)
    feat_blocks = []
    src_blocks = []
    dst_blocks = []
    offset = 0
    for v in range(n):
        members, d_m = _bfs_ball(indptr, indices, visited, v, h)
        size = members.size
        sizes[v] = size
        local[members] = np.arange(size, dtype=np.int64)
        reach[members] = True
        lu = lv = None
        if eu.size:
            mask = reach[eu] & reach[ev]
            lu = local[eu[mask]]
            lv = local[ev[mask]]
            src_blocks.append(np.concatenate([lu, lv]) + offset)
            dst_blocks.append(np.concatenate([lv, lu]) + offset)
        local[members] = -1
        reach[members] = False

        blocks = [base[members]]
        if cfg.de.use_spd:
            onehot = np.zeros((size, h + 2), dtype=np.float64)
            onehot[np.arange(size), np.minimum(d_m, h + 1)] = 1.0
            blocks.append(onehot)
        if cfg.de.use_resistance:
            pairs = zip(lu.tolist(), lv.tolist()) if lu is not None else ()
            blocks.append(resistance_to_root(size, pairs, 0)[:, None])
        feat_blocks.append(np.hstack(blocks) if len(blocks) > 1 else blocks[0])
        offset += size

    feats = np.vstack(feat_blocks)
    total = int(offset)
    if src_blocks:
        src = np.concatenate(src_blocks)
        dst = np.concatenate(dst_blocks)
        data = np.ones(src.size, dtype=np.float64)
        adj = sp.coo_matrix((data, (src, dst)), shape=(total, total)).tocsr()
    else:
        adj = sp.csr_matrix((total, total), dtype=np.float64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    return PreparedGraph(feats=feats, adj=adj, num_roots=n, offsets=offsets, sizes=sizes)


@dataclass
class RunCache:
    """Per-layer activations kept for the backward pass."""

    inputs: list[np.ndarray]
    sums: list[np.ndarray]
    preacts: list[np.ndarray]
    hiddens: list[np.ndarray]
    final: np.ndarray | None = None
    node_reps: np.ndarray | None = None

    def min_abs_preactivation(self) -> float:
        return min(float(np.min(np.abs(z))) for z in self.preacts) if self.preacts else np.inf


def run_prepared(
    prep: PreparedGraph,
    params: ModelParams,
    cfg: NGNNConfig,
    keep_cache: bool = False,
) -> tuple[GraphEmbedding, RunCache | None]:
    """Forward pass over a prepared structure; optionally keep activations."""
    if prep.feats.shape[1] != params.input_dim:
        raise ValueError(
            f"prepared feature width {prep.feats.shape[1]} does not match "
            f"parameter input width {params.input_dim}"
        )
    if len(params.layers) != cfg.num_layers:
        raise ValueError(
            f"parameter depth {len(params.layers)} does not match config depth {cfg.num_layers}"
        )
    cache = RunCache([], [], [], []) if keep_cache else None
    x = prep.feats
    for layer in params.layers:
        s = (1.0 + layer.epsilon) * x + prep.adj @ x
        z = s @ layer.w1 + layer.b1
        hidden = np.maximum(z, 0.0)
        out = hidden @ layer.w2 + layer.b2
        if keep_cache:
            cache.inputs.append(x)
            cache.sums.append(s)
            cache.preacts.append(z)
            cache.hiddens.append(hidden)
        x = out

    if prep.nested:
        node_reps = _pool_blocks(x, prep, cfg.subgraph_pool)
    else:
        node_reps = x
    total = node_reps.sum(axis=0)
    graph_rep = total / prep.num_roots if cfg.graph_pool == "mean" else total
    if keep_cache:
        cache.final = x
        cache.node_reps = node_reps
    return GraphEmbedding(node_reps=node_reps, graph_rep=graph_rep), cache


def _pool_blocks(x: np.ndarray, prep: PreparedGraph, pool: str) -> np.ndarray:
    starts = prep.offsets[:-1]
    if pool == "center":
        return x[starts]  # block row 0 is the root
    sums = np.add.reduceat(x, starts, axis=0)
    if pool == "sum":
        return sums
    return sums / prep.sizes[:, None]


def stack_prepared(preps: list[PreparedGraph]) -> tuple[PreparedGraph, np.ndarray]:
    """Disjoint-union several prepared graphs into one, for batched passes.

    Returns the stacked structure and the per-graph root counts (roots stay
    grouped by graph, in order). All inputs must be from the same mode.
    """
    if not preps:
        raise ValueError("need at least one prepared graph")
    nested = preps[0].nested
    if any(p.nested != nested for p in preps):
        raise ValueError("cannot stack nested and plain prepared graphs")
    counts = np.asarray([p.num_roots for p in preps], dtype=np.int64)
    feats = np.vstack([p.feats for p in preps])
    adj = sp.block_diag([p.adj for p in preps], format="csr")
    offsets = sizes = None
    if nested:
        sizes = np.concatenate([p.sizes for p in preps])
        offsets = np.zeros(sizes.shape[0] + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
    return (
        PreparedGraph(
            feats=feats,
            adj=adj,
            num_roots=int(counts.sum()),
            offsets=offsets,
            sizes=sizes,
        ),
        counts,
    )


def backward_prepared(
    prep: PreparedGraph,
    params: ModelParams,
    cfg: NGNNConfig,
    cache: RunCache,
    d_graph_rep: np.ndarray | None = None,
    d_node_reps: np.ndarray | None = None,
) -> ModelParams:
    """Reverse-mode gradients of a scalar loss w.r.t. all layer parameters.

    Pass ``d_graph_rep`` (gradient at the pooled graph representation) for a
    single-graph pass, or ``d_node_reps`` (gradient at the final node
    representations) when graph pooling was applied externally, e.g. over a
    stacked batch. Inputs are constants; only parameters receive gradients.
    The returned container mirrors ModelParams with gradient values.
    """
    if (d_graph_rep is None) == (d_node_reps is None):
        raise ValueError("pass exactly one of d_graph_rep or d_node_reps")
    if d_node_reps is not None:
        d_node = d_node_reps
    else:
        n = prep.num_roots
        d_node = d_graph_rep / n if cfg.graph_pool == "mean" else d_graph_rep
        d_node = np.broadcast_to(d_node, cache.node_reps.shape)

    if prep.nested:
        pool = cfg.subgraph_pool
        if pool == "center":
            g = np.zeros_like(cache.final)
            g[prep.offsets[:-1]] = d_node
        elif pool == "sum":
            g = np.repeat(d_node, prep.sizes, axis=0)
        else:
            g = np.repeat(d_node / prep.sizes[:, None], prep.sizes, axis=0)
    else:
        g = np.array(d_node)

    grads = []
    for t in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[t]
        x, s = cache.inputs[t], cache.sums[t]
        z, hidden = cache.preacts[t], cache.hiddens[t]
        d_w2 = hidden.T @ g
        d_b2 = g.sum(axis=0)
        d_hidden = g @ layer.w2.T
        d_z = np.where(z > 0.0, d_hidden, 0.0)
        d_w1 = s.T @ d_z
        d_b1 = d_z.sum(axis=0)
        d_s = d_z @ layer.w1.T
        d_eps = float(np.sum(x * d_s))
        g = (1.0 + layer.epsilon) * d_s + prep.adj @ d_s
        grads.append(LayerParams(d_eps, d_w1, d_b1, d_w2, d_b2))
    return ModelParams(tuple(reversed(grads)))


# ---------------------------------------------------------------------------
# public forward operations
# ---------------------------------------------------------------------------


def base_forward(
    sub: RootedSubgraph, params: ModelParams, cfg: NGNNConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Run the base network inside one rooted subgraph and pool it.

    Returns the within-subgraph node representations after all layers and
    the pooled subgraph representation (the root's final representation).
    """
    if cfg.mode != "nested":
        raise ValueError("base_forward applies to nested mode")
    if sub.graph.edge_features is not None:
        raise UnsupportedFeatureError("edge features are not supported by the GIN layer")
    x = distance_encoding(sub, cfg.de)
    if x.shape[1] != params.input_dim:
        raise ValueError(
            f"encoded width {x.shape[1]} does not match parameter input width {params.input_dim}"
        )
    for layer in params.layers:
        x = message_pass(sub.graph, x, layer)
    if cfg.subgraph_pool == "center":
        pooled = x[sub.root_local].copy()
    elif cfg.subgraph_pool == "sum":
        pooled = x.sum(axis=0)
    else:
        pooled = x.sum(axis=0) / sub.graph.num_nodes
    return x, pooled


def forward(g: Graph, params: ModelParams, cfg: NGNNConfig) -> GraphEmbedding:
    """Whole-graph forward pass.

    Nested mode extracts the rooted subgraph around every node, runs the
    shared base network in each, pools each subgraph into its root's final
    representation, and graph-pools those. Plain mode message-passes on the
    graph itself with base features only (no distance encoding) and pools
    the final node representations.
    """
    emb, _ = run_prepared(prepare_graph(g, cfg), params, cfg)
    return emb


def reps_distinguish(a: np.ndarray, b: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    """True iff ||a - b|| exceeds tol relative to max(1, ||a||, ||b||)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    scale = max(1.0, float(np.linalg.norm(a)), float(np.linalg.norm(b)))
    return float(np.linalg.norm(a - b)) > tol * scale
