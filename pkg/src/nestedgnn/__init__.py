"""Nested message passing over rooted subgraphs, with a 1-WL baseline.

Every node's final representation is produced by running a shared GIN
inside the node's h-hop rooted subgraph and pooling it; a second pooling
stage turns those into a whole-graph representation. This two-level scheme
separates graphs that 1-WL (and therefore plain message passing) cannot,
such as equal-size regular graphs.
"""

from .engine import (
    DEFAULT_TOL,
    GraphEmbedding,
    LayerParams,
    ModelParams,
    NGNNConfig,
    UnsupportedFeatureError,
    base_forward,
    forward,
    init_params,
    message_pass,
    reps_distinguish,
)
from .estimators import NestedGNNClassifier, NestedGNNEmbedder
from .experiments import (
    BenchReport,
    ExperimentReport,
    SimGrid,
    bench_scaling,
    simulate,
    theoretical_heights,
)
from .graphs import (
    Graph,
    Permutation,
    brute_force_isomorphic,
    build_graph,
    builtin,
    cycle_pair,
    parse_graph,
    permute_graph,
    random_regular,
    serialize_graph,
)
from .subgraphs import (
    DEConfig,
    EdgeConfiguration,
    RootedSubgraph,
    distance_encoding,
    edge_configuration,
    extract_rooted,
    resistance_vector,
)
from .training import (
    HeadParams,
    Task,
    TrainReport,
    TrainSettings,
    grad_check,
    loss_and_grad,
    make_exp_analog,
    train,
)
from .wl import ColorMap, RefinementHistory, wl_distinguish, wl_hash, wl_refine

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "Permutation",
    "build_graph",
    "builtin",
    "cycle_pair",
    "random_regular",
    "permute_graph",
    "brute_force_isomorphic",
    "parse_graph",
    "serialize_graph",
    "ColorMap",
    "RefinementHistory",
    "wl_refine",
    "wl_hash",
    "wl_distinguish",
    "RootedSubgraph",
    "DEConfig",
    "EdgeConfiguration",
    "extract_rooted",
    "resistance_vector",
    "distance_encoding",
    "edge_configuration",
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
    "Task",
    "HeadParams",
    "TrainSettings",
    "TrainReport",
    "make_exp_analog",
    "loss_and_grad",
    "grad_check",
    "train",
    "SimGrid",
    "ExperimentReport",
    "BenchReport",
    "theoretical_heights",
    "simulate",
    "bench_scaling",
    "NestedGNNClassifier",
    "NestedGNNEmbedder",
]
