"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np

from .graphs import Graph

__all__ = ["check_graph", "check_graph_sequence", "check_binary_labels"]


def check_graph(obj) -> Graph:
    if not isinstance(obj, Graph):
        raise TypeError(f"expected a Graph, got {type(obj).__name__}")
    return obj


def check_graph_sequence(X) -> list[Graph]:
    """Validate a sequence of graphs with a consistent base feature width."""
    graphs = [check_graph(g) for g in X]
    if not graphs:
        raise ValueError("need at least one graph")
    widths = {g.node_features.shape[1] for g in graphs if g.node_features is not None}
    if len(widths) > 1:
        raise ValueError(f"graphs mix node feature widths {sorted(widths)}")
    return graphs


def check_binary_labels(y, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (classes, labels as 0/1 floats) for a two-class target."""
    y = np.asarray(y)
    if y.shape != (n_samples,):
        raise ValueError(f"y must have shape ({n_samples},), got {y.shape}")
    classes = np.unique(y)
    if classes.shape[0] != 2:
        raise ValueError(f"need exactly 2 classes, got {classes.shape[0]}")
    return classes, (y == classes[1]).astype(np.float64)
