"""Scikit-learn style estimators over the nested message passing core."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .engine import NGNNConfig, forward, init_params
from .subgraphs import DEConfig
from .training import Task, TrainSettings, predict_logits, train
from .validation import check_binary_labels, check_graph_sequence

__all__ = ["NestedGNNClassifier", "NestedGNNEmbedder"]


def _base_dim(graphs) -> int:
    for g in graphs:
        if g.node_features is not None:
            return g.node_features.shape[1]
    return 1


class NestedGNNClassifier(BaseEstimator, ClassifierMixin):
    """Binary graph classifier: nested (or plain) GIN + linear sigmoid head.

    ``fit`` expects a sequence of Graph objects and a two-class target.
    Defaults follow what works on 1-WL-hard tasks: sum graph pooling so
    component counts register, and distance encoding switched on.
    """

    def __init__(
        self,
        height: int = 5,
        layers: int | None = 2,
        hidden_dim: int = 16,
        subgraph_pool: str = "mean",
        graph_pool: str = "sum",
        use_spd: bool = True,
        use_resistance: bool = True,
        mode: str = "nested",
        lr: float = 0.01,
        epochs: int = 500,
        batch_size: int = 4,
        seed: int = 0,
    ):
        self.height = height
        self.layers = layers
        self.hidden_dim = hidden_dim
        self.subgraph_pool = subgraph_pool
        self.graph_pool = graph_pool
        self.use_spd = use_spd
        self.use_resistance = use_resistance
        self.mode = mode
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def _config(self) -> NGNNConfig:
        return NGNNConfig(
            height=self.height,
            layers=self.layers,
            hidden_dim=self.hidden_dim,
            subgraph_pool=self.subgraph_pool,
            graph_pool=self.graph_pool,
            de=DEConfig(use_spd=self.use_spd, use_resistance=self.use_resistance),
            mode=self.mode,
        )

    def fit(self, X, y):
        graphs = check_graph_sequence(X)
        self.classes_, labels = check_binary_labels(y, len(graphs))
        task = Task(
            kind="binary_classification",
            dataset=tuple(zip(graphs, labels.tolist())),
            train_idx=tuple(range(len(graphs))),
            test_idx=(),
        )
        settings = TrainSettings(
            lr=self.lr, epochs=self.epochs, batch_size=self.batch_size, seed=self.seed
        )
        self.params_, self.head_, self.report_ = train(task, self._config(), settings)
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before predicting")

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        return predict_logits(self.params_, self.head_, check_graph_sequence(X), self._config())

    def predict_proba(self, X) -> np.ndarray:
        logits = self.decision_function(X)
        p = 1.0 / (1.0 + np.exp(-logits))
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        logits = self.decision_function(X)
        return self.classes_[(logits > 0).astype(int)]


class NestedGNNEmbedder(BaseEstimator, TransformerMixin):
    """Untrained graph embedding: fit draws parameters, transform pools graphs.

    Useful as a feature extractor and as the measurement instrument for
    expressiveness experiments (fixed random weights, deterministic by seed).
    """

    def __init__(
        self,
        height: int = 3,
        layers: int | None = None,
        hidden_dim: int = 16,
        subgraph_pool: str = "mean",
        graph_pool: str = "mean",
        use_spd: bool = False,
        use_resistance: bool = False,
        mode: str = "nested",
        seed: int = 0,
    ):
        self.height = height
        self.layers = layers
        self.hidden_dim = hidden_dim
        self.subgraph_pool = subgraph_pool
        self.graph_pool = graph_pool
        self.use_spd = use_spd
        self.use_resistance = use_resistance
        self.mode = mode
        self.seed = seed

    def _config(self) -> NGNNConfig:
        return NGNNConfig(
            height=self.height,
            layers=self.layers,
            hidden_dim=self.hidden_dim,
            subgraph_pool=self.subgraph_pool,
            graph_pool=self.graph_pool,
            de=DEConfig(use_spd=self.use_spd, use_resistance=self.use_resistance),
            mode=self.mode,
        )

    def fit(self, X, y=None):
        graphs = check_graph_sequence(X)
        self.params_ = init_params(
            self._config(), self.seed, base_feature_dim=_base_dim(graphs)
        )
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before transforming")
        graphs = check_graph_sequence(X)
        cfg = self._config()
        return np.vstack([forward(g, self.params_, cfg).graph_rep for g in graphs])
