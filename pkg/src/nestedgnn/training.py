"""SGD training on synthetic tasks, with finite-difference gradient checks.

Gradients are accumulated by hand (reverse mode) through the linear readout
head, both pooling stages, and every GIN layer; inputs are constants, only
weights receive gradients. The 1-WL-hard classification task pairs two
disjoint k-cycles (label 0) against one 2k-cycle (label 1), which plain
message passing provably cannot separate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    LayerParams,
    ModelParams,
    NGNNConfig,
    PreparedGraph,
    backward_prepared,
    init_params,
    prepare_graph,
    run_prepared,
    stack_prepared,
)
from .graphs import Graph, Permutation, cycle_pair, permute_graph
from .wl import wl_distinguish

__all__ = [
    "Task",
    "TaskKind",
    "HeadParams",
    "TrainSettings",
    "TrainReport",
    "make_exp_analog",
    "loss_and_grad",
    "grad_check",
    "train",
    "predict_logits",
]

TASK_KINDS = ("binary_classification", "scalar_regression")

# probes closer than this to a ReLU kink are re-drawn during grad checks
KINK_TOL = 1e-6


@dataclass(frozen=True)
class Task:
    """Labeled graphs with a deterministic train/test split."""

    kind: str
    dataset: tuple[tuple[Graph, float], ...]
    train_idx: tuple[int, ...]
    test_idx: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"kind must be one of {TASK_KINDS}")
        n = len(self.dataset)
        combined = sorted(self.train_idx) + sorted(self.test_idx)
        if sorted(combined) != list(range(n)) or set(self.train_idx) & set(self.test_idx):
            raise ValueError("train/test indices must be disjoint and cover the dataset")
        if self.kind == "binary_classification":
            labels = {y for _, y in self.dataset}
            if not labels <= {0.0, 1.0}:
                raise ValueError(f"classification labels must be binary, got {labels}")


@dataclass(frozen=True)
class HeadParams:
    """Linear readout on the graph representation: logit = w . rep + b."""

    w: np.ndarray
    b: float


@dataclass(frozen=True)
class TrainSettings:
    lr: float
    epochs: int
    batch_size: int
    seed: int

    def __post_init__(self):
        if self.lr < 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("lr must be >= 0; epochs and batch_size positive")


@dataclass
class TrainReport:
    loss_curve: list[float] = field(default_factory=list)
    test_metric: float = math.nan
    epochs: int = 0
    hyper: dict = field(default_factory=dict)
    diverged: bool = False

    def to_dict(self) -> dict:
        return {
            "loss_curve": self.loss_curve,
            "test_metric": self.test_metric,
            "epochs": self.epochs,
            "hyper": self.hyper,
            "diverged": self.diverged,
        }


def make_exp_analog(k_values, copies: int, seed: int) -> Task:
    """1-WL-hard binary task from randomly relabeled cycle pairs.

    For each k, emits ``copies`` permuted relabelings of both graphs of
    cycle_pair(k): two disjoint k-cycles (label 0) and one 2k-cycle
    (label 1). Every within-k pair is checked to be WL-indistinguishable at
    build time. The 80/20 split is deterministic given seed and stratified
    per (k, label) group so both classes of every k appear in both splits
    whenever copies >= 5.
    """
    k_values = list(k_values)
    if not k_values:
        raise ValueError("k_values must be non-empty")
    if any(k < 3 for k in k_values):
        raise ValueError("all k must be >= 3")
    if copies < 1:
        raise ValueError("copies must be >= 1")
    rng = np.random.default_rng(seed)
    dataset: list[tuple[Graph, float]] = []
    groups: list[list[int]] = []
    for k in k_values:
        disconnected, connected = cycle_pair(k)
        if wl_distinguish(disconnected, connected):
            raise RuntimeError(f"cycle_pair({k}) is unexpectedly WL-distinguishable")
        idx0, idx1 = [], []
        for _ in range(copies):
            p0 = Permutation.random(2 * k, int(rng.integers(2**63)))
            p1 = Permutation.random(2 * k, int(rng.integers(2**63)))
            idx0.append(len(dataset))
            dataset.append((permute_graph(disconnected, p0), 0.0))
            idx1.append(len(dataset))
            dataset.append((permute_graph(connected, p1), 1.0))
        groups.append(idx0)
        groups.append(idx1)
    train_idx: list[int] = []
    test_idx: list[int] = []
    n_test = int(round(copies * 0.2))
    for group in groups:
        order = rng.permutation(len(group))
        for pos in order[: copies - n_test]:
            train_idx.append(group[pos])
        for pos in order[copies - n_test :]:
            test_idx.append(group[pos])
    return Task(
        kind="binary_classification",
        dataset=tuple(dataset),
        train_idx=tuple(sorted(train_idx)),
        test_idx=tuple(sorted(test_idx)),
    )


def _loss_terms(logits: np.ndarray, ys: np.ndarray, kind: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-example losses and d(loss)/d(logit)."""
    if kind == "binary_classification":
        # stable sigmoid cross-entropy
        losses = np.maximum(logits, 0.0) - logits * ys + np.log1p(np.exp(-np.abs(logits)))
        expz = np.exp(-np.abs(logits))
        sig = np.where(logits >= 0, 1.0 / (1.0 + expz), expz / (1.0 + expz))
        return losses, sig - ys
    return (logits - ys) ** 2, 2.0 * (logits - ys)


def _add_scaled(acc: ModelParams, delta: ModelParams, scale: float) -> ModelParams:
    return ModelParams(
        tuple(
            LayerParams(
                a.epsilon + scale * d.epsilon,
                a.w1 + scale * d.w1,
                a.b1 + scale * d.b1,
                a.w2 + scale * d.w2,
                a.b2 + scale * d.b2,
            )
            for a, d in zip(acc.layers, delta.layers)
        )
    )


def _prep_for(g: Graph, cfg: NGNNConfig, prepared: dict | None) -> PreparedGraph:
    if prepared is None:
        return prepare_graph(g, cfg)
    prep = prepared.get(g)
    if prep is None:
        prep = prepare_graph(g, cfg)
        prepared[g] = prep
    return prep


def _stacked_batch(params, batch, cfg, head, kind, prepared, keep_cache):
    """One pass over the whole batch as a disjoint union.

    Returns (losses, d_logits, graph_reps, stacked_prep, counts, cache).
    """
    preps = [_prep_for(g, cfg, prepared) for g, _ in batch]
    stacked, counts = stack_prepared(preps)
    emb, cache = run_prepared(stacked, params, cfg, keep_cache=keep_cache)
    starts = np.zeros(counts.shape[0], dtype=np.int64)
    np.cumsum(counts[:-1], out=starts[1:])
    seg = np.add.reduceat(emb.node_reps, starts, axis=0)
    graph_reps = seg / counts[:, None] if cfg.graph_pool == "mean" else seg
    logits = graph_reps @ head.w + head.b
    ys = np.asarray([y for _, y in batch], dtype=np.float64)
    losses, d_logits = _loss_terms(logits, ys, kind)
    return losses, d_logits, graph_reps, stacked, counts, cache


def loss_and_grad(
    params: ModelParams,
    batch,
    cfg: NGNNConfig,
    head: HeadParams,
    kind: str = "binary_classification",
    prepared: dict | None = None,
) -> tuple[float, tuple[ModelParams, HeadParams]]:
    """Mean loss over the batch and gradients for all weights and the head.

    The batch runs as one disjoint union so a step costs a handful of array
    ops regardless of batch size. ``prepared`` optionally caches
    parameter-independent per-graph structure (reused across SGD steps).
    The returned containers mirror ModelParams and HeadParams but hold
    gradient values.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    scale = 1.0 / len(batch)
    losses, d_logits, graph_reps, stacked, counts, cache = _stacked_batch(
        params, batch, cfg, head, kind, prepared, keep_cache=True
    )
    g_w = graph_reps.T @ (d_logits * scale)
    g_b = float(np.sum(d_logits) * scale)
    d_graph = (d_logits * scale)[:, None] * head.w[None, :]
    if cfg.graph_pool == "mean":
        d_graph = d_graph / counts[:, None]
    d_node = np.repeat(d_graph, counts, axis=0)
    g_params = backward_prepared(stacked, params, cfg, cache, d_node_reps=d_node)
    return float(losses.mean()), (g_params, HeadParams(g_w, g_b))


def _batch_loss(params, batch, cfg, head, kind, prepared) -> tuple[float, float]:
    """Loss only, plus the smallest |preactivation| seen (kink proximity)."""
    losses, _, _, _, _, cache = _stacked_batch(
        params, batch, cfg, head, kind, prepared, keep_cache=True
    )
    return float(losses.mean()), cache.min_abs_preactivation()


def _flat_slots(params: ModelParams, head: HeadParams):
    slots = []
    for t, layer in enumerate(params.layers):
        slots.append(("eps", t, ()))
        for name in ("w1", "b1", "w2", "b2"):
            arr = getattr(layer, name)
            for idx in np.ndindex(arr.shape):
                slots.append((name, t, idx))
    for i in range(head.w.shape[0]):
        slots.append(("head_w", -1, (i,)))
    slots.append(("head_b", -1, ()))
    return slots


def _perturbed(params: ModelParams, head: HeadParams, slot, delta: float):
    name, t, idx = slot
    if name == "head_w":
        w = head.w.copy()
        w[idx] += delta
        return params, HeadParams(w, head.b)
    if name == "head_b":
        return params, HeadParams(head.w, head.b + delta)
    layers = list(params.layers)
    layer = layers[t]
    if name == "eps":
        layers[t] = LayerParams(layer.epsilon + delta, layer.w1, layer.b1, layer.w2, layer.b2)
    else:
        arrays = {n: getattr(layer, n) for n in ("w1", "b1", "w2", "b2")}
        arr = arrays[name].copy()
        arr[idx] += delta
        arrays[name] = arr
        layers[t] = LayerParams(layer.epsilon, **arrays)
    return ModelParams(tuple(layers)), head


def _slot_grad(grads: tuple[ModelParams, HeadParams], slot) -> float:
    name, t, idx = slot
    g_params, g_head = grads
    if name == "head_w":
        return float(g_head.w[idx])
    if name == "head_b":
        return float(g_head.b)
    if name == "eps":
        return float(g_params.layers[t].epsilon)
    return float(getattr(g_params.layers[t], name)[idx])


def grad_check(
    params: ModelParams,
    batch,
    cfg: NGNNConfig,
    head: HeadParams,
    probe_count: int,
    eps: float,
    kind: str = "binary_classification",
    seed: int = 0,
) -> float:
    """Worst relative error of analytic vs. central-difference gradients.

    Probes ``probe_count`` randomly chosen scalar parameters (layers and
    head). Probes whose perturbed forward passes come within 1e-6 of a ReLU
    kink are re-drawn, since the analytic subgradient is not comparable to a
    finite difference across the kink. The relative-error denominator is
    floored at 1e-6 so near-dead parameters are judged absolutely.
    """
    if not (0 < eps <= 1e-2):
        raise ValueError("eps must be in (0, 1e-2]")
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    rng = np.random.default_rng(seed)
    prepared: dict = {}
    _, grads = loss_and_grad(params, batch, cfg, head, kind, prepared)
    slots = _flat_slots(params, head)
    worst = 0.0
    for _ in range(probe_count):
        for _attempt in range(200):
            slot = slots[int(rng.integers(len(slots)))]
            p_plus, h_plus = _perturbed(params, head, slot, eps)
            p_minus, h_minus = _perturbed(params, head, slot, -eps)
            lp, kink_p = _batch_loss(p_plus, batch, cfg, h_plus, kind, prepared)
            lm, kink_m = _batch_loss(p_minus, batch, cfg, h_minus, kind, prepared)
            if min(kink_p, kink_m) >= KINK_TOL:
                break
        numeric = (lp - lm) / (2.0 * eps)
        analytic = _slot_grad(grads, slot)
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, err)
    return worst


def _base_feature_dim(task: Task) -> int:
    widths = {
        g.node_features.shape[1]
        for g, _ in task.dataset
        if g.node_features is not None
    }
    if len(widths) > 1:
        raise ValueError(f"dataset mixes node feature widths {sorted(widths)}")
    return widths.pop() if widths else 1


def _metric(params, head, cfg, task, indices, prepared) -> float:
    if not indices:
        return math.nan
    if task.kind == "binary_classification":
        hits = 0
        for i in indices:
            g, y = task.dataset[i]
            emb, _ = run_prepared(_prep_for(g, cfg, prepared), params, cfg)
            logit = float(head.w @ emb.graph_rep) + head.b
            hits += int((logit > 0) == (y == 1.0))
        return hits / len(indices)
    err = 0.0
    for i in indices:
        g, y = task.dataset[i]
        emb, _ = run_prepared(_prep_for(g, cfg, prepared), params, cfg)
        err += abs(float(head.w @ emb.graph_rep) + head.b - y)
    return err / len(indices)


def train(
    task: Task, cfg: NGNNConfig, settings: TrainSettings
) -> tuple[ModelParams, HeadParams, TrainReport]:
    """Plain fixed-lr SGD over shuffled mini-batches; deterministic by seed.

    Aborts on a non-finite loss and returns the report accumulated so far
    with ``diverged`` set. The test metric is computed once at the end.
    """
    rng = np.random.default_rng(settings.seed)
    base_dim = _base_feature_dim(task)
    params = init_params(cfg, int(rng.integers(2**63)), base_feature_dim=base_dim)
    head = HeadParams(w=0.01 * rng.standard_normal(cfg.hidden_dim), b=0.0)
    prepared: dict = {}
    report = TrainReport(hyper=_hyper_echo(cfg, settings))
    n_train = len(task.train_idx)
    for _epoch in range(settings.epochs):
        order = rng.permutation(n_train)
        epoch_loss = 0.0
        for start in range(0, n_train, settings.batch_size):
            chunk = [task.train_idx[i] for i in order[start : start + settings.batch_size]]
            batch = [task.dataset[i] for i in chunk]
            loss, (g_params, g_head) = loss_and_grad(
                params, batch, cfg, head, task.kind, prepared
            )
            epoch_loss += loss * len(batch) / n_train
            if not math.isfinite(loss):
                report.loss_curve.append(loss)
                report.epochs = len(report.loss_curve)
                report.diverged = True
                report.test_metric = _metric(params, head, cfg, task, task.test_idx, prepared)
                return params, head, report
            params = _add_scaled(params, g_params, -settings.lr)
            head = HeadParams(
                head.w - settings.lr * g_head.w, head.b - settings.lr * g_head.b
            )
        report.loss_curve.append(epoch_loss)
    report.epochs = len(report.loss_curve)
    report.test_metric = _metric(params, head, cfg, task, task.test_idx, prepared)
    return params, head, report


def predict_logits(params: ModelParams, head: HeadParams, graphs, cfg: NGNNConfig) -> np.ndarray:
    """Readout logits for a sequence of graphs."""
    out = np.empty(len(graphs))
    for i, g in enumerate(graphs):
        emb, _ = run_prepared(prepare_graph(g, cfg), params, cfg)
        out[i] = float(head.w @ emb.graph_rep) + head.b
    return out


def _hyper_echo(cfg: NGNNConfig, settings: TrainSettings) -> dict:
    return {
        "lr": settings.lr,
        "epochs": settings.epochs,
        "batch_size": settings.batch_size,
        "seed": settings.seed,
        "mode": cfg.mode,
        "height": cfg.height,
        "layers": cfg.num_layers,
        "hidden_dim": cfg.hidden_dim,
        "subgraph_pool": cfg.subgraph_pool,
        "graph_pool": cfg.graph_pool,
        "use_spd": cfg.de.use_spd,
        "use_resistance": cfg.de.use_resistance,
    }
