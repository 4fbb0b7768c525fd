"""Batch experiments: regular-graph discrimination grids and scaling bench.

The simulation samples r-regular graphs, applies an untrained nested model
(constant-1 features, no distance encoding) with fresh parameters per
(n, h) cell shared across the cell's graphs, and measures how often node and
graph representations collide at the working tolerance. Reported height
scales: discrimination becomes possible around 0.5*log(n)/log(r-1) and
subgraphs swallow the whole graph around log(n)/log(r-1).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import DEFAULT_TOL, NGNNConfig, forward, init_params, prepare_graph
from .graphs import random_regular
from .subgraphs import DEConfig

__all__ = [
    "SimGrid",
    "SimRow",
    "ExperimentReport",
    "BenchRow",
    "BenchReport",
    "theoretical_heights",
    "simulate",
    "bench_scaling",
    "write_simulation_csv",
    "write_bench_files",
    "CSV_HEADER",
]

CSV_HEADER = "n,h,frac_indist_node_pairs,frac_indist_graph_pairs,h_lower,h_upper,seconds"

SIM_HIDDEN_DIM = 16

_SEED_GRAPH, _SEED_PARAMS, _SEED_BENCH_GRAPH, _SEED_BENCH_PARAMS = 1, 2, 3, 4


@dataclass(frozen=True)
class SimGrid:
    """Grid description for the discrimination simulation."""

    n_values: tuple[int, ...]
    h_values: tuple[int, ...]
    r: int = 3
    graphs_per_n: int = 100
    layers: int = 1
    seed: int = 0
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "h_values", tuple(int(h) for h in self.h_values))
        if not self.n_values or not self.h_values:
            raise ValueError("n_values and h_values must be non-empty")
        if min(self.n_values) <= 0 or min(self.h_values) <= 0:
            raise ValueError("n and h values must be positive")
        if self.r <= 0 or self.graphs_per_n <= 0 or self.layers <= 0 or self.tol <= 0:
            raise ValueError("r, graphs_per_n, layers, tol must be positive")
        for n in self.n_values:
            if (n * self.r) % 2 != 0:
                raise ValueError(f"n*r must be even, violated at n={n}, r={self.r}")


@dataclass(frozen=True)
class SimRow:
    n: int
    h: int
    frac_indist_node_pairs: float
    frac_indist_graph_pairs: float
    h_lower: float
    h_upper: float
    seconds: float


@dataclass
class ExperimentReport:
    rows: list[SimRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BenchRow:
    n: int
    c: int  # max rooted-subgraph node count
    d: int  # max degree
    seconds: float


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    slope: float = math.nan  # log-log slope of time vs n*c*d


def theoretical_heights(n: int, r: int) -> tuple[float, float]:
    """Height scales (0.5*log(n)/log(r-1), log(n)/log(r-1)).

    Below the first, most nodes of random r-regular graphs look alike; above
    the second, every rooted subgraph tends to contain the whole graph. The
    ratio form is invariant to the logarithm base.
    """
    if r < 3:
        raise ValueError("r must be >= 3")
    if n < 2:
        raise ValueError("n must be >= 2")
    lower = 0.5 * math.log(n) / math.log(r - 1)
    return lower, 2.0 * lower


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _worker_count() -> int:
    raw = os.environ.get("NGNN_THREADS", "0").strip()
    k = int(raw) if raw else 0
    if k <= 0:
        return min(8, os.cpu_count() or 1)
    return k


def _map_ordered(fn, items):
    k = _worker_count()
    if k == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# indistinguishable-pair counting
# ---------------------------------------------------------------------------


def _cross_pairs(counts: np.ndarray) -> int:
    total = int(counts.sum())
    return (total * total - int((counts.astype(np.int64) ** 2).sum())) // 2


def count_indistinguishable_node_pairs(
    reps: np.ndarray, graph_ids: np.ndarray, tol: float
) -> int:
    """Exact count of unordered cross-graph node pairs within tolerance.

    Equivalent to evaluating reps_distinguish on every cross-graph pair, but
    via tolerance clustering: coordinate gaps above tol*max(1, max norm)
    provably separate pairs, leaves whose diameter bound is below tol are
    provably within tolerance, and the rare ambiguous leaves fall back to
    exact pairwise checks.
    """
    n_graphs = int(graph_ids.max()) + 1 if graph_ids.size else 0
    norms = np.linalg.norm(reps, axis=1)
    split_gap = tol * max(1.0, float(norms.max(initial=0.0)))
    groups = [np.arange(reps.shape[0])]
    for c in range(reps.shape[1]):
        nxt = []
        for idx in groups:
            if idx.size <= 1:
                nxt.append(idx)
                continue
            vals = reps[idx, c]
            order = np.argsort(vals, kind="stable")
            idx = idx[order]
            cuts = np.flatnonzero(np.diff(vals[order]) > split_gap) + 1
            nxt.extend(np.split(idx, cuts))
        groups = nxt

    count = 0
    for idx in groups:
        if idx.size <= 1:
            continue
        block = reps[idx]
        spread = block.max(axis=0) - block.min(axis=0)
        diameter_bound = float(np.sqrt((spread**2).sum()))
        if diameter_bound <= tol:
            count += _cross_pairs(np.bincount(graph_ids[idx], minlength=n_graphs))
            continue
        # ambiguous leaf: per-pair scale matters, check exactly
        gid = graph_ids[idx]
        nrm = norms[idx]
        for i in range(idx.size - 1):
            dist = np.linalg.norm(block[i + 1 :] - block[i], axis=1)
            scale = tol * np.maximum(1.0, np.maximum(nrm[i + 1 :], nrm[i]))
            count += int(np.count_nonzero((dist <= scale) & (gid[i + 1 :] != gid[i])))
    return count


def count_indistinguishable_graph_pairs(reps: np.ndarray, tol: float) -> int:
    """Unordered graph pairs whose pooled representations are within tolerance."""
    norms = np.linalg.norm(reps, axis=1)
    count = 0
    for i in range(reps.shape[0] - 1):
        dist = np.linalg.norm(reps[i + 1 :] - reps[i], axis=1)
        scale = tol * np.maximum(1.0, np.maximum(norms[i + 1 :], norms[i]))
        count += int(np.count_nonzero(dist <= scale))
    return count


# ---------------------------------------------------------------------------
# simulation and bench
# ---------------------------------------------------------------------------


def _sim_config(h: int, layers: int) -> NGNNConfig:
    return NGNNConfig(
        height=h,
        layers=layers,
        hidden_dim=SIM_HIDDEN_DIM,
        subgraph_pool="mean",
        graph_pool="mean",
        de=DEConfig(use_spd=False, use_resistance=False, base_feature_policy="constant_one"),
        mode="nested",
    )


def simulate(grid: SimGrid) -> ExperimentReport:
    """Run the (n, h) discrimination grid and report collision fractions.

    Graphs are sampled once per n and shared across h; untrained parameters
    are drawn fresh per (n, h) cell and shared across the cell's graphs so
    all comparisons within a cell happen under one model. Node pairs are
    counted across the two graphs of every graph pair.
    """
    report = ExperimentReport(
        meta={
            "n_values": list(grid.n_values),
            "h_values": list(grid.h_values),
            "r": grid.r,
            "graphs_per_n": grid.graphs_per_n,
            "layers": grid.layers,
            "seed": grid.seed,
            "tol": grid.tol,
            "hidden_dim": SIM_HIDDEN_DIM,
        }
    )
    n_pairs = grid.graphs_per_n * (grid.graphs_per_n - 1) // 2
    for n in grid.n_values:
        graphs = [
            random_regular(n, grid.r, _derive_seed(grid.seed, _SEED_GRAPH, n, i))
            for i in range(grid.graphs_per_n)
        ]
        for h in grid.h_values:
            cfg = _sim_config(h, grid.layers)
            params = init_params(cfg, _derive_seed(grid.seed, _SEED_PARAMS, n, h))
            start = time.perf_counter()
            embeddings = _map_ordered(lambda g: forward(g, params, cfg), graphs)
            node_reps = np.vstack([e.node_reps for e in embeddings])
            graph_ids = np.repeat(np.arange(grid.graphs_per_n), n)
            node_hits = count_indistinguishable_node_pairs(node_reps, graph_ids, grid.tol)
            graph_reps = np.vstack([e.graph_rep for e in embeddings])
            graph_hits = count_indistinguishable_graph_pairs(graph_reps, grid.tol)
            seconds = time.perf_counter() - start
            lower, upper = theoretical_heights(n, grid.r)
            report.rows.append(
                SimRow(
                    n=n,
                    h=h,
                    frac_indist_node_pairs=node_hits / (n_pairs * n * n),
                    frac_indist_graph_pairs=graph_hits / n_pairs,
                    h_lower=lower,
                    h_upper=upper,
                    seconds=seconds,
                )
            )
    return report


def bench_scaling(n_values, r: int, h: int, layers: int, seed: int, repeats: int = 5) -> BenchReport:
    """Time the nested forward per n and fit log(time) vs log(n*c*d).

    c is the measured maximum rooted-subgraph size, d the maximum degree.
    Each n is warmed up once and timed ``repeats`` times; the best time is
    kept (least sensitive to scheduler and cache interference).
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    report = BenchReport()
    for n in n_values:
        g = random_regular(n, r, _derive_seed(seed, _SEED_BENCH_GRAPH, n))
        cfg = _sim_config(h, layers)
        params = init_params(cfg, _derive_seed(seed, _SEED_BENCH_PARAMS, n))
        forward(g, params, cfg)  # warm-up
        times = []
        for _ in range(repeats):
            start = time.perf_counter()
            forward(g, params, cfg)
            times.append(time.perf_counter() - start)
        prep = prepare_graph(g, cfg)
        report.rows.append(
            BenchRow(
                n=n,
                c=prep.max_subgraph_size,
                d=int(g.degrees.max()),
                seconds=float(min(times)),
            )
        )
    if len(report.rows) >= 2:
        x = np.log([row.n * row.c * row.d for row in report.rows])
        y = np.log([row.seconds for row in report.rows])
        report.slope = float(np.polyfit(x, y, 1)[0])
    return report


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------


def write_simulation_csv(report: ExperimentReport, path: str, timing: str = "none") -> None:
    """Write the grid CSV plus a JSON metadata sidecar at <path>.meta.json.

    With the default timing mode the seconds column is written as 0.000 so
    repeated runs produce byte-identical files; pass timing="wall" to record
    measured wall time (at the cost of reproducible bytes).
    """
    if timing not in ("none", "wall"):
        raise ValueError("timing must be 'none' or 'wall'")
    lines = [CSV_HEADER]
    for row in report.rows:
        seconds = row.seconds if timing == "wall" else 0.0
        lines.append(
            f"{row.n},{row.h},{row.frac_indist_node_pairs:.6f},"
            f"{row.frac_indist_graph_pairs:.6f},{row.h_lower:.6f},"
            f"{row.h_upper:.6f},{seconds:.3f}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    meta = dict(report.meta)
    meta["timing"] = timing
    with open(f"{path}.meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_bench_files(report: BenchReport, path: str, meta: dict | None = None) -> None:
    """Write the deterministic bench fields (n, c, d) plus a metadata sidecar.

    Measured times and the fitted slope are inherently non-reproducible and
    are reported on stdout by the CLI instead of in the artifact files.
    """
    lines = ["n,c,d"]
    lines += [f"{row.n},{row.c},{row.d}" for row in report.rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(f"{path}.meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta or {}, fh, indent=2, sort_keys=True)
        fh.write("\n")
