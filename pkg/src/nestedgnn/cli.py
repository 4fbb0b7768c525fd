"""Batch command line: wl / extract / forward / train / simulate / bench."""

from __future__ import annotations

import argparse
import json
import sys

from .engine import NGNNConfig, forward, init_params
from .experiments import (
    SimGrid,
    bench_scaling,
    simulate,
    write_bench_files,
    write_simulation_csv,
)
from .graphs import parse_graph, serialize_graph
from .subgraphs import DEConfig, distance_encoding, extract_rooted
from .training import TrainSettings, make_exp_analog, train
from .wl import wl_distinguish, wl_hash

__all__ = ["cli_dispatch", "main"]


def _int_list(text: str) -> list[int]:
    """Parse "10,20,40" or "1..6" (ranges and commas may be mixed)."""
    out = []
    for token in text.split(","):
        token = token.strip()
        if ".." in token:
            lo, hi = token.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty range {token!r}")
            out.extend(range(lo, hi + 1))
        elif token:
            out.append(int(token))
    if not out:
        raise argparse.ArgumentTypeError(f"no integers in {text!r}")
    return out


def _de_config(text: str | None) -> DEConfig:
    if not text or text == "none":
        return DEConfig()
    parts = {p.strip() for p in text.split(",") if p.strip()}
    unknown = parts - {"spd", "resistance"}
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown DE features {sorted(unknown)}")
    return DEConfig(use_spd="spd" in parts, use_resistance="resistance" in parts)


def _read_graph(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph(fh.read())


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nestedgnn",
        description="Nested message passing over rooted subgraphs: "
        "WL baseline, forward passes, training, and expressiveness experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("wl", help="compare two graphs with 1-WL refinement")
    p.add_argument("--a", required=True, help="first graph file (edge-list format)")
    p.add_argument("--b", required=True, help="second graph file")
    p.add_argument("--iters", type=int, default=None, help="cap refinement rounds")

    p = sub.add_parser("extract", help="print a rooted subgraph and its distance table")
    p.add_argument("--graph", required=True)
    p.add_argument("--root", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--de", default=None, help="comma list of spd,resistance")

    p = sub.add_parser("forward", help="run one forward pass and print representations")
    p.add_argument("--graph", required=True)
    p.add_argument("--mode", choices=("nested", "plain"), default="nested")
    p.add_argument("--height", type=int, default=3)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--pool", choices=("mean", "sum", "center"), default="mean",
                   help="subgraph pooling")
    p.add_argument("--graph-pool", choices=("mean", "sum"), default="mean")
    p.add_argument("--de", default=None, help="comma list of spd,resistance")
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", action="store_true", help="also print per-node rows")

    p = sub.add_parser("train", help="train on the synthetic 1-WL-hard task")
    p.add_argument("--task", choices=("exp-analog",), default="exp-analog")
    p.add_argument("--ks", type=_int_list, default=_int_list("3..10"))
    p.add_argument("--copies", type=int, default=5)
    p.add_argument("--mode", choices=("nested", "plain"), default="nested")
    p.add_argument("--height", type=int, default=5)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--pool", choices=("mean", "sum", "center"), default="mean")
    p.add_argument("--graph-pool", choices=("mean", "sum"), default="sum")
    p.add_argument("--de", default="spd,resistance")
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="write the training report JSON here")

    p = sub.add_parser("simulate", help="regular-graph discrimination grid")
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--ns", type=_int_list, default=_int_list("10,20,40,80,160,320,640,1280"))
    p.add_argument("--hs", type=_int_list, default=_int_list("1..10"))
    p.add_argument("--graphs", type=int, default=100)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timing", choices=("none", "wall"), default="none",
                   help="'wall' records measured seconds in the CSV "
                   "(breaks byte-reproducibility of the file)")
    p.add_argument("--out", required=True, help="CSV path; metadata goes to <out>.meta.json")

    p = sub.add_parser("bench", help="forward-pass scaling measurement")
    p.add_argument("--ns", type=_int_list, default=_int_list("100,200,400,800,1600"))
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--height", type=int, default=3)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None,
                   help="write deterministic fields (n,c,d) here; timings stay on stdout")
    return parser


def _cmd_wl(args) -> int:
    a = _read_graph(args.a)
    b = _read_graph(args.b)
    if args.iters is not None:
        if args.iters < 1:
            raise ValueError("--iters must be >= 1")
        ha, hb = wl_hash(a, args.iters), wl_hash(b, args.iters)
        differ = ha != hb
    else:
        ha = wl_hash(a, max(1, a.num_nodes))
        hb = wl_hash(b, max(1, b.num_nodes))
        differ = wl_distinguish(a, b)
    print(f"a {ha:016x}")
    print(f"b {hb:016x}")
    print("distinguishable" if differ else "indistinguishable")
    return 0


def _cmd_extract(args) -> int:
    g = _read_graph(args.graph)
    sub = extract_rooted(g, args.root, args.height)
    sys.stdout.write(serialize_graph(sub.graph))
    de = _de_config(args.de)
    header = ["local", "original", "distance"]
    rows = None
    if de.use_spd or de.use_resistance:
        rows = distance_encoding(sub, de)
        header += [f"f{i}" for i in range(rows.shape[1])]
    print(",".join(header))
    for i in range(sub.graph.num_nodes):
        cells = [str(i), str(sub.origin_nodes[i]), str(sub.dist_to_root[i])]
        if rows is not None:
            cells += [repr(float(x)) for x in rows[i]]
        print(",".join(cells))
    return 0


def _cmd_forward(args) -> int:
    g = _read_graph(args.graph)
    cfg = NGNNConfig(
        height=args.height,
        layers=args.layers,
        hidden_dim=args.hidden,
        subgraph_pool=args.pool,
        graph_pool=args.graph_pool,
        de=_de_config(args.de),
        mode=args.mode,
    )
    base_dim = 1 if g.node_features is None else g.node_features.shape[1]
    params = init_params(cfg, args.seed, base_feature_dim=base_dim)
    emb = forward(g, params, cfg)
    print(",".join(repr(float(x)) for x in emb.graph_rep))
    if args.nodes:
        for row in emb.node_reps:
            print(",".join(repr(float(x)) for x in row))
    return 0


def _cmd_train(args) -> int:
    task = make_exp_analog(args.ks, args.copies, args.seed)
    cfg = NGNNConfig(
        height=args.height,
        layers=args.layers,
        hidden_dim=args.hidden,
        subgraph_pool=args.pool,
        graph_pool=args.graph_pool,
        de=_de_config(args.de),
        mode=args.mode,
    )
    settings = TrainSettings(
        lr=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed
    )
    _, _, report = train(task, cfg, settings)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"test_metric {report.test_metric}")
    print(f"final_loss {report.loss_curve[-1] if report.loss_curve else float('nan')}")
    return 0


def _cmd_simulate(args) -> int:
    grid = SimGrid(
        n_values=tuple(args.ns),
        h_values=tuple(args.hs),
        r=args.r,
        graphs_per_n=args.graphs,
        layers=args.layers,
        seed=args.seed,
        tol=args.tol,
    )
    report = simulate(grid)
    write_simulation_csv(report, args.out, timing=args.timing)
    for row in report.rows:
        print(
            f"n={row.n} h={row.h} "
            f"node_indist={row.frac_indist_node_pairs:.4f} "
            f"graph_indist={row.frac_indist_graph_pairs:.4f} "
            f"seconds={row.seconds:.3f}"
        )
    return 0


def _cmd_bench(args) -> int:
    report = bench_scaling(
        args.ns, args.r, args.height, args.layers, args.seed, repeats=args.repeats
    )
    for row in report.rows:
        print(f"n={row.n} c={row.c} d={row.d} seconds={row.seconds:.6f}")
    print(f"slope {report.slope:.4f}")
    if args.out:
        meta = {
            "r": args.r,
            "height": args.height,
            "layers": args.layers,
            "repeats": args.repeats,
            "seed": args.seed,
            "n_values": list(args.ns),
        }
        write_bench_files(report, args.out, meta)
    return 0


_HANDLERS = {
    "wl": _cmd_wl,
    "extract": _cmd_extract,
    "forward": _cmd_forward,
    "train": _cmd_train,
    "simulate": _cmd_simulate,
    "bench": _cmd_bench,
}


def cli_dispatch(argv) -> int:
    """Route argv to a subcommand. Exit codes: 0 ok, 1 runtime error, 2 usage."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))
