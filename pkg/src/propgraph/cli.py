"""Command-line surface.

Subcommands cover every pipeline stage plus self-checks and fixture
generation:

  graph build / graph components    IoU graph construction and components
  cut ncut                          normalized-cut partitioning of a graph
  pool gcpool                       graph-cut pooling to coarse nodes
  attend                            graph attention over a proposal dump
  forward                           the full refinement pipeline
  oracle ncut / oracle grad         randomized verification runs
  gen / params init                 synthetic fixtures and seeded parameters

Exit codes: 0 success, 1 input or usage error, 2 numerical failure.
Commands that write files print a run report (config echo, stage counts,
timings in milliseconds, output digests) to stdout; commands without an
output file print their result document instead.
"""

from __future__ import annotations

import argparse
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import io as pio
from .attention import (
    AttentionParams,
    attention_gradients,
    finite_difference_gradients,
    multi_head_attend,
)
from .config import PipelineConfig
from .errors import InputError, NumericalError
from .graph import build_graph, connected_components, filter_components, graph_from_edges
from .pipeline import forward
from .pooling import gcpool
from .spectral import brute_force_ncut, ncut_value, recursive_ncut, two_way_ncut, Partition
from .synthetic import generate_proposals


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


class _Timer:
    def __init__(self) -> None:
        self.timings_ms: dict[str, float] = {}

    def measure(self, name: str):
        timer = self

        class _Span:
            def __enter__(self) -> None:
                self.start = time.perf_counter()

            def __exit__(self, *exc) -> None:
                timer.timings_ms[name] = (time.perf_counter() - self.start) * 1000.0

        return _Span()


def _emit(value) -> None:
    sys.stdout.write(pio.dumps_canonical(value) + "\n")


def _report(command: str, config: Optional[PipelineConfig], counts: dict,
            timer: _Timer, digests: dict) -> None:
    _emit({
        "command": command,
        "config": config.to_dict() if config is not None else None,
        "counts": counts,
        "timings_ms": timer.timings_ms,
        "digests": digests,
    })


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    config = pio.load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {}
    for flag, name in (
        ("iou_thr", "iou_thr"),
        ("min_size", "min_size"),
        ("stop_ncut", "stop_ncut"),
        ("lambda_", "lambda_"),
        ("seed", "seed"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        merged = config.to_dict()
        merged.update({("lambda" if k == "lambda_" else k): v for k, v in overrides.items()})
        config = PipelineConfig.from_dict(merged)
    return config


def build_parser() -> _Parser:
    parser = _Parser(prog="propgraph", description="Proposal-graph refinement toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    graph = commands.add_parser("graph", help="graph construction and components")
    graph_sub = graph.add_subparsers(dest="subcommand", required=True)
    graph_build = graph_sub.add_parser("build", help="build the IoU graph from proposals")
    graph_build.add_argument("--input", required=True)
    graph_build.add_argument("--iou-thr", type=float, required=True, dest="iou_thr")
    graph_build.add_argument("--output", required=True)
    graph_components = graph_sub.add_parser("components", help="label connected components")
    graph_components.add_argument("--input", required=True)
    graph_components.add_argument("--min-size", type=int, required=True, dest="min_size")

    cut = commands.add_parser("cut", help="normalized-cut partitioning")
    cut_sub = cut.add_subparsers(dest="subcommand", required=True)
    cut_ncut = cut_sub.add_parser("ncut", help="recursively partition a graph file")
    cut_ncut.add_argument("--input", required=True)
    cut_ncut.add_argument("--stop-ncut", type=float, default=None, dest="stop_ncut")
    cut_ncut.add_argument("--min-part", type=int, default=1, dest="min_part")
    cut_ncut.add_argument("--brute-force", action="store_true", dest="brute_force")

    pool = commands.add_parser("pool", help="graph-cut pooling")
    pool_sub = pool.add_subparsers(dest="subcommand", required=True)
    pool_gcpool = pool_sub.add_parser("gcpool", help="filter, partition, average-pool")
    pool_gcpool.add_argument("--input", required=True)
    pool_gcpool.add_argument("--config", required=True)
    pool_gcpool.add_argument("--output", required=True)

    attend_cmd = commands.add_parser("attend", help="graph attention over proposals")
    attend_cmd.add_argument("--input", required=True)
    attend_cmd.add_argument("--params", required=True)
    attend_cmd.add_argument("--config", required=True)
    attend_cmd.add_argument("--output", required=True)

    forward_cmd = commands.add_parser("forward", help="full refinement pipeline")
    forward_cmd.add_argument("--input", required=True)
    forward_cmd.add_argument("--params", required=True)
    forward_cmd.add_argument("--config", required=True)
    forward_cmd.add_argument("--output", required=True)
    forward_cmd.add_argument("--no-gcpool", action="store_true", dest="no_gcpool")
    forward_cmd.add_argument("--iou-thr", type=float, default=None, dest="iou_thr")
    forward_cmd.add_argument("--min-size", type=int, default=None, dest="min_size")
    forward_cmd.add_argument("--stop-ncut", type=float, default=None, dest="stop_ncut")
    forward_cmd.add_argument("--lambda", type=float, default=None, dest="lambda_")
    forward_cmd.add_argument("--seed", type=int, default=None, dest="seed")

    oracle = commands.add_parser("oracle", help="randomized self-checks")
    oracle_sub = oracle.add_subparsers(dest="subcommand", required=True)
    oracle_ncut = oracle_sub.add_parser("ncut", help="spectral cut vs exhaustive optimum")
    oracle_ncut.add_argument("--max-n", type=int, default=10, dest="max_n")
    oracle_ncut.add_argument("--trials", type=int, default=100)
    oracle_ncut.add_argument("--seed", type=int, default=0)
    oracle_grad = oracle_sub.add_parser("grad", help="analytic vs finite-difference gradients")
    oracle_grad.add_argument("--trials", type=int, default=50)
    oracle_grad.add_argument("--seed", type=int, default=0)

    gen = commands.add_parser("gen", help="generate a synthetic proposal fixture")
    gen.add_argument("--clusters", type=int, required=True)
    gen.add_argument("--per-cluster", type=int, required=True, dest="per_cluster")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--output", required=True)
    gen.add_argument("--image-width", type=int, default=640, dest="image_width")
    gen.add_argument("--image-height", type=int, default=480, dest="image_height")
    gen.add_argument("--feature-dim", type=int, default=0, dest="feature_dim")
    gen.add_argument("--jitter", type=float, default=0.02)

    params = commands.add_parser("params", help="attention parameter files")
    params_sub = params.add_subparsers(dest="subcommand", required=True)
    params_init = params_sub.add_parser("init", help="write seeded attention parameters")
    params_init.add_argument("--feature-dim", type=int, required=True, dest="feature_dim")
    params_init.add_argument("--heads", type=int, default=1)
    params_init.add_argument("--out-dim", type=int, default=None, dest="out_dim")
    params_init.add_argument("--seed", type=int, default=0)
    params_init.add_argument("--output", required=True)

    return parser


# ----------------------------------------------------------------------
# Command implementations
# ----------------------------------------------------------------------

def _cmd_graph_build(args) -> int:
    timer = _Timer()
    with timer.measure("load"):
        document = pio.load_proposals(args.input)
    with timer.measure("build"):
        g = build_graph(document.normalized_boxes(), document.feature_matrix(), args.iou_thr)
    with timer.measure("write"):
        digest = pio.save_graph(g, args.output)
    config = PipelineConfig(iou_thr=args.iou_thr)
    _report("graph build", config,
            {"proposals": document.num_proposals, "nodes": g.num_nodes, "edges": g.num_edges},
            timer, {args.output: digest})
    return 0


def _cmd_graph_components(args) -> int:
    g = pio.load_graph(args.input)
    comp = connected_components(g)
    _filtered, removed = filter_components(g, args.min_size)
    _emit({
        "labels": [int(label) for label in comp.labels],
        "sizes": [int(s) for s in comp.sizes],
        "removed": removed,
        "report": {"nodes": g.num_nodes, "edges": g.num_edges,
                   "components": comp.count, "min_size": args.min_size},
    })
    return 0


def _cmd_cut_ncut(args) -> int:
    g = pio.load_graph(args.input)
    stop = args.stop_ncut if args.stop_ncut is not None else PipelineConfig().stop_ncut
    comp = connected_components(g)
    labels: list[Optional[int]] = [None] * g.num_nodes
    per_component = []
    next_label = 0
    for component in range(comp.count):
        idx = comp.members(component)
        sub = g.subgraph(idx)
        if idx.size == 1:
            partition = Partition(labels=np.zeros(1, dtype=np.int64), set_count=1)
        else:
            partition = recursive_ncut(sub, stop, min_part=args.min_part)
        for local, node in enumerate(idx):
            labels[int(node)] = next_label + int(partition.labels[local])
        entry: dict = {"component": component, "sets": partition.set_count}
        if partition.set_count > 1:
            entry["ncut"] = ncut_value(sub, partition).ncut_value
        if args.brute_force and idx.size >= 2:
            best_partition, best_report = brute_force_ncut(sub)
            spectral_partition, spectral_report = two_way_ncut(sub)
            entry["two_way"] = spectral_report.ncut_value
            entry["brute_force"] = best_report.ncut_value
            entry["two_way_matches_oracle"] = bool(
                np.array_equal(best_partition.labels, spectral_partition.labels)
            )
        per_component.append(entry)
        next_label += partition.set_count
    _emit({
        "labels": labels,
        "set_count": next_label,
        "components": per_component,
        "report": {"nodes": g.num_nodes, "edges": g.num_edges, "stop_ncut": stop},
    })
    return 0


def _cmd_pool_gcpool(args) -> int:
    timer = _Timer()
    config = _load_config(args)
    with timer.measure("load"):
        document = pio.load_proposals(args.input)
    with timer.measure("build"):
        g = build_graph(document.normalized_boxes(), document.feature_matrix(), config.iou_thr)
    with timer.measure("gcpool"):
        labeling, coarse = gcpool(
            g, min_size=config.min_size, stop_ncut=config.stop_ncut,
            min_part=config.min_part, eig_tol=config.eig_tol,
            eig_max_sweeps=config.eig_max_sweeps,
        )
    with timer.measure("write"):
        digest = pio.write_json(args.output, pio.partition_to_dict(labeling, coarse))
    _report("pool gcpool", config,
            {"proposals": document.num_proposals, "edges": g.num_edges,
             "parts": labeling.part_count, "coarse": len(coarse)},
            timer, {args.output: digest})
    return 0


def _cmd_attend(args) -> int:
    timer = _Timer()
    config = _load_config(args)
    with timer.measure("load"):
        document = pio.load_proposals(args.input)
        params = pio.load_params(args.params)
    with timer.measure("build"):
        features = document.feature_matrix()
        g = build_graph(document.normalized_boxes(), features, config.iou_thr)
    with timer.measure("attend"):
        refined = multi_head_attend(
            features, params, g,
            dense_attention=config.dense_attention, iou_bias=config.iou_bias,
        )
    with timer.measure("write"):
        ids = tuple(int(n) for n in g.node_ids)
        digest = pio.save_features(ids, refined, args.output)
    _report("attend", config,
            {"proposals": document.num_proposals, "edges": g.num_edges,
             "heads": params.head_count, "output_dim": params.output_dim},
            timer, {args.output: digest})
    return 0


def _cmd_forward(args) -> int:
    timer = _Timer()
    config = _load_config(args)
    with timer.measure("load"):
        document = pio.load_proposals(args.input)
        params = pio.load_params(args.params)
    with timer.measure("forward"):
        result = forward(
            document.normalized_boxes(), document.feature_matrix(), params, config,
            use_gcpool=not args.no_gcpool,
        )
    with timer.measure("write"):
        digest = pio.save_features(result.original_ids, result.features, args.output)
    diag = result.diagnostics
    _report("forward", config,
            {"proposals": diag.node_count, "edges": diag.edge_count,
             "components": diag.component_count, "filtered": len(diag.filtered_ids),
             "parts": diag.part_count, "coarse": diag.coarse_count,
             "gcpool": not args.no_gcpool},
            timer, {args.output: digest})
    return 0


def _random_connected_graph(rng: np.random.Generator, n: int):
    """Random spanning tree plus extra edges, weights in (0.05, 1]."""
    edges = {}
    for node in range(1, n):
        parent = int(rng.integers(0, node))
        edges[(parent, node)] = float(rng.uniform(0.05, 1.0))
    extra = int(rng.integers(0, n))
    for _ in range(extra):
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n))
        if i == j:
            continue
        edges[(min(i, j), max(i, j))] = float(rng.uniform(0.05, 1.0))
    return graph_from_edges(n, [(i, j, w) for (i, j), w in edges.items()])


def _bridged_cliques(rng: np.random.Generator):
    """Two unit-weight k-cliques joined by one light bridge."""
    k = int(rng.choice([3, 4, 5]))
    bridge = float(rng.uniform(0.01, 0.2))
    edges = []
    for i in range(k):
        for j in range(i + 1, k):
            edges.append((i, j, 1.0))
            edges.append((k + i, k + j, 1.0))
    edges.append((0, k, bridge))
    expected = np.array([0] * k + [1] * k, dtype=np.int64)
    return graph_from_edges(2 * k, edges), expected


def _cmd_oracle_ncut(args) -> int:
    rng = np.random.default_rng(args.seed)
    worst_gap = 0.0
    worst_eval = 0.0
    failures = 0
    for _ in range(args.trials):
        g, expected = _bridged_cliques(rng)
        partition, report = two_way_ncut(g)
        oracle_partition, oracle_report = brute_force_ncut(g)
        gap = abs(report.ncut_value - oracle_report.ncut_value)
        worst_gap = max(worst_gap, gap)
        if gap > 1e-10 or not np.array_equal(partition.labels, oracle_partition.labels) \
                or not np.array_equal(partition.labels, expected):
            failures += 1
    for _ in range(args.trials):
        n = int(rng.integers(2, max(args.max_n, 2) + 1))
        g = _random_connected_graph(rng, n)
        labels = rng.integers(0, 2, size=n)
        labels[int(rng.integers(0, n))] = 0
        labels[int(rng.integers(0, n))] = 1
        if labels.min() == labels.max():
            continue
        partition = Partition(labels=np.where(labels == labels[0], 0, 1), set_count=2)
        report = ncut_value(g, partition)
        # Independent recomputation straight off the edge list.
        cut = 0.0
        degree_sum = [0.0, 0.0]
        for (i, j), w in zip(g.edge_index, g.edge_weight):
            li, lj = int(partition.labels[i]), int(partition.labels[j])
            degree_sum[li] += float(w)
            degree_sum[lj] += float(w)
            if li != lj:
                cut += float(w)
        direct = cut / degree_sum[0] + cut / degree_sum[1]
        gap = abs(report.ncut_value - direct)
        worst_eval = max(worst_eval, gap)
        if gap > 1e-12:
            failures += 1
    _emit({
        "trials": args.trials,
        "failures": failures,
        "max_partition_gap": worst_gap,
        "max_evaluation_gap": worst_eval,
    })
    return 0 if failures == 0 else 1


def _cmd_oracle_grad(args) -> int:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    failures = 0
    for trial in range(args.trials):
        m = int(rng.integers(2, 9))
        d = int(rng.integers(2, 7))
        heads = int(rng.choice([1, 2, 4]))
        g = _random_connected_graph(rng, m)
        g = graph_from_edges(m, g.edges(), features=rng.normal(size=(m, d)))
        out_dim = int(rng.integers(2, 7)) if trial % 2 == 0 else None
        params = AttentionParams.initialize(
            d, head_count=heads, output_dim=out_dim, seed=int(rng.integers(0, 2**31))
        )
        upstream = rng.normal(size=(m, params.output_dim))
        analytic = attention_gradients(g.features, params, g, upstream)
        numeric = finite_difference_gradients(g.features, params, g, upstream)
        for a, n in (
            (analytic.features, numeric.features),
            (analytic.score_weights, numeric.score_weights),
            (analytic.score_bias, numeric.score_bias),
            (analytic.output_projection, numeric.output_projection),
        ):
            if a is None:
                continue
            denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
            worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    if worst >= 1e-5:
        failures += 1
    _emit({"trials": args.trials, "failures": failures, "max_relative_error": worst})
    return 0 if failures == 0 else 1


def _cmd_gen(args) -> int:
    document = generate_proposals(
        clusters=args.clusters,
        per_cluster=args.per_cluster,
        seed=args.seed,
        image_width=args.image_width,
        image_height=args.image_height,
        feature_dim=args.feature_dim,
        jitter=args.jitter,
    )
    digest = pio.save_proposals(document, args.output)
    timer = _Timer()
    _report("gen", None,
            {"clusters": args.clusters, "per_cluster": args.per_cluster,
             "proposals": document.num_proposals, "feature_dim": args.feature_dim},
            timer, {args.output: digest})
    return 0


def _cmd_params_init(args) -> int:
    params = AttentionParams.initialize(
        args.feature_dim, head_count=args.heads, output_dim=args.out_dim, seed=args.seed
    )
    digest = pio.save_params(params, args.output)
    timer = _Timer()
    _report("params init", None,
            {"heads": params.head_count, "feature_dim": params.feature_dim,
             "output_dim": params.output_dim},
            timer, {args.output: digest})
    return 0


_HANDLERS = {
    ("graph", "build"): _cmd_graph_build,
    ("graph", "components"): _cmd_graph_components,
    ("cut", "ncut"): _cmd_cut_ncut,
    ("pool", "gcpool"): _cmd_pool_gcpool,
    ("attend", None): _cmd_attend,
    ("forward", None): _cmd_forward,
    ("oracle", "ncut"): _cmd_oracle_ncut,
    ("oracle", "grad"): _cmd_oracle_grad,
    ("gen", None): _cmd_gen,
    ("params", "init"): _cmd_params_init,
}


def run_command(argv: Sequence[str]) -> int:
    """Dispatch one command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except _UsageError as exc:
        sys.stderr.write(str(exc) + "\n")
        return 1
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    handler = _HANDLERS[(args.command, getattr(args, "subcommand", None))]
    try:
        return handler(args)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
