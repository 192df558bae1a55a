#!/usr/bin/env python3
"""Time the full forward pass at a chosen scale.

Usage: python3 scripts/bench_forward.py [--proposals 2000] [--feature-dim 64]
"""

import argparse
import time

from propgraph import AttentionParams, PipelineConfig, forward, generate_proposals


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--proposals", type=int, default=2000)
    parser.add_argument("--per-cluster", type=int, default=50)
    parser.add_argument("--feature-dim", type=int, default=64)
    parser.add_argument("--seed", type=int, default=123)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    clusters = max(1, args.proposals // args.per_cluster)
    doc = generate_proposals(
        clusters=clusters,
        per_cluster=args.per_cluster,
        seed=args.seed,
        feature_dim=args.feature_dim,
    )
    config = PipelineConfig(seed=args.seed)
    params = AttentionParams.initialize(
        args.feature_dim, head_count=config.head_count,
        output_dim=args.feature_dim, seed=args.seed,
    )
    boxes = doc.normalized_boxes()
    features = doc.feature_matrix()
    print(f"benchmark: {doc.num_proposals} proposals, d={args.feature_dim}, "
          f"{clusters} clusters x {args.per_cluster}")
    best = float("inf")
    for run in range(args.repeats):
        start = time.perf_counter()
        result = forward(boxes, features, params, config)
        elapsed = time.perf_counter() - start
        best = min(best, elapsed)
        diag = result.diagnostics
        print(f"  run {run}: {elapsed:.3f}s "
              f"(edges={diag.edge_count}, parts={diag.part_count}, coarse={diag.coarse_count})")
    print(f"best of {args.repeats}: {best:.3f}s")


if __name__ == "__main__":
    main()
