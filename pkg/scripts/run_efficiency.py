"""Per-seed inference cost of PPR sequences against full 2-hop neighbourhoods.

    python3 scripts/run_efficiency.py --nodes 100000 --degree 50 --topk 32
"""
import argparse
import json
import time

import numpy as np

from graphmgm.downstream import BenchConfig, benchmark_inference, write_bench_csv
from graphmgm.ppr import PPRConfig, sample_sequences
from graphmgm.pretrain import PretrainConfig, new_model
from graphmgm.synth import dense_random_graph


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nodes", type=int, default=100_000)
    p.add_argument("--degree", type=float, default=50)
    p.add_argument("--topk", type=int, default=32)
    p.add_argument("--seeds", type=int, default=512)
    p.add_argument("--feat-dim", type=int, default=16)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hops", type=int, default=2)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--csv", help="write per-seed rows here")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    g, _ = dense_random_graph(args.nodes, args.degree, rng)
    feats = rng.normal(size=(g.n, args.feat_dim)).astype(np.float32)
    pe = np.zeros((g.n, args.hidden), np.float32)
    seeds = rng.choice(g.n, args.seeds, replace=False)
    sample_sequences(g, seeds[:1], PPRConfig(top_k=args.topk))   # compile the push kernel
    t0 = time.perf_counter()
    seqs = sample_sequences(g, seeds, PPRConfig(top_k=args.topk))
    ppr_us = (time.perf_counter() - t0) / len(seqs) * 1e6
    model = new_model(args.feat_dim, PretrainConfig(hidden_size=args.hidden,
                                                    num_layers=args.layers))
    report, rows = benchmark_inference(g, feats, pe, model, seqs,
                                       cfg=BenchConfig(hops=args.hops, repeats=args.repeats))
    if args.csv:
        write_bench_csv(args.csv, rows)
    out = {"mean_degree": g.m / g.n, "ppr_precompute_micros_per_seed": ppr_us,
           **report.metrics, **report.timings}
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
