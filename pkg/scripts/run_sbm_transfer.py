"""Pre-train on a two-block SBM and compare linear probes on raw features and embeddings.

    python3 scripts/run_sbm_transfer.py --mean-scale 0.3 --epochs 3
"""
import argparse
import json
import logging
import time

import numpy as np

from graphmgm.downstream import ProbeConfig, embed, linear_probe
from graphmgm.posenc import LineConfig, train_line
from graphmgm.ppr import PPRConfig, sample_sequences
from graphmgm.pretrain import PretrainConfig, train
from graphmgm.synth import block_features, random_splits, sbm


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--block-size", type=int, default=200)
    p.add_argument("--p-in", type=float, default=0.1)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--feat-dim", type=int, default=16)
    p.add_argument("--mean-scale", type=float, default=0.3)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--topk", type=int, default=16)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    t0 = time.perf_counter()
    rng = np.random.default_rng(args.seed)
    g, block = sbm((args.block_size, args.block_size), args.p_in, args.p_out, rng)
    feats = block_features(block, args.feat_dim, rng, mean_scale=args.mean_scale)
    labels = random_splits(np.arange(g.n), block, rng)
    pe = train_line(g, LineConfig(dim=args.hidden, epochs=20, rng_seed=args.seed))
    seqs = sample_sequences(g, np.arange(g.n), PPRConfig(top_k=args.topk))
    cfg = PretrainConfig(hidden_size=args.hidden, num_layers=args.layers, ppr_topk=args.topk,
                         num_epochs=args.epochs, batch_size=args.batch_size, rng_seed=args.seed)
    result = train(seqs, feats, pe, cfg)

    rows = {"raw_features": feats}
    for aug in (True, False):
        rows[f"embeddings_aug={aug}"] = embed(seqs, feats, pe, result.model, aug).dense(g.n)
    summary = {"nodes": g.n, "edges": g.m, "epoch_losses": result.epoch_losses}
    for name, x in rows.items():
        _, rep = linear_probe(x, labels, ProbeConfig(rng_seed=args.seed))
        summary[name] = {k: rep.metrics[k] for k in ("accuracy", "roc_auc")}
    summary["seconds"] = time.perf_counter() - t0
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
