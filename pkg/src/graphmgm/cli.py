"""Command-line pipeline: sample, encode-pos, pretrain, embed, probe, finetune, bench."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from graphmgm import downstream as ds
from graphmgm.graph import (InputError, load_edge_labels, load_edge_list, load_features,
                            load_labels, read_matrix, write_id_map)
from graphmgm.nn import save_checkpoint
from graphmgm.posenc import LineConfig, load_pe, train_line, write_pe, zero_encoding
from graphmgm.ppr import PPRConfig, read_sequences, sample_sequences, write_sequences
from graphmgm.pretrain import (PretrainConfig, load_model, new_model, rng_stream, save_model,
                               train, write_train_log)

log = logging.getLogger("graphmgm")

GLOBAL_DEFAULTS = dict(rng_seed=0, threads=1, out=".", directed=False, num_nodes=None)
PATH_KEYS = ("out", "graph", "features", "pe", "sequences", "checkpoint", "labels",
             "edge_labels", "embeddings")

DEFAULTS = {
    "sample": dict(alpha=0.85, epsilon=1e-4, topk=128, seeds="all"),
    "encode-pos": dict(dim=64, epochs=50, line_lr=0.025, negatives=5, line_batch=1024,
                       zero=False),
    "pretrain": {k: v for k, v in PretrainConfig.published().to_dict().items()
                 if k != "rng_seed"},
    "embed": dict(no_augment=False, batch_size=256),
    "probe": dict(probe_lr=0.01, max_epochs=5000, patience=100),
    "finetune": dict(head="node_classification", ft_lr=1e-3, ft_epochs=20, batch_size=64,
                     weight_decay=0.01, no_augment=False, eval_negatives=50),
    "bench": dict(modes="ppr_sequence,full_neighborhood", hops=2, max_len=None,
                  batch_size=64, repeats=1),
}


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    """Tracks inputs and written artifacts for the manifest."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.artifacts: list[str] = []
        self.started = time.time()

    def input(self, key: str) -> Path:
        path = self.cfg.get(key)
        if not path:
            raise InputError(f"--{key.replace('_', '-')} is required for {self.command}")
        path = Path(path)
        if not path.is_file():
            raise InputError(f"{path}: no such file")
        self.inputs[key] = sha256_file(path)
        return path

    def output(self, name: str) -> Path:
        path = self.out / name
        self.artifacts.append(str(path))
        return path

    def inputs_hash(self) -> str:
        """Depends on the command and input file bytes only, not on their paths."""
        payload = json.dumps({"command": self.command, "inputs": self.inputs}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def config_hash(self) -> str:
        settings = {k: v for k, v in self.cfg.items() if k not in PATH_KEYS}
        payload = json.dumps(settings, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()

    def write_manifest(self) -> Path:
        path = self.out / f"{self.command}.manifest.json"
        record = {
            "command": self.command,
            "config": self.cfg,
            "rng_seed": self.cfg["rng_seed"],
            "inputs_hash": self.inputs_hash(),
            "config_hash": self.config_hash(),
            "inputs": {k: {"path": str(self.cfg[k]), "sha256": v} for k, v in self.inputs.items()},
            "artifacts": {a: sha256_file(a) for a in self.artifacts},
            "started": self.started,
            "finished": time.time(),
        }
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n")
        os.replace(tmp, path)
        return path


def _graph(run: Run):
    return load_edge_list(run.input("graph"), undirected=not run.cfg["directed"],
                          num_nodes=run.cfg["num_nodes"])


def _sub_seed(seed: int, name: str) -> int:
    return int(rng_stream(seed, name).integers(2**63))


def _select_seeds(choice: str, graph, seed: int) -> np.ndarray:
    if choice == "all":
        return np.arange(graph.n)
    kind, _, arg = choice.partition(":")
    if kind == "fraction":
        try:
            frac = float(arg)
        except ValueError:
            raise InputError(f"bad seed fraction {arg!r}") from None
        if not 0 < frac <= 1:
            raise InputError("seed fraction must lie in (0, 1]")
        count = max(1, round(frac * graph.n))
        return np.sort(rng_stream(seed, "seeds").choice(graph.n, count, replace=False))
    if kind == "file":
        ids = np.loadtxt(arg, dtype=np.int64, ndmin=1, comments="#")
        return graph.index_of(ids)
    raise InputError(f"--seeds must be all, fraction:F or file:PATH, got {choice!r}")


def cmd_sample(run: Run) -> None:
    c = run.cfg
    g = _graph(run)
    cfg = PPRConfig(alpha=c["alpha"], epsilon=c["epsilon"], top_k=c["topk"])
    seeds = _select_seeds(c["seeds"], g, c["rng_seed"])
    seqs = sample_sequences(g, seeds, cfg, threads=c["threads"])
    write_sequences(run.output("sequences.mgts"), seqs)
    write_id_map(run.output("node_ids.txt"), g)
    log.info("sampled %d sequences", len(seqs))


def cmd_encode_pos(run: Run) -> None:
    c = run.cfg
    g = _graph(run)
    if c["zero"]:
        table = zero_encoding(g.n, c["dim"])
    else:
        table = train_line(g, LineConfig(dim=c["dim"], epochs=c["epochs"],
                                         learning_rate=c["line_lr"],
                                         negatives_per_edge=c["negatives"],
                                         batch_size=c["line_batch"],
                                         rng_seed=_sub_seed(c["rng_seed"], "line")))
    write_pe(run.output("pe.mgtp"), table)


def _pretrain_config(c: dict) -> PretrainConfig:
    keys = PretrainConfig.published().to_dict().keys()
    return PretrainConfig.from_dict({k: c[k] for k in keys if k in c})


def cmd_pretrain(run: Run) -> None:
    c = run.cfg
    cfg = _pretrain_config(c)
    feats = load_features(run.input("features")).data
    pe = load_pe(run.input("pe"))
    seqs = read_sequences(run.input("sequences"))
    if pe.shape[0] != feats.shape[0]:
        raise InputError("positional table and features disagree on node count")
    if cfg.num_epochs == 0:
        model, rows = new_model(feats.shape[1], cfg), []
    else:
        result = train(seqs, feats, pe, cfg)
        model, rows = result.model, result.log_rows
    save_model(run.output("checkpoint.mgtc"), model, cfg)
    write_train_log(run.output("train_log.csv"), rows)


def _load_inference_inputs(run: Run):
    model, ckpt_cfg = load_model(run.input("checkpoint"))
    feats = load_features(run.input("features")).data
    pe = load_pe(run.input("pe"))
    seqs = read_sequences(run.input("sequences"))
    return model, ckpt_cfg, feats, pe, seqs


def cmd_embed(run: Run) -> None:
    model, _, feats, pe, seqs = _load_inference_inputs(run)
    table = ds.embed(seqs, feats, pe, model, use_augmentation=not run.cfg["no_augment"],
                     batch_size=run.cfg["batch_size"])
    table.write(run.output("embeddings.mgte"), feats.shape[0])


def cmd_probe(run: Run) -> None:
    c = run.cfg
    g = _graph(run)
    emb = read_matrix(run.input("embeddings"), ds.EMB_MAGIC)
    if emb.shape[0] != g.n:
        raise InputError("embedding rows do not match the graph")
    labels = load_labels(run.input("labels"), g)
    probe, report = ds.linear_probe(emb, labels, ds.ProbeConfig(
        lr=c["probe_lr"], max_epochs=c["max_epochs"], patience=c["patience"],
        rng_seed=c["rng_seed"]))
    report.config["rng_seed"] = c["rng_seed"]
    report.write(run.output("probe_report.json"))


def cmd_finetune(run: Run) -> None:
    c = run.cfg
    g = _graph(run)
    model, ckpt_cfg, feats, pe, seqs = _load_inference_inputs(run)
    if c["head"] == "node_classification":
        targets = load_labels(run.input("labels"), g)
    elif c["head"] == "link_prediction":
        targets = load_edge_labels(run.input("edge_labels"), g)
    else:
        raise InputError(f"unknown head {c['head']!r}")
    cfg = ds.FinetuneConfig(lr=c["ft_lr"], weight_decay=c["weight_decay"],
                            epochs=c["ft_epochs"], batch_size=c["batch_size"],
                            use_augmentation=not c["no_augment"],
                            eval_negatives=c["eval_negatives"], rng_seed=c["rng_seed"])
    result = ds.finetune(model, seqs, feats, pe, targets, c["head"], cfg)
    params = dict(result.model.state_dict())
    params.update({f"head.{k}": v for k, v in result.head.state_dict().items()})
    save_checkpoint(run.output("finetuned.mgtc"),
                    {"model": result.model.dims, "pretrain": ckpt_cfg.get("pretrain"),
                     "finetune": result.report.config}, params)
    result.report.write(run.output("finetune_report.json"))


def cmd_bench(run: Run) -> None:
    c = run.cfg
    g = _graph(run)
    model, _, feats, pe, seqs = _load_inference_inputs(run)
    labels = load_labels(run.input("labels"), g) if c.get("labels") else None
    modes = tuple(m.strip() for m in c["modes"].split(",") if m.strip())
    cfg = ds.BenchConfig(hops=c["hops"], max_len=c["max_len"], batch_size=c["batch_size"],
                         repeats=c["repeats"])
    report, rows = ds.benchmark_inference(g, feats, pe, model, seqs, modes, cfg, labels)
    ds.write_bench_csv(run.output("bench.csv"), rows)
    report.write(run.output("bench_report.json"))


COMMANDS = {
    "sample": cmd_sample,
    "encode-pos": cmd_encode_pos,
    "pretrain": cmd_pretrain,
    "embed": cmd_embed,
    "probe": cmd_probe,
    "finetune": cmd_finetune,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON file of option values; flags override it")
    common.add_argument("--rng-seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--graph", help="edge list")
    common.add_argument("--directed", action="store_true")
    common.add_argument("--num-nodes", type=int, help="ids are already dense 0..N-1")
    for name in ("features", "pe", "sequences", "checkpoint", "labels", "edge-labels",
                 "embeddings"):
        common.add_argument(f"--{name}")

    p = argparse.ArgumentParser(prog="graphmgm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", parents=[common], argument_default=S)
    s.add_argument("--alpha", type=float)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--topk", type=int)
    s.add_argument("--seeds", help="all | fraction:F | file:PATH")

    s = sub.add_parser("encode-pos", parents=[common], argument_default=S)
    s.add_argument("--dim", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--line-lr", type=float)
    s.add_argument("--negatives", type=int)
    s.add_argument("--line-batch", type=int)
    s.add_argument("--zero", action="store_true", help="all-zero table")

    s = sub.add_parser("pretrain", parents=[common], argument_default=S)
    s.add_argument("--mask-rate", dest="mask_rate", type=float)
    s.add_argument("--hidden-size", dest="hidden_size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--weight-decay", dest="weight_decay", type=float)
    s.add_argument("--dropout", type=float)
    s.add_argument("--optimizer")
    s.add_argument("--num-epochs", "--epochs", dest="num_epochs", type=int)
    s.add_argument("--num-layers", dest="num_layers", type=int)
    s.add_argument("--ppr-topk", dest="ppr_topk", type=int)
    s.add_argument("--lambda", dest="lambda", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--tau", type=float)
    s.add_argument("--pair-budget", dest="pair_budget", type=int)
    s.add_argument("--batch-size", dest="batch_size", type=int)
    s.add_argument("--decoder-layers", dest="decoder_layers", type=int)
    s.add_argument("--num-heads", dest="num_heads", type=int)
    s.add_argument("--exempt-seed", dest="exempt_seed", action="store_true")
    s.add_argument("--contrast", choices=["shared", "per_positive"])

    s = sub.add_parser("embed", parents=[common], argument_default=S)
    s.add_argument("--no-augment", action="store_true")
    s.add_argument("--batch-size", type=int)

    s = sub.add_parser("probe", parents=[common], argument_default=S)
    s.add_argument("--probe-lr", type=float)
    s.add_argument("--max-epochs", type=int)
    s.add_argument("--patience", type=int)

    s = sub.add_parser("finetune", parents=[common], argument_default=S)
    s.add_argument("--head", choices=["node_classification", "link_prediction"])
    s.add_argument("--ft-lr", type=float)
    s.add_argument("--ft-epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--weight-decay", type=float)
    s.add_argument("--no-augment", action="store_true")
    s.add_argument("--eval-negatives", type=int)

    s = sub.add_parser("bench", parents=[common], argument_default=S)
    s.add_argument("--modes")
    s.add_argument("--hops", type=int)
    s.add_argument("--max-len", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--repeats", type=int)
    return p


def resolve_config(command: str, flags: dict) -> dict:
    cfg = {**GLOBAL_DEFAULTS, **DEFAULTS[command]}
    path = flags.pop("config", None)
    if path:
        try:
            file_cfg = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise InputError(f"{path}: config must be a JSON object")
        cfg.update({k.replace("-", "_") if k != "lambda" else k: v
                    for k, v in file_cfg.items()})
    cfg.update(flags)
    return cfg


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = vars(ns)
    command = flags.pop("command")
    try:
        cfg = resolve_config(command, flags)
        torch.set_num_threads(max(int(cfg["threads"]), 1))
        run = Run(command, cfg)
        COMMANDS[command](run)
        run.write_manifest()
    except (InputError, FileNotFoundError, ValueError) as exc:
        print(f"graphmgm {command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure; never let a traceback be the exit path
        log.exception("internal error")
        print(f"graphmgm {command}: internal error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
