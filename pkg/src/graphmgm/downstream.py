"""Inference-time augmentation, embeddings, probing, fine-tuning and metrics."""
from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from scipy.stats import rankdata
from torch import nn

from graphmgm.graph import EdgeLabelSet, Graph, InputError, LabelSet, write_matrix
from graphmgm.nn import AdamW, init_params
from graphmgm.ppr import NodeSequence
from graphmgm.pretrain import MaskedGraphModel, _gather, rng_stream

log = logging.getLogger(__name__)

EMB_MAGIC = b"MGTE"


@dataclass
class EvalReport:
    task: str
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config_hash"] = hashlib.sha256(
            json.dumps(self.config, sort_keys=True, default=str).encode()).hexdigest()
        return d

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")


# -- decoder reuse and embeddings --

def _pad_sequences(seqs: list[NodeSequence]):
    t = max(len(s) for s in seqs)
    nodes = np.zeros((len(seqs), t), dtype=np.int64)
    pad = np.ones((len(seqs), t), dtype=bool)
    for i, s in enumerate(seqs):
        nodes[i, :len(s)] = s.nodes
        pad[i, :len(s)] = False
    return nodes, pad


def _batches(seqs, size):
    for start in range(0, len(seqs), size):
        yield seqs[start:start + size]


def _check_nodes(seqs, n):
    for s in seqs:
        if s.seed >= n or (s.context.size and s.context.max() >= n):
            raise InputError(f"sequence of seed {s.seed} references a node without a feature row")


@torch.no_grad()
def reconstruct_rows(seqs, features, pe, model: MaskedGraphModel, batch_size: int = 256):
    """Unmasked encoder + feature decoder pass; one (len, d) array per sequence."""
    if not model.has_decoder:
        raise InputError("feature augmentation needs a checkpoint with the feature decoder")
    model.eval()
    feats = torch.tensor(np.asarray(features))
    pos = torch.tensor(np.asarray(pe))
    _check_nodes(seqs, feats.shape[0])
    out = []
    for chunk in _batches(seqs, batch_size):
        nodes, pad = _pad_sequences(chunk)
        x = _gather(feats, nodes, pad)
        p = _gather(pos, nodes, pad)
        padt = torch.from_numpy(pad)
        z = model.reconstruct(model.encode(x, p, padt) + p, padt)
        out.extend(z[i, :len(s)].numpy().copy() for i, s in enumerate(chunk))
    return out


@dataclass(frozen=True, eq=False)
class AugmentedFeatures:
    data: np.ndarray
    augmented: np.ndarray   # bool per node; False means the original row passed through


def augment_features(seqs, features, pe, model: MaskedGraphModel,
                     batch_size: int = 256) -> AugmentedFeatures:
    """Average each seed's own row with its reconstruction; other rows pass through."""
    base = np.asarray(features, dtype=np.float32)
    rows = reconstruct_rows(seqs, base, pe, model, batch_size)
    data = base.copy()
    flag = np.zeros(base.shape[0], dtype=bool)
    for s, z in zip(seqs, rows):
        data[s.seed] = (base[s.seed] + z[0]) / 2
        flag[s.seed] = True
    return AugmentedFeatures(data, flag)


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    seeds: np.ndarray
    data: np.ndarray

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros((n, self.data.shape[1]), dtype=np.float32)
        out[self.seeds] = self.data
        return out

    def write(self, path, n: int) -> None:
        write_matrix(path, self.dense(n), EMB_MAGIC)


def _encode_seeds(model, feats, pos, chunk):
    nodes, pad = _pad_sequences(chunk)
    x = _gather(feats, nodes, pad)
    p = _gather(pos, nodes, pad)
    return model.encode(x, p, torch.from_numpy(pad))[:, 0]


def embed(seqs, features, pe, model: MaskedGraphModel, use_augmentation: bool = True,
          batch_size: int = 256) -> EmbeddingTable:
    """Seed-position output of the final encoder layer, mask- and dropout-free."""
    feats = np.asarray(features, dtype=np.float32)
    _check_nodes(seqs, feats.shape[0])
    if use_augmentation:
        feats = augment_features(seqs, feats, pe, model, batch_size).data
    model.eval()
    ft, pt = torch.tensor(feats), torch.tensor(np.asarray(pe))
    out = []
    with torch.no_grad():
        for chunk in _batches(seqs, batch_size):
            out.append(_encode_seeds(model, ft, pt, chunk).numpy())
    seeds = np.array([s.seed for s in seqs], dtype=np.int64)
    return EmbeddingTable(seeds, np.concatenate(out).astype(np.float32))


# -- metrics --

def roc_auc(scores, labels) -> float:
    """Mann-Whitney statistic; tied pos/neg pairs count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes")
    ranks = rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def macro_roc_auc(probs: np.ndarray, labels: np.ndarray) -> float:
    """Binary AUC of class 1, or macro one-vs-rest over classes present."""
    if probs.shape[1] == 2:
        return roc_auc(probs[:, 1], labels == 1)
    vals = [roc_auc(probs[:, c], labels == c) for c in range(probs.shape[1])
            if 0 < (labels == c).sum() < labels.size]
    return float(np.mean(vals)) if vals else float("nan")


HITS_AT = (1, 3, 5, 10)


def rank_metrics(pos_score: float, neg_scores) -> dict:
    neg = np.asarray(neg_scores, dtype=np.float64)
    if neg.size == 0:
        raise ValueError("rank_metrics needs at least one negative")
    rank = 1.0 + (neg > pos_score).sum() + 0.5 * (neg == pos_score).sum()
    out = {f"hits@{k}": float(math.ceil(rank) <= k) for k in HITS_AT}
    out["rr"] = 1.0 / rank
    return out


def mean_rank_metrics(pos_scores, neg_scores) -> dict:
    rows = [rank_metrics(p, n) for p, n in zip(pos_scores, neg_scores)]
    out = {k: float(np.mean([r[k] for r in rows])) for k in rows[0]}
    out["mrr"] = out.pop("rr")
    return out


# -- linear probe --

@dataclass(frozen=True)
class ProbeConfig:
    lr: float = 0.01
    max_epochs: int = 5000
    patience: int = 100
    rng_seed: int = 0


@dataclass
class LinearProbe:
    weight: np.ndarray     # (d', C)
    bias: np.ndarray       # (C,)
    history: list

    def predict_proba(self, emb: np.ndarray) -> np.ndarray:
        logits = emb @ self.weight + self.bias
        logits -= logits.max(1, keepdims=True)
        p = np.exp(logits)
        return p / p.sum(1, keepdims=True)


def _accuracy(logits, y) -> float:
    return float((logits.argmax(1) == y).float().mean())


@torch.enable_grad()
def linear_probe(emb: np.ndarray, labels: LabelSet, cfg: ProbeConfig = ProbeConfig()):
    """Softmax regression on frozen embeddings (rows indexed by node id).

    Full-batch Adam, keeping the weights with the best validation accuracy and
    stopping after ``patience`` epochs without improvement.
    """
    tr_n, tr_y = labels.split("train")
    va_n, va_y = labels.split("valid")
    te_n, te_y = labels.split("test")
    if np.unique(tr_y).size < 2:
        raise InputError("linear probe needs at least two classes in the training split")
    c = labels.num_classes
    emb = np.asarray(emb, dtype=np.float32)
    x_tr, x_va = torch.from_numpy(emb[tr_n]), torch.from_numpy(emb[va_n])
    y_tr, y_va = torch.from_numpy(tr_y), torch.from_numpy(va_y)
    gen = torch.Generator().manual_seed(cfg.rng_seed)
    w = nn.Parameter(torch.randn(emb.shape[1], c, generator=gen) * 0.01)
    b = nn.Parameter(torch.zeros(c))
    opt = AdamW([("w", w), ("b", b)], lr=cfg.lr, weight_decay=0.0)
    best = (-1.0, w.detach().clone(), b.detach().clone(), 0)
    history = []
    for epoch in range(cfg.max_epochs):
        loss = nn.functional.cross_entropy(x_tr @ w + b, y_tr)
        opt.zero_grad()
        loss.backward()
        opt.step()
        with torch.no_grad():
            va_acc = _accuracy(x_va @ w + b, y_va) if va_n.size else -loss.item()
        history.append((loss.item(), va_acc))
        if va_acc > best[0]:
            best = (va_acc, w.detach().clone(), b.detach().clone(), epoch)
        elif epoch - best[3] >= cfg.patience:
            break
    probe = LinearProbe(best[1].numpy(), best[2].numpy(), history)
    report = EvalReport("linear_probe", config=asdict(cfg))
    report.metrics.update(_classification_metrics(probe.predict_proba(emb[te_n]), te_y))
    report.metrics["valid_accuracy"] = max(best[0], 0.0) if va_n.size else float("nan")
    report.metrics["epochs"] = len(history)
    report.metrics["best_epoch"] = best[3]
    return probe, report


def _classification_metrics(probs: np.ndarray, y: np.ndarray) -> dict:
    out = {"accuracy": float((probs.argmax(1) == y).mean()) if y.size else float("nan")}
    try:
        out["roc_auc"] = macro_roc_auc(probs, y)
    except ValueError:
        out["roc_auc"] = float("nan")
    return out


# -- fine-tuning --

@dataclass(frozen=True)
class FinetuneConfig:
    lr: float = 1e-3
    weight_decay: float = 0.01
    epochs: int = 20
    batch_size: int = 64
    use_augmentation: bool = True
    eval_negatives: int = 50
    rng_seed: int = 0


class LinkHead(nn.Module):
    """Scores a pair from [h_u, h_v, h_u * h_v]."""

    def __init__(self, hidden: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(3 * hidden, hidden), nn.ReLU(), nn.Linear(hidden, 1))

    def forward(self, hu, hv):
        return self.net(torch.cat([hu, hv, hu * hv], dim=-1)).squeeze(-1)


@dataclass
class FinetuneResult:
    model: MaskedGraphModel
    head: nn.Module
    report: EvalReport
    features: np.ndarray


def _seq_index(seqs) -> dict:
    return {s.seed: s for s in seqs}


def _lookup(index, nodes):
    try:
        return [index[int(v)] for v in nodes]
    except KeyError as exc:
        raise InputError(f"no sequence for node {exc.args[0]}") from None


def _encoder_params(model):
    return [(n, p) for n, p in model.named_parameters()
            if n.startswith(("proj.", "encoder."))]


def finetune(model: MaskedGraphModel, seqs, features, pe, targets, head_type: str,
             cfg: FinetuneConfig = FinetuneConfig()) -> FinetuneResult:
    """End-to-end training of projection + encoder with a task head.

    Decoder-reuse augmentation, when enabled, is computed once up front with
    the pre-trained decoders; the decoders are not trained.
    """
    if head_type == "node_classification" and not isinstance(targets, LabelSet):
        raise InputError("node_classification needs a LabelSet")
    if head_type == "link_prediction" and not isinstance(targets, EdgeLabelSet):
        raise InputError("link_prediction needs an EdgeLabelSet")
    if head_type not in ("node_classification", "link_prediction"):
        raise InputError(f"unknown head type {head_type!r}")
    model = copy.deepcopy(model)
    feats = np.asarray(features, dtype=np.float32)
    if cfg.use_augmentation:
        feats = augment_features(seqs, feats, pe, model).data
    ft, pt = torch.tensor(feats), torch.tensor(np.asarray(pe))
    index = _seq_index(seqs)
    hidden = model.dims["hidden"]
    gen = torch.Generator().manual_seed(int(rng_stream(cfg.rng_seed, "head").integers(2**62)))
    head = (nn.Linear(hidden, targets.num_classes) if head_type == "node_classification"
            else LinkHead(hidden))
    init_params(head, generator=gen)
    params = _encoder_params(model) + [("head." + n, p) for n, p in head.named_parameters()]
    opt = AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    torch.manual_seed(int(rng_stream(cfg.rng_seed, "dropout").integers(2**62)))
    rng = rng_stream(cfg.rng_seed, "finetune")
    t0 = time.perf_counter()
    if head_type == "node_classification":
        report = _finetune_nodes(model, head, opt, ft, pt, index, targets, cfg, rng)
    else:
        report = _finetune_links(model, head, opt, ft, pt, index, targets, cfg, rng)
    report.timings["train_seconds"] = time.perf_counter() - t0
    report.config = {**asdict(cfg), "head_type": head_type}
    model.eval()
    return FinetuneResult(model, head, report, feats)


def _node_logits(model, head, ft, pt, index, nodes, batch_size):
    out = []
    for start in range(0, len(nodes), batch_size):
        chunk = _lookup(index, nodes[start:start + batch_size])
        out.append(head(_encode_seeds(model, ft, pt, chunk)))
    return torch.cat(out)


def _finetune_nodes(model, head, opt, ft, pt, index, labels, cfg, rng):
    tr_n, tr_y = labels.split("train")
    va_n, va_y = labels.split("valid")
    te_n, te_y = labels.split("test")
    best = (-1.0, None)
    for _ in range(cfg.epochs):
        model.train()
        perm = rng.permutation(tr_n.size)
        for start in range(0, perm.size, cfg.batch_size):
            sel = perm[start:start + cfg.batch_size]
            logits = head(_encode_seeds(model, ft, pt, _lookup(index, tr_n[sel])))
            loss = nn.functional.cross_entropy(logits, torch.from_numpy(tr_y[sel]))
            opt.zero_grad()
            loss.backward()
            opt.step()
        model.eval()
        with torch.no_grad():
            acc = (_accuracy(_node_logits(model, head, ft, pt, index, va_n, 256),
                             torch.from_numpy(va_y)) if va_n.size else 0.0)
        if acc > best[0]:
            best = (acc, (copy.deepcopy(model.state_dict()), copy.deepcopy(head.state_dict())))
    if best[1] is not None:
        model.load_state_dict(best[1][0])
        head.load_state_dict(best[1][1])
    model.eval()
    with torch.no_grad():
        probs = torch.softmax(_node_logits(model, head, ft, pt, index, te_n, 256), 1).numpy()
    report = EvalReport("finetune_node_classification")
    report.metrics.update(_classification_metrics(probs, te_y))
    report.metrics["valid_accuracy"] = best[0]
    return report


def _embed_nodes(model, ft, pt, index, nodes, batch_size=256):
    out = [_encode_seeds(model, ft, pt, _lookup(index, nodes[s:s + batch_size]))
           for s in range(0, len(nodes), batch_size)]
    return torch.cat(out)


def _finetune_links(model, head, opt, ft, pt, index, edges: EdgeLabelSet, cfg, rng):
    u, v, lab = edges.split("train")
    u, v = u[lab == 1], v[lab == 1]
    if u.size < 2:
        raise InputError("link fine-tuning needs at least two positive training edges")
    for _ in range(cfg.epochs):
        model.train()
        perm = rng.permutation(u.size)
        for start in range(0, perm.size, cfg.batch_size):
            sel = perm[start:start + cfg.batch_size]
            if sel.size < 2:
                continue
            hu = _embed_nodes(model, ft, pt, index, u[sel])
            hv = _embed_nodes(model, ft, pt, index, v[sel])
            b = sel.size
            # every (u_i, v_j) with i != j in the batch is a negative
            scores = head(hu[:, None].expand(b, b, -1), hv[None].expand(b, b, -1))
            loss = nn.functional.binary_cross_entropy_with_logits(scores, torch.eye(b))
            opt.zero_grad()
            loss.backward()
            opt.step()
    model.eval()
    report = EvalReport("finetune_link_prediction")
    with torch.no_grad():
        report.metrics.update(evaluate_links(model, head, ft, pt, index, edges, cfg))
    return report


def _non_adjacent_negatives(pos_u, pos_v, candidates, adjacency, k, rng):
    out = np.empty((pos_u.size, k), dtype=np.int64)
    for i, (a, b) in enumerate(zip(pos_u, pos_v)):
        banned = adjacency.get(int(a), set()) | {int(a), int(b)}
        pool = candidates[~np.isin(candidates, list(banned))]
        if pool.size == 0:
            raise InputError(f"no non-adjacent candidates for node {a}")
        out[i] = rng.choice(pool, size=k, replace=pool.size < k)
    return out


def evaluate_links(model, head, ft, pt, index, edges: EdgeLabelSet, cfg) -> dict:
    """Hits@k/MRR against sampled non-adjacent partners, plus AUC on labelled test edges."""
    u, v, lab = edges.split("test")
    pos_u, pos_v = u[lab == 1], v[lab == 1]
    if pos_u.size == 0:
        raise InputError("no positive test edges")
    adjacency: dict[int, set] = {}
    for a, b, l in zip(edges.u, edges.v, edges.label):
        if l == 1:
            adjacency.setdefault(int(a), set()).add(int(b))
            adjacency.setdefault(int(b), set()).add(int(a))
    candidates = np.array(sorted(index), dtype=np.int64)
    rng = rng_stream(cfg.rng_seed, "eval_negatives")
    negs = _non_adjacent_negatives(pos_u, pos_v, candidates, adjacency, cfg.eval_negatives, rng)
    emb = _embed_nodes(model, ft, pt, index, candidates)
    row = {int(c): i for i, c in enumerate(candidates)}
    at = lambda nodes: emb[torch.as_tensor([row[int(x)] for x in np.ravel(nodes)])]
    pos_s = head(at(pos_u), at(pos_v)).numpy()
    neg_s = head(at(np.repeat(pos_u, cfg.eval_negatives)), at(negs)).numpy()
    out = mean_rank_metrics(pos_s, neg_s.reshape(pos_u.size, -1))
    if 0 < lab.sum() < lab.size:
        out["roc_auc"] = roc_auc(head(at(u), at(v)).numpy(), lab == 1)
    return out


# -- inference benchmark --

@dataclass(frozen=True)
class BenchConfig:
    hops: int = 2
    max_len: int | None = None     # defaults to the PPR sequence length
    batch_size: int = 64
    repeats: int = 1


def _closed_neighborhoods(g: Graph, nodes: np.ndarray):
    """Concatenated {u} + N(u) for each u, with segment offsets."""
    deg = g.out_degrees[nodes]
    starts = g.out_offsets[nodes]
    sizes = deg + 1
    seg = np.concatenate([[0], np.cumsum(sizes)])
    flat = np.empty(seg[-1], dtype=np.int64)
    flat[seg[:-1]] = nodes
    rel = np.arange(seg[-1]) - np.repeat(seg[:-1], sizes)
    body = rel > 0
    flat[body] = g.out_targets[np.repeat(starts, sizes)[body] + rel[body] - 1]
    return flat, seg


def _mean_aggregate(g: Graph, feats: np.ndarray, nodes: np.ndarray, depth: int):
    """depth rounds of closed-neighbourhood mean aggregation evaluated at ``nodes``."""
    if depth == 0:
        return feats[nodes], nodes
    flat, seg = _closed_neighborhoods(g, nodes)
    uniq, inv = np.unique(flat, return_inverse=True)
    inner, touched = _mean_aggregate(g, feats, uniq, depth - 1)
    sums = np.add.reduceat(inner[inv], seg[:-1], axis=0)
    return sums / np.diff(seg)[:, None], touched


def full_neighborhood_tokens(g: Graph, feats: np.ndarray, seed: int, hops: int, max_len: int):
    """Seed + first neighbours, each carrying (hops-1)-round mean aggregates.

    Returns (token nodes, token features, number of distinct nodes read).
    """
    nbrs = g.out_targets[g.out_offsets[seed]:g.out_offsets[seed + 1]]
    tokens = np.concatenate([[seed], nbrs[nbrs != seed]])[:max_len]
    agg, touched = _mean_aggregate(g, feats, tokens, hops - 1)
    return tokens, agg.astype(np.float32), int(np.unique(np.concatenate([touched, tokens])).size)


@torch.no_grad()
def benchmark_inference(g: Graph, features, pe, model: MaskedGraphModel, seqs,
                        modes=("ppr_sequence", "full_neighborhood"),
                        cfg: BenchConfig = BenchConfig(), labels: LabelSet | None = None):
    """Time encoder inference per seed for each input-construction mode.

    ``ppr_sequence`` gathers the precomputed sequence rows; ``full_neighborhood``
    reads the whole ``hops``-hop neighbourhood through mean aggregation and
    encodes the seed plus its first neighbours, capped at ``max_len`` tokens.
    Batch wall time is split evenly over the seeds of the batch.
    """
    unknown = set(modes) - {"ppr_sequence", "full_neighborhood"}
    if unknown:
        raise InputError(f"unknown benchmark mode(s): {sorted(unknown)}")
    feats = np.asarray(features, dtype=np.float32)
    pos = np.asarray(pe, dtype=np.float32)
    pt = torch.tensor(pos)
    max_len = cfg.max_len or max(len(s) for s in seqs)
    model.eval()
    rows, report = [], EvalReport("benchmark_inference", config=asdict(cfg))
    embeddings = {}
    for mode in modes:
        times = np.zeros(len(seqs))
        touched = np.zeros(len(seqs), dtype=np.int64)
        out = []
        for _ in range(cfg.repeats):
            out = []
            for start in range(0, len(seqs), cfg.batch_size):
                chunk = seqs[start:start + cfg.batch_size]
                t0 = time.perf_counter()
                if mode == "ppr_sequence":
                    nodes, pad = _pad_sequences(chunk)
                    x = torch.from_numpy(feats[nodes])
                    counts = [len(s) for s in chunk]
                else:
                    toks = [full_neighborhood_tokens(g, feats, s.seed, cfg.hops, max_len)
                            for s in chunk]
                    t = max(tk[0].size for tk in toks)
                    nodes = np.zeros((len(chunk), t), dtype=np.int64)
                    pad = np.ones((len(chunk), t), dtype=bool)
                    xs = np.zeros((len(chunk), t, feats.shape[1]), dtype=np.float32)
                    for i, (tn, tf, _) in enumerate(toks):
                        nodes[i, :tn.size], pad[i, :tn.size], xs[i, :tn.size] = tn, False, tf
                    x = torch.from_numpy(xs)
                    counts = [tk[2] for tk in toks]
                padt = torch.from_numpy(pad)
                x = x.masked_fill(padt[..., None], 0.0)
                p = pt[torch.from_numpy(nodes)].masked_fill(padt[..., None], 0.0)
                h = model.encode(x, p, padt)[:, 0]
                dt = time.perf_counter() - t0
                sl = slice(start, start + len(chunk))
                times[sl] += dt / len(chunk)
                touched[sl] = counts
                out.append(h.numpy())
        times /= cfg.repeats
        embeddings[mode] = np.concatenate(out)
        for s, n_t, sec in zip(seqs, touched, times):
            rows.append((mode, int(s.seed), int(n_t), sec * 1e6))
        report.metrics[f"{mode}/mean_nodes_touched"] = float(touched.mean())
        report.timings[f"{mode}/micros_per_seed"] = float(times.mean() * 1e6)
        if labels is not None:
            report.metrics.update({f"{mode}/{k}": v for k, v in
                                   _bench_probe(embeddings[mode], seqs, labels).items()})
    if len(modes) == 2:
        report.timings["speedup"] = (report.timings["full_neighborhood/micros_per_seed"]
                                     / report.timings["ppr_sequence/micros_per_seed"])
    return report, rows


def _bench_probe(emb, seqs, labels: LabelSet) -> dict:
    seeds = np.array([s.seed for s in seqs])
    n = int(max(seeds.max(), labels.nodes.max())) + 1
    dense = np.zeros((n, emb.shape[1]), dtype=np.float32)
    dense[seeds] = emb
    keep = np.isin(labels.nodes, seeds)
    sub = LabelSet(labels.nodes[keep], labels.classes[keep], labels.splits[keep],
                   labels.num_classes)
    _, rep = linear_probe(dense, sub, ProbeConfig(max_epochs=500, patience=50))
    return {"accuracy": rep.metrics["accuracy"], "roc_auc": rep.metrics["roc_auc"]}


def write_bench_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("mode,seed,nodes_touched,micros\n")
        for mode, seed, n_t, us in rows:
            fh.write(f"{mode},{seed},{n_t},{us:.3f}\n")
