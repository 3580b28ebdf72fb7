"""Independent oracles shared by the test modules."""
import functools

import numpy as np
import torch


def central_difference(loss_fn, param: torch.Tensor, index, h=1e-5) -> float:
    """d loss / d param[index] by central differences (param modified in place, restored)."""
    with torch.no_grad():
        orig = param[index].item()
        param[index] = orig + h
        up = loss_fn().item()
        param[index] = orig - h
        down = loss_fn().item()
        param[index] = orig
    return (up - down) / (2 * h)


def relative_error(a: float, b: float, floor: float = 1e-8) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def dense_ppr(n, edges, seed, alpha):
    """Solve (I - alpha P^T) r = (1 - alpha) e_seed directly."""
    adj = np.zeros((n, n))
    for u, v in edges:
        adj[u, v] = 1.0
    for u in range(n):
        if adj[u].sum() == 0:
            adj[u, u] = 1.0
    p = adj / adj.sum(1, keepdims=True)
    e = np.zeros(n)
    e[seed] = 1.0
    return np.linalg.solve(np.eye(n) - alpha * p.T, (1 - alpha) * e)


def brute_force_auc(scores, labels) -> float:
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    wins = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def reference_attention(q, k, v, pad=None):
    """Row-by-row loop evaluation of softmax(q k^T / sqrt(d)) v in float64."""
    q, k, v = (np.asarray(a, dtype=np.float64) for a in (q, k, v))
    out = np.zeros((q.shape[0], v.shape[1]))
    for i in range(q.shape[0]):
        logits = [float(q[i] @ k[j]) / np.sqrt(q.shape[1]) for j in range(k.shape[0])]
        w = [0.0 if (pad is not None and pad[j]) else np.exp(l) for j, l in enumerate(logits)]
        total = sum(w)
        for j in range(k.shape[0]):
            out[i] += w[j] / total * v[j]
    return out


SBM_SIZES = (200, 200)


@functools.lru_cache(maxsize=None)
def sbm_setup(seed=0, feat_dim=16, mean_scale=0.3, top_k=16, pe_dim=64, line_epochs=20):
    """Two-block SBM graph, noisy block features, LINE table and PPR sequences (cached)."""
    from graphmgm.posenc import LineConfig, train_line
    from graphmgm.ppr import PPRConfig, sample_sequences
    from graphmgm.synth import block_features, random_splits, sbm

    rng = np.random.default_rng(seed)
    g, block = sbm(SBM_SIZES, 0.1, 0.01, rng)
    feats = block_features(block, feat_dim, rng, mean_scale=mean_scale)
    pe = train_line(g, LineConfig(dim=pe_dim, epochs=line_epochs, rng_seed=seed))
    seqs = sample_sequences(g, np.arange(g.n), PPRConfig(top_k=top_k))
    labels = random_splits(np.arange(g.n), block, rng)
    return g, block, feats, pe, seqs, labels


def fused_loss_fixture(seed=0, hidden=16, layers=2, feat_dim=5, n=12):
    """Float64 model, fixed batch/mask plans/pairs and a closure for the fused loss."""
    from graphmgm.nn import init_params
    from graphmgm.ppr import NodeSequence
    from graphmgm.pretrain import (PretrainConfig, batch_losses, build_batch, new_model,
                                   sample_pairs)

    rng = np.random.default_rng(seed)
    cfg = PretrainConfig(hidden_size=hidden, num_layers=layers, decoder_layers=layers,
                         dropout=0.0, pair_budget=6, num_heads=2, rng_seed=seed)
    model = new_model(feat_dim, cfg, dtype=torch.float64)
    init_params(model, std=0.3, generator=torch.Generator().manual_seed(seed))
    with torch.no_grad():
        model.mask_token.normal_(0, 0.3, generator=torch.Generator().manual_seed(seed + 1))
    feats = torch.as_tensor(rng.normal(size=(n, feat_dim)))
    pe = torch.as_tensor(rng.normal(scale=0.3, size=(n, hidden)))
    seqs = [NodeSequence(int(s), rng.choice(np.delete(np.arange(n), s), size=k, replace=False),
                         np.ones(k, np.float32)) for s, k in ((0, 5), (3, 4), (7, 6))]
    batch = build_batch(seqs, 0.5, rng)
    pairs = sample_pairs(batch.unmasked_counts, cfg.pair_budget, rng)
    model.eval()

    def loss_fn():
        return batch_losses(model, batch, feats, pe, pairs, cfg)[0]
    return model, loss_fn


def fused_grad_errors(seed=0):
    """Autograd vs central differences at one random entry of every parameter tensor."""
    model, loss_fn = fused_loss_fixture(seed)
    model.zero_grad()
    loss_fn().backward()
    rng = np.random.default_rng(seed)
    errors = []
    for name, p in model.named_parameters():
        idx = tuple(int(rng.integers(0, s)) for s in p.shape)
        numeric = central_difference(loss_fn, p, idx)
        analytic = 0.0 if p.grad is None else p.grad[idx].item()
        errors.append((name, idx, relative_error(analytic, numeric)))
    return errors


SBM_PRETRAIN = dict(hidden_size=64, num_layers=2, ppr_topk=16, mask_rate=0.85, lambda_=0.1,
                    num_epochs=3, batch_size=32, rng_seed=0)


@functools.lru_cache(maxsize=None)
def sbm_pretrained():
    """Desk-config pre-training on the SBM setup; returns the TrainResult."""
    from graphmgm.pretrain import PretrainConfig, train

    _, _, feats, pe, seqs, _ = sbm_setup()
    return train(seqs, feats, pe, PretrainConfig(**SBM_PRETRAIN))


def identity_model(d=6, layers=2):
    """Checkpoint whose encoder/decoder stacks are residual no-ops and whose
    projection and feature head are identities, so with a zero positional
    table the reconstruction equals the input exactly."""
    from graphmgm.nn import init_params
    from graphmgm.pretrain import MaskedGraphModel

    model = MaskedGraphModel(d, d, layers, layers, heads=1)
    init_params(model, generator=torch.Generator().manual_seed(0))
    with torch.no_grad():
        for stack in (model.encoder, model.decoder):
            for layer in stack.layers:
                layer.attn.w_o.zero_()
                layer.ffn.w2.zero_()
                layer.ffn.b2.zero_()
        for lin in (model.proj, model.decoder_head):
            lin.weight.copy_(torch.eye(d))
            lin.bias.zero_()
    return model.eval()


def write_toy_inputs(root, n_per_block=30, seed=0):
    """Small SBM dataset on disk with non-dense external ids; returns a path dict."""
    from pathlib import Path

    from graphmgm.graph import (EdgeLabelSet, from_edges, write_edge_labels, write_edge_list,
                                write_features, write_labels)
    from graphmgm.synth import block_features, random_splits, sbm

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    g, block = sbm((n_per_block, n_per_block), 0.3, 0.02, rng)
    g = from_edges(g.edges()[:, 0], g.edges()[:, 1], g.n, directed=False,
                   node_ids=np.arange(g.n) * 10 + 100)
    paths = {k: root / name for k, name in (("graph", "edges.txt"), ("features", "x.mgtf"),
                                            ("labels", "labels.csv"), ("edge_labels", "links.csv"))}
    write_edge_list(paths["graph"], g)
    write_features(paths["features"], block_features(block, 8, rng))
    write_labels(paths["labels"], random_splits(np.arange(g.n), block, rng), g)
    e = g.edges()
    e = e[e[:, 0] < e[:, 1]]
    splits = rng.choice(3, size=len(e), p=[0.7, 0.1, 0.2]).astype(np.int8)
    write_edge_labels(paths["edge_labels"], EdgeLabelSet(e[:, 0], e[:, 1],
                                                         np.ones(len(e), np.int8), splits), g)
    return paths


PIPELINE_PRETRAIN = ["--hidden-size", "16", "--num-layers", "1", "--decoder-layers", "1",
                     "--epochs", "2", "--batch-size", "16", "--pair-budget", "16"]


def run_pipeline(inputs, out, seed=0, embed_flags=()):
    """sample -> encode-pos -> pretrain -> embed through the CLI; returns exit codes."""
    from graphmgm.cli import main

    out = str(out)
    common = ["--rng-seed", str(seed), "--out", out, "--graph", str(inputs["graph"])]
    codes = [
        main(["sample", *common, "--topk", "8"]),
        main(["encode-pos", *common, "--dim", "16", "--epochs", "5"]),
        main(["pretrain", *common, "--features", str(inputs["features"]), "--pe", f"{out}/pe.mgtp",
              "--sequences", f"{out}/sequences.mgts", *PIPELINE_PRETRAIN]),
        main(["embed", *common, "--features", str(inputs["features"]), "--pe", f"{out}/pe.mgtp",
              "--sequences", f"{out}/sequences.mgts", "--checkpoint", f"{out}/checkpoint.mgtc",
              *embed_flags]),
    ]
    return codes
