import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st

from helpers import brute_force_auc, identity_model, sbm_pretrained, sbm_setup
from graphmgm.graph import EdgeLabelSet, InputError, LabelSet, read_matrix
from graphmgm.nn import init_params
from graphmgm.ppr import NodeSequence
from graphmgm.pretrain import MaskedGraphModel
from graphmgm.downstream import (EMB_MAGIC, BenchConfig, FinetuneConfig, ProbeConfig,
                                 augment_features, benchmark_inference, embed, finetune,
                                 full_neighborhood_tokens, linear_probe, mean_rank_metrics,
                                 rank_metrics, reconstruct_rows, roc_auc, write_bench_csv)
from graphmgm.synth import random_splits

FAST_PROBE = ProbeConfig(max_epochs=400, patience=50)


def seq(seed, *context):
    return NodeSequence(seed, np.array(context, dtype=np.int64), np.ones(len(context), np.float32))


def ring_seqs(n, k=3):
    return [seq(i, *[(i + j) % n for j in range(1, k + 1)]) for i in range(n)]


# -- augmentation and embeddings --

def test_identity_checkpoint_reconstructs_input():
    model = identity_model()
    x = np.random.default_rng(0).normal(size=(8, 6)).astype(np.float32)
    seqs = ring_seqs(8)
    rows = reconstruct_rows(seqs, x, np.zeros((8, 6), np.float32), model)
    for s, z in zip(seqs, rows):
        np.testing.assert_array_equal(z, x[s.nodes])


def test_identity_checkpoint_embeddings_bitwise_equal():
    model = identity_model()
    x = np.random.default_rng(1).normal(size=(10, 6)).astype(np.float32)
    pe = np.zeros((10, 6), np.float32)
    a = embed(ring_seqs(10), x, pe, model, use_augmentation=True)
    b = embed(ring_seqs(10), x, pe, model, use_augmentation=False)
    assert a.data.tobytes() == b.data.tobytes()


def test_augmentation_only_touches_seeds():
    model = MaskedGraphModel(4, 8, 1, 1, heads=2)
    init_params(model, std=0.2)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(9, 4)).astype(np.float32)
    seqs = [seq(0, 1, 2), seq(3, 4, 5)]
    aug = augment_features(seqs, x, rng.normal(size=(9, 8)).astype(np.float32), model)
    np.testing.assert_array_equal(aug.augmented, np.isin(np.arange(9), [0, 3]))
    np.testing.assert_array_equal(aug.data[~aug.augmented], x[~aug.augmented])
    assert not np.array_equal(aug.data[[0, 3]], x[[0, 3]])


def test_embed_without_augmentation_is_linear_image():
    model = MaskedGraphModel(4, 8, 0, 1, heads=2)
    init_params(model, std=0.2)
    rng = np.random.default_rng(3)
    x = rng.normal(size=(6, 4)).astype(np.float32)
    pe = rng.normal(size=(6, 8)).astype(np.float32)
    emb = embed(ring_seqs(6), x, pe, model, use_augmentation=False)
    with torch.no_grad():
        expect = model.proj(torch.from_numpy(x)).numpy() + pe
    np.testing.assert_allclose(emb.data, expect, atol=1e-6)


def test_embed_deterministic_and_write(tmp_path):
    model = sbm_pretrained().model
    g, _, feats, pe, seqs, _ = sbm_setup()
    a = embed(seqs, feats, pe, model)
    b = embed(seqs, feats, pe, model)
    assert a.data.tobytes() == b.data.tobytes()
    a.write(tmp_path / "e.mgte", g.n)
    np.testing.assert_array_equal(read_matrix(tmp_path / "e.mgte", EMB_MAGIC), a.dense(g.n))


def test_sbm_augmentation_changes_embeddings():
    model = sbm_pretrained().model
    _, _, feats, pe, seqs, _ = sbm_setup()
    a = embed(seqs, feats, pe, model, use_augmentation=True)
    b = embed(seqs, feats, pe, model, use_augmentation=False)
    assert not np.array_equal(a.data, b.data)


def test_augmentation_needs_decoder(tmp_path):
    model = identity_model()
    model.decoder_head = None
    with pytest.raises(InputError):
        embed(ring_seqs(4), np.ones((4, 6)), np.zeros((4, 6)), model)


def test_embed_rejects_unknown_nodes():
    with pytest.raises(InputError):
        embed([seq(0, 9)], np.ones((4, 6)), np.zeros((4, 6)), identity_model(),
              use_augmentation=False)


# -- probe --

def labelled(n, classes, rng):
    return random_splits(np.arange(n), classes, rng)


def test_probe_separable():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 200)
    emb = np.eye(2, dtype=np.float32)[y] * 3 + rng.normal(scale=0.1, size=(200, 2)).astype(np.float32)
    _, rep = linear_probe(emb, labelled(200, y, rng), FAST_PROBE)
    assert rep.metrics["accuracy"] == 1.0 and rep.metrics["roc_auc"] == 1.0


def test_probe_permuted_labels_near_chance():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 4, 2000)
    emb = rng.normal(size=(2000, 8)).astype(np.float32)
    _, rep = linear_probe(emb, labelled(2000, y, rng), FAST_PROBE)
    assert abs(rep.metrics["accuracy"] - 0.25) < 0.06


def test_probe_duplicate_features_auc_half():
    rng = np.random.default_rng(2)
    y = rng.integers(0, 2, 300)
    emb = np.ones((300, 4), np.float32)
    _, rep = linear_probe(emb, labelled(300, y, rng), FAST_PROBE)
    assert rep.metrics["roc_auc"] == 0.5


def test_probe_needs_two_classes():
    rng = np.random.default_rng(3)
    with pytest.raises(InputError):
        linear_probe(np.ones((20, 2)), labelled(20, np.zeros(20, int), rng))


def test_probe_does_not_touch_model():
    model = sbm_pretrained().model
    before = {k: v.clone() for k, v in model.state_dict().items()}
    _, _, feats, pe, seqs, labels = sbm_setup()
    linear_probe(embed(seqs, feats, pe, model).dense(len(feats)), labels, FAST_PROBE)
    assert all(torch.equal(before[k], v) for k, v in model.state_dict().items())


# -- fine-tuning --

def test_finetune_zero_lr_leaves_params_unchanged():
    model = sbm_pretrained().model
    _, _, feats, pe, seqs, labels = sbm_setup()
    res = finetune(model, seqs, feats, pe, labels, "node_classification",
                   FinetuneConfig(lr=0.0, weight_decay=0.0, epochs=1))
    for k, v in model.state_dict().items():
        assert torch.equal(res.model.state_dict()[k], v), k


def test_finetune_node_not_worse_than_probe():
    model = sbm_pretrained().model
    n = len(sbm_setup()[2])
    _, _, feats, pe, seqs, labels = sbm_setup()
    _, probe = linear_probe(embed(seqs, feats, pe, model).dense(n), labels, FAST_PROBE)
    res = finetune(model, seqs, feats, pe, labels, "node_classification",
                   FinetuneConfig(epochs=5))
    assert res.report.metrics["accuracy"] >= probe.metrics["accuracy"] - 0.02


def sbm_link_split(g, rng):
    e = g.edges()
    e = e[e[:, 0] < e[:, 1]]
    rng.shuffle(e)
    splits = np.zeros(len(e), dtype=np.int8)
    splits[int(0.8 * len(e)):] = 2
    return EdgeLabelSet(e[:, 0], e[:, 1], np.ones(len(e), dtype=np.int8), splits)


def test_finetune_links_beats_random():
    g, _, feats, pe, seqs, _ = sbm_setup()
    edges = sbm_link_split(g, np.random.default_rng(0))
    res = finetune(sbm_pretrained().model, seqs, feats, pe, edges, "link_prediction",
                   FinetuneConfig(epochs=5, batch_size=128))
    m = res.report.metrics
    random_mrr = sum(1 / r for r in range(1, 52)) / 51    # uniform rank among 51 candidates
    assert m["mrr"] > 1.25 * random_mrr
    assert m["hits@10"] >= m["hits@5"] >= m["hits@3"] >= m["hits@1"]


def test_finetune_bad_targets():
    _, _, feats, pe, seqs, labels = sbm_setup()
    with pytest.raises(InputError):
        finetune(sbm_pretrained().model, seqs, feats, pe, labels, "link_prediction")
    with pytest.raises(InputError):
        finetune(sbm_pretrained().model, seqs, feats, pe, labels, "graph_regression")


# -- metrics --

def test_roc_auc_cases():
    assert roc_auc([0.9, 0.8, 0.3], [1, 0, 1]) == 0.5
    assert roc_auc([0.1, 0.9], [0, 1]) == 1.0
    assert roc_auc([0.5, 0.5, 0.5], [0, 1, 1]) == 0.5
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [1, 1])


@given(st.integers(0, 2**32 - 1))
def test_roc_auc_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 200))
    labels = rng.integers(0, 2, n)
    labels[:2] = [0, 1]
    scores = rng.integers(0, 20, n) / 4.0    # coarse grid forces ties
    assert roc_auc(scores, labels) == brute_force_auc(scores, labels)


def test_rank_metrics_cases():
    r = rank_metrics(0.5, np.linspace(0.6, 1.5, 9))
    assert r["rr"] == pytest.approx(0.1) and r["hits@10"] == 1.0 and r["hits@5"] == 0.0
    r = rank_metrics(1.0, [1.0, 1.0, 1.0])
    assert r["rr"] == pytest.approx(1 / 2.5)
    assert (r["hits@1"], r["hits@3"]) == (0.0, 1.0)
    with pytest.raises(ValueError):
        rank_metrics(1.0, [])


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=60), st.floats(-5, 5))
def test_rank_metrics_monotone(negs, pos):
    r = rank_metrics(pos, negs)
    hits = [r[f"hits@{k}"] for k in (1, 3, 5, 10)]
    assert hits == sorted(hits)
    assert 0 < r["rr"] <= 1
    assert rank_metrics(pos + 10, negs)["rr"] >= r["rr"]


def test_mean_rank_metrics():
    m = mean_rank_metrics([1.0, 0.0], [[0.0, 0.5], [0.5, 1.0]])
    assert m["mrr"] == pytest.approx((1 + 1 / 3) / 2)


# -- benchmark --

def test_full_neighborhood_tokens_star(star5):
    feats = np.arange(6, dtype=np.float32)[:, None]
    tokens, agg, touched = full_neighborhood_tokens(star5, feats, 1, hops=2, max_len=10)
    np.testing.assert_array_equal(tokens, [1, 0])
    np.testing.assert_allclose(agg[:, 0], [0.5, 2.5])    # means of {1,0} and {0..5}
    assert touched == 6


def test_benchmark_counts_and_rows(tmp_path):
    g, _, feats, pe, seqs, labels = sbm_setup()
    model = sbm_pretrained().model
    rep, rows = benchmark_inference(g, feats, pe, model, seqs[::10], cfg=BenchConfig(),
                                    labels=labels)
    assert rep.metrics["ppr_sequence/mean_nodes_touched"] <= 17
    assert rep.metrics["full_neighborhood/mean_nodes_touched"] > 17
    assert rep.timings["speedup"] > 0
    assert {r[0] for r in rows} == {"ppr_sequence", "full_neighborhood"} and len(rows) == 80
    write_bench_csv(tmp_path / "b.csv", rows)
    assert (tmp_path / "b.csv").read_text().startswith("mode,seed,nodes_touched,micros\n")
    with pytest.raises(InputError):
        benchmark_inference(g, feats, pe, model, seqs[:4], modes=("bfs",))
