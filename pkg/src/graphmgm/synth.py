"""Synthetic graphs for desk-scale experiments."""
from __future__ import annotations

import numpy as np

from graphmgm.graph import Graph, LabelSet, from_edges


def sbm(sizes, p_in: float, p_out: float, rng: np.random.Generator) -> tuple[Graph, np.ndarray]:
    """Undirected stochastic block model without self-loops.

    Small block pairs are sampled exactly (one Bernoulli per node pair); large
    ones draw a binomial edge count and place that many uniform pairs, which
    loses a negligible number of duplicates.
    """
    sizes = list(sizes)
    block = np.repeat(np.arange(len(sizes)), sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    src, dst = [], []
    for a in range(len(sizes)):
        for b in range(a, len(sizes)):
            p = p_in if a == b else p_out
            na, nb = sizes[a], sizes[b]
            if na * nb <= 4_000_000:
                hit = rng.random((na, nb)) < p
                if a == b:
                    hit = np.triu(hit, 1)
                u, v = np.nonzero(hit)
            else:
                pairs = na * (na - 1) // 2 if a == b else na * nb
                m = rng.binomial(pairs, p)
                u = rng.integers(0, na, m)
                v = rng.integers(0, nb, m)
                if a == b:
                    keep = u != v
                    u, v = u[keep], v[keep]
            src.append(u + starts[a])
            dst.append(v + starts[b])
    g = from_edges(np.concatenate(src), np.concatenate(dst), int(starts[-1]), directed=False)
    return g, block


def block_features(block: np.ndarray, dim: int, rng: np.random.Generator,
                   mean_scale: float = 1.0) -> np.ndarray:
    """Per-block mean vector (N(0, mean_scale^2 I)) plus unit Gaussian noise."""
    means = rng.normal(scale=mean_scale, size=(block.max() + 1, dim))
    return (means[block] + rng.normal(size=(block.size, dim))).astype(np.float32)


def random_splits(nodes, classes, rng: np.random.Generator, frac=(0.6, 0.2, 0.2)) -> LabelSet:
    nodes = np.asarray(nodes, dtype=np.int64)
    classes = np.asarray(classes, dtype=np.int64)
    perm = rng.permutation(nodes.size)
    cut1 = int(round(frac[0] * nodes.size))
    cut2 = cut1 + int(round(frac[1] * nodes.size))
    split = np.empty(nodes.size, dtype=np.int8)
    split[perm[:cut1]], split[perm[cut1:cut2]], split[perm[cut2:]] = 0, 1, 2
    return LabelSet(nodes, classes, split, int(classes.max()) + 1)


def dense_random_graph(n: int, avg_degree: float, rng: np.random.Generator,
                       blocks: int = 2, p_intra: float = 0.8) -> tuple[Graph, np.ndarray]:
    """Large sparse undirected graph with planted blocks and a target mean degree."""
    block = rng.integers(0, blocks, n)
    m = int(n * avg_degree / 2)
    src = rng.integers(0, n, m)
    same = rng.random(m) < p_intra
    order = np.argsort(block, kind="stable")
    starts = np.searchsorted(block[order], np.arange(blocks + 1))
    b = block[src]
    within = order[starts[b] + (rng.random(m) * (starts[b + 1] - starts[b])).astype(np.int64)]
    dst = np.where(same, within, rng.integers(0, n, m))
    keep = src != dst
    return from_edges(src[keep], dst[keep], n, directed=False), block
