"""Personalized PageRank scores and top-k contextual node sequences.

``alpha`` multiplies the propagation term, so the walk teleports back to the
seed with probability ``1 - alpha``.  Nodes without out-edges behave as if
they had a self-loop.
"""
from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from graphmgm.graph import Graph, InputError

SEQ_MAGIC = b"MGTS"
SEQ_VERSION = 1


@dataclass(frozen=True)
class PPRConfig:
    alpha: float = 0.85
    epsilon: float = 1e-4
    max_iters: int = 10_000
    top_k: int = 128

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.epsilon <= 0:
            raise InputError("epsilon must be positive")
        if self.max_iters < 1 or self.top_k < 1:
            raise InputError("max_iters and top_k must be >= 1")


@dataclass(frozen=True, eq=False)
class PPRVector:
    """Sparse score vector; ``nodes`` ascending, scores kept in float64."""

    seed: int
    nodes: np.ndarray
    scores: np.ndarray

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.nodes.tolist(), self.scores.tolist()))

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.nodes] = self.scores
        return out


@dataclass(frozen=True, eq=False)
class NodeSequence:
    """Seed followed by its context, context sorted by descending score."""

    seed: int
    context: np.ndarray   # int64 node ids
    scores: np.ndarray    # float32

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate([[self.seed], self.context]).astype(np.int64)

    def __len__(self) -> int:
        return 1 + self.context.size

    def __eq__(self, other):
        return (isinstance(other, NodeSequence) and self.seed == other.seed
                and np.array_equal(self.context, other.context)
                and np.array_equal(self.scores, other.scores))


class ConvergenceError(RuntimeError):
    pass


def _check_seed(g: Graph, seed: int) -> None:
    if not 0 <= seed < g.n:
        raise IndexError(f"seed {seed} out of range for graph with {g.n} nodes")


def ppr_power_iteration(g: Graph, seed: int, cfg: PPRConfig) -> PPRVector:
    """Dense fixed-point iteration; the reference for :func:`ppr_forward_push`."""
    _check_seed(g, seed)
    deg = g.out_degrees
    dangling = deg == 0
    src = np.concatenate([np.repeat(np.arange(g.n), deg), np.flatnonzero(dangling)])
    dst = np.concatenate([g.out_targets, np.flatnonzero(dangling)])
    inv_deg = 1.0 / np.maximum(deg, 1)
    r0 = np.zeros(g.n)
    r0[seed] = 1.0
    r = r0.copy()
    tol = cfg.epsilon * 1e-2
    delta = np.inf
    for _ in range(cfg.max_iters):
        spread = np.bincount(dst, weights=(r * inv_deg)[src], minlength=g.n)
        nxt = (1.0 - cfg.alpha) * r0 + cfg.alpha * spread
        delta = np.abs(nxt - r).max()
        r = nxt
        if delta < tol:
            nz = np.flatnonzero(r)
            return PPRVector(seed, nz, r[nz])
    raise ConvergenceError(f"no convergence after {cfg.max_iters} iterations "
                           f"(last max change {delta:.3e})")


@numba.njit(nogil=True, cache=True)
def _push_kernel(offsets, targets, seed, alpha, eps):
    n = offsets.size - 1
    est = np.zeros(n)
    res = np.zeros(n)
    queued = np.zeros(n, dtype=np.bool_)
    seen = np.zeros(n, dtype=np.bool_)
    touched = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    size = 1
    queue[0] = seed
    queued[seed] = True
    seen[seed] = True
    touched[0] = seed
    n_touched = 1
    res[seed] = 1.0
    while size > 0:
        u = queue[head]
        head = (head + 1) % n
        size -= 1
        queued[u] = False
        deg = offsets[u + 1] - offsets[u]
        q = res[u]
        est[u] += (1.0 - alpha) * q
        res[u] = 0.0
        if deg == 0:
            # dangling: behaves as a self-loop
            res[u] += alpha * q
            if res[u] > eps and not queued[u]:
                queue[(head + size) % n] = u
                size += 1
                queued[u] = True
            continue
        share = alpha * q / deg
        for e in range(offsets[u], offsets[u + 1]):
            v = targets[e]
            res[v] += share
            if not seen[v]:
                seen[v] = True
                touched[n_touched] = v
                n_touched += 1
            if not queued[v]:
                dv = max(offsets[v + 1] - offsets[v], 1)
                if res[v] > eps * dv:
                    queue[(head + size) % n] = v
                    size += 1
                    queued[v] = True
    nodes = np.sort(touched[:n_touched])
    return nodes, est[nodes]


def ppr_forward_push(g: Graph, seed: int, cfg: PPRConfig) -> PPRVector:
    """Local push approximation; only nodes reachable from ``seed`` are visited.

    On return every residual satisfies ``res[u] <= epsilon * max(deg(u), 1)``.
    """
    _check_seed(g, seed)
    nodes, est = _push_kernel(g.out_offsets, g.out_targets, seed, cfg.alpha, cfg.epsilon)
    keep = est > 0
    return PPRVector(seed, nodes[keep], est[keep])


def top_k_sequence(r: PPRVector, cfg: PPRConfig) -> NodeSequence:
    """Top-k non-seed nodes by score; ties go to the smaller node id."""
    sel = (r.nodes != r.seed) & (r.scores > 0)
    nodes, scores = r.nodes[sel], r.scores[sel]
    order = np.lexsort((nodes, -scores))[: cfg.top_k]
    return NodeSequence(int(r.seed), nodes[order].astype(np.int64),
                        scores[order].astype(np.float32))


def _sample_one(g: Graph, seed: int, cfg: PPRConfig) -> NodeSequence:
    return top_k_sequence(ppr_forward_push(g, int(seed), cfg), cfg)


def sample_sequences(g: Graph, seeds, cfg: PPRConfig, threads: int = 1) -> list[NodeSequence]:
    seeds = [int(s) for s in seeds]
    for s in seeds:
        _check_seed(g, s)
    if threads <= 1 or len(seeds) < 2:
        return [_sample_one(g, s, cfg) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: _sample_one(g, s, cfg), seeds))


# -- binary sequence dump --

_HEAD = struct.Struct("<4sIQ")
_REC = struct.Struct("<QI")
_ENTRY = np.dtype([("node", "<u8"), ("score", "<f4")])


def write_sequences(path, seqs: list[NodeSequence]) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(SEQ_MAGIC, SEQ_VERSION, len(seqs)))
        for s in seqs:
            fh.write(_REC.pack(s.seed, s.context.size))
            body = np.empty(s.context.size, dtype=_ENTRY)
            body["node"] = s.context
            body["score"] = s.scores
            fh.write(body.tobytes())


def read_sequences(path) -> list[NodeSequence]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEAD.size:
        raise InputError(f"{path}: truncated sequence file")
    magic, version, count = _HEAD.unpack_from(raw)
    if magic != SEQ_MAGIC or version != SEQ_VERSION:
        raise InputError(f"{path}: not a sequence file (magic {magic!r}, version {version})")
    pos = _HEAD.size
    out = []
    for _ in range(count):
        if pos + _REC.size > len(raw):
            raise InputError(f"{path}: truncated record")
        seed, length = _REC.unpack_from(raw, pos)
        pos += _REC.size
        nbytes = length * _ENTRY.itemsize
        if pos + nbytes > len(raw):
            raise InputError(f"{path}: truncated record")
        body = np.frombuffer(raw, dtype=_ENTRY, count=length, offset=pos)
        pos += nbytes
        out.append(NodeSequence(int(seed), body["node"].astype(np.int64),
                                body["score"].astype(np.float32)))
    if pos != len(raw):
        raise InputError(f"{path}: trailing bytes after {count} records")
    return out
