"""First-order LINE embeddings used as per-node positional encodings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from graphmgm.graph import Graph, InputError, read_matrix, write_matrix

PE_MAGIC = b"MGTP"


@dataclass(frozen=True)
class LineConfig:
    dim: int = 64
    epochs: int = 50
    learning_rate: float = 0.025
    negatives_per_edge: int = 5
    batch_size: int = 1024
    rng_seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.negatives_per_edge < 1:
            raise InputError("dim and negatives_per_edge must be >= 1")
        if self.epochs < 0 or self.batch_size < 1:
            raise InputError("epochs must be >= 0 and batch_size >= 1")


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return np.exp(_log_sigmoid(x))


def line_step(emb: np.ndarray, src, dst, neg) -> tuple[float, np.ndarray]:
    """Mean loss and the ascent direction of the summed objective for one batch."""
    ui, uj, uk = emb[src], emb[dst], emb[neg]
    valid = (neg != src[:, None]) & (neg != dst[:, None])
    pos_dot = np.einsum("ij,ij->i", ui, uj)
    neg_dot = np.einsum("id,ikd->ik", ui, uk)
    loss = -(_log_sigmoid(pos_dot) + (_log_sigmoid(-neg_dot) * valid).sum(1)).mean()
    g_pos = 1.0 - _sigmoid(pos_dot)
    g_neg = -_sigmoid(neg_dot) * valid
    grad = np.zeros_like(emb)
    np.add.at(grad, src, g_pos[:, None] * uj + np.einsum("ik,ikd->id", g_neg, uk))
    np.add.at(grad, dst, g_pos[:, None] * ui)
    np.add.at(grad, neg.ravel(), (g_neg[:, :, None] * ui[:, None, :]).reshape(-1, emb.shape[1]))
    return float(loss), grad


def _negative_table(g: Graph) -> np.ndarray:
    w = np.maximum(g.out_degrees, 0).astype(np.float64) ** 0.75
    return w / w.sum()


def train_line(g: Graph, cfg: LineConfig, return_history: bool = False):
    """Mini-batch SGD on log s(u_i.u_j) + sum_k log s(-u_i.u_k).

    Negatives are drawn proportionally to degree^0.75; a negative that
    coincides with either endpoint of its edge is ignored. The learning rate
    decays linearly to 1e-4 of its start value over the run.
    """
    if g.n == 0:
        raise InputError("empty graph")
    if g.m == 0:
        raise InputError("LINE needs at least one edge")
    rng = np.random.default_rng(cfg.rng_seed)
    emb = rng.uniform(-0.5 / cfg.dim, 0.5 / cfg.dim, size=(g.n, cfg.dim))
    edges = g.edges()
    probs = _negative_table(g)
    total_steps = max(cfg.epochs * -(-g.m // cfg.batch_size), 1)
    step = 0
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(g.m)
        epoch_loss = 0.0
        for start in range(0, g.m, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            src, dst = edges[idx, 0], edges[idx, 1]
            neg = rng.choice(g.n, size=(idx.size, cfg.negatives_per_edge), p=probs)
            lr = cfg.learning_rate * max(1.0 - step / total_steps, 1e-4)
            step += 1

            loss, grad = line_step(emb, src, dst, neg)
            epoch_loss += loss * src.size
            emb += lr * grad
        history.append(epoch_loss / g.m)
    table = emb.astype(np.float32)
    return (table, history) if return_history else table


def zero_encoding(n: int, dim: int) -> np.ndarray:
    if n < 1 or dim < 1:
        raise InputError("n and dim must be >= 1")
    return np.zeros((n, dim), dtype=np.float32)


def write_pe(path, table: np.ndarray) -> None:
    write_matrix(path, table, PE_MAGIC)


def load_pe(path) -> np.ndarray:
    table = read_matrix(path, PE_MAGIC)
    if not np.all(np.isfinite(table)):
        raise InputError(f"{path}: positional table has NaN/Inf entries")
    return table
