"""Transformer building blocks, AdamW and the binary checkpoint format.

Autograd is torch's; everything above raw tensor ops is defined here so the
attention scaling, dropout placement and norm order are explicit.
"""
from __future__ import annotations

import json
import math
import struct
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from graphmgm.graph import InputError

INIT_STD = 0.02


def default_heads(hidden: int) -> int:
    """hidden // 64, at least 1, lowered until it divides ``hidden``."""
    h = max(hidden // 64, 1)
    while hidden % h:
        h -= 1
    return h


def attention(q, k, v, padding_mask=None, dropout: float = 0.0, training: bool = False):
    """softmax(q k^T / sqrt(d_head) + mask) v over the last two dims.

    ``padding_mask`` is boolean (..., T_k) with True marking keys to ignore.
    """
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise ValueError(f"incompatible shapes q{tuple(q.shape)} k{tuple(k.shape)} v{tuple(v.shape)}")
    logits = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    if padding_mask is not None:
        if padding_mask.shape[-1] != k.shape[-2]:
            raise ValueError("padding mask length does not match key length")
        mask = padding_mask.reshape(padding_mask.shape[:-1] + (1,) * (logits.dim() - padding_mask.dim()) + padding_mask.shape[-1:])
        logits = logits.masked_fill(mask, float("-inf"))
    probs = torch.softmax(logits, dim=-1)
    if training and dropout > 0:
        probs = F.dropout(probs, dropout, training=True)
    return probs @ v


def ffn(h, w1, b1, w2, b2):
    """ReLU(h W1 + b1) W2 + b2 with weights stored (in, out)."""
    if h.shape[-1] != w1.shape[0] or w1.shape[1] != w2.shape[0]:
        raise ValueError("ffn weight shapes do not chain")
    return torch.relu(h @ w1 + b1) @ w2 + b2


class MultiHeadAttention(nn.Module):
    def __init__(self, hidden: int, heads: int):
        super().__init__()
        if hidden % heads:
            raise InputError(f"{heads} heads do not divide hidden size {hidden}")
        self.heads = heads
        self.w_q = nn.Parameter(torch.empty(hidden, hidden))
        self.w_k = nn.Parameter(torch.empty(hidden, hidden))
        self.w_v = nn.Parameter(torch.empty(hidden, hidden))
        self.w_o = nn.Parameter(torch.empty(hidden, hidden))

    def _split(self, x):
        b, t, d = x.shape
        return x.view(b, t, self.heads, d // self.heads).transpose(1, 2)

    def forward(self, h, padding_mask=None, dropout=0.0):
        b, t, d = h.shape
        q, k, v = (self._split(h @ w) for w in (self.w_q, self.w_k, self.w_v))
        mask = None if padding_mask is None else padding_mask[:, None, :]
        out = attention(q, k, v, mask, dropout, self.training)
        return out.transpose(1, 2).reshape(b, t, d) @ self.w_o


class FeedForward(nn.Module):
    def __init__(self, hidden: int, inner: int):
        super().__init__()
        self.w1 = nn.Parameter(torch.empty(hidden, inner))
        self.b1 = nn.Parameter(torch.zeros(inner))
        self.w2 = nn.Parameter(torch.empty(inner, hidden))
        self.b2 = nn.Parameter(torch.zeros(hidden))

    def forward(self, h):
        return ffn(h, self.w1, self.b1, self.w2, self.b2)


class TransformerLayer(nn.Module):
    """Pre-norm layer: x = h + Attn(LN(h)); out = x + FFN(LN(x))."""

    def __init__(self, hidden: int, heads: int, ffn_mult: int = 4, dropout: float = 0.0):
        super().__init__()
        self.dropout = dropout
        self.ln1 = nn.LayerNorm(hidden)
        self.attn = MultiHeadAttention(hidden, heads)
        self.ln2 = nn.LayerNorm(hidden)
        self.ffn = FeedForward(hidden, ffn_mult * hidden)

    def forward(self, h, padding_mask=None):
        if h.dim() != 3 or h.shape[-1] != self.ln1.normalized_shape[0]:
            raise ValueError(f"expected (B, T, {self.ln1.normalized_shape[0]}), got {tuple(h.shape)}")
        x = h + self.attn(self.ln1(h), padding_mask, self.dropout)
        y = self.ffn(self.ln2(x))
        if self.training and self.dropout > 0:
            y = F.dropout(y, self.dropout, training=True)
        return x + y


class Encoder(nn.Module):
    """A plain stack of transformer layers; zero layers is the identity."""

    def __init__(self, hidden: int, num_layers: int, heads: int, ffn_mult: int = 4,
                 dropout: float = 0.0):
        super().__init__()
        self.layers = nn.ModuleList(
            TransformerLayer(hidden, heads, ffn_mult, dropout) for _ in range(num_layers))

    def forward(self, h, padding_mask=None):
        for layer in self.layers:
            h = layer(h, padding_mask)
        return h


def init_params(module: nn.Module, std: float = INIT_STD, generator=None) -> None:
    """Normal(0, std) for matrices, zero biases, unit/zero layer norms."""
    with torch.no_grad():
        for name, p in module.named_parameters():
            leaf = name.rsplit(".", 1)[-1]
            if isinstance(_owner(module, name), nn.LayerNorm):
                p.fill_(1.0 if leaf == "weight" else 0.0)
            elif p.dim() >= 2 or leaf in ("mask_token",):
                p.normal_(0.0, std, generator=generator)
            else:
                p.zero_()


def _owner(module: nn.Module, name: str) -> nn.Module:
    for part in name.split(".")[:-1]:
        module = getattr(module, part)
    return module


# -- optimizer --

@dataclass
class OptimizerState:
    lr: float = 3e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    exp_avg: dict = field(default_factory=dict)
    exp_avg_sq: dict = field(default_factory=dict)


@torch.no_grad()
def adamw_step(params, state: OptimizerState) -> None:
    """One AdamW update in place; decay is applied to the value, not the moments.

    ``params`` is an iterable of (name, parameter) pairs. Parameters whose
    ``grad`` is None are skipped.
    """
    state.step += 1
    b1, b2 = state.betas
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, p in params:
        if p.grad is None:
            continue
        if name not in state.exp_avg:
            state.exp_avg[name] = torch.zeros_like(p)
            state.exp_avg_sq[name] = torch.zeros_like(p)
        m, v = state.exp_avg[name], state.exp_avg_sq[name]
        if m.shape != p.shape:
            raise ValueError(f"moment buffer shape mismatch for {name}")
        p.mul_(1.0 - state.lr * state.weight_decay)
        m.mul_(b1).add_(p.grad, alpha=1.0 - b1)
        v.mul_(b2).addcmul_(p.grad, p.grad, value=1.0 - b2)
        denom = (v / bc2).sqrt_().add_(state.eps)
        p.addcdiv_(m, denom, value=-state.lr / bc1)


class AdamW:
    """Thin stateful wrapper around :func:`adamw_step`."""

    def __init__(self, named_params, lr=3e-4, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        self.params = list(named_params)
        self.state = OptimizerState(lr, tuple(betas), eps, weight_decay)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None

    def step(self) -> None:
        adamw_step(self.params, self.state)


# -- checkpoints --

CKPT_MAGIC = b"MGTC"
CKPT_VERSION = 1


def save_checkpoint(path, config: dict, params) -> None:
    """Write ``params`` (name -> tensor/array, in order) with a JSON config."""
    cfg = json.dumps(config, sort_keys=True).encode("utf-8")
    items = list(params.items())
    chunks = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(cfg)), cfg,
              struct.pack("<I", len(items))]
    for name, value in items:
        arr = value.detach().cpu().numpy() if torch.is_tensor(value) else np.asarray(value)
        arr = np.ascontiguousarray(arr, dtype="<f4")
        key = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(key)) + key)
        chunks.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path) -> tuple[dict, OrderedDict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CKPT_MAGIC:
        raise InputError(f"{path}: not a checkpoint (magic {raw[:4]!r})")
    try:
        version, clen = struct.unpack_from("<II", raw, 4)
        if version != CKPT_VERSION:
            raise InputError(f"{path}: unsupported checkpoint version {version}")
        pos = 12
        config = json.loads(raw[pos:pos + clen].decode("utf-8"))
        pos += clen
        (count,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        params = OrderedDict()
        for _ in range(count):
            (klen,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            name = raw[pos:pos + klen].decode("utf-8")
            pos += klen
            (rank,) = struct.unpack_from("<B", raw, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", raw, pos)
            pos += 4 * rank
            size = int(np.prod(shape, dtype=np.int64))
            if pos + 4 * size > len(raw):
                raise struct.error(f"payload of {name!r} runs past end of file")
            params[name] = np.frombuffer(raw, "<f4", size, pos).reshape(shape).copy()
            pos += 4 * size
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: truncated checkpoint ({exc})") from None
    if pos != len(raw):
        raise InputError(f"{path}: trailing bytes in checkpoint")
    return config, params
