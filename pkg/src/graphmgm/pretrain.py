"""Masked graph modeling: masking, encoding, both decoders and the training loop."""
from __future__ import annotations

import csv
import logging
import math
import zlib
from dataclasses import asdict, dataclass, fields

import numpy as np
import torch
from torch import nn

from graphmgm.graph import InputError
from graphmgm.nn import (AdamW, Encoder, default_heads, init_params, load_checkpoint,
                         save_checkpoint)
from graphmgm.ppr import NodeSequence

log = logging.getLogger(__name__)

# config keys that appear verbatim in the pre-training hyper-parameter table
TABLE_KEYS = ("mask_rate", "hidden_size", "lr", "weight_decay", "dropout", "optimizer",
              "num_epochs", "num_layers", "ppr_topk", "lambda")


@dataclass(frozen=True)
class PretrainConfig:
    # desk-scale defaults; PretrainConfig.published() gives the published ones
    mask_rate: float = 0.85
    hidden_size: int = 64
    lr: float = 3e-4
    weight_decay: float = 0.01
    dropout: float = 0.2
    optimizer: str = "adamw"
    num_epochs: int = 10
    num_layers: int = 2
    ppr_topk: int = 128
    lambda_: float = 0.1
    gamma: float = 2.0
    tau: float = 0.5
    pair_budget: int = 128
    batch_size: int = 512
    decoder_layers: int = 2
    num_heads: int | None = None
    ffn_mult: int = 4
    exempt_seed: bool = False
    contrast: str = "shared"
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.mask_rate < 1.0:
            raise InputError("mask_rate must lie in (0, 1)")
        if self.gamma < 1:
            raise InputError("gamma must be >= 1")
        if self.lambda_ < 0:
            raise InputError("lambda must be >= 0")
        if self.pair_budget < 1 or self.batch_size < 1 or self.num_epochs < 0:
            raise InputError("pair_budget and batch_size must be >= 1, num_epochs >= 0")
        if self.optimizer != "adamw":
            raise InputError(f"unsupported optimizer {self.optimizer!r}")
        if self.contrast not in ("shared", "per_positive"):
            raise InputError(f"unknown contrast mode {self.contrast!r}")
        if self.tau <= 0 or not 0 <= self.dropout < 1:
            raise InputError("tau must be positive and dropout in [0, 1)")

    @classmethod
    def published(cls, **overrides) -> "PretrainConfig":
        base = dict(hidden_size=1024, num_layers=8, num_epochs=10, ppr_topk=128,
                    batch_size=512)
        base.update(overrides)
        return cls(**base)

    @property
    def heads(self) -> int:
        return self.num_heads or default_heads(self.hidden_size)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PretrainConfig":
        d = dict(d)
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent named sub-stream of one master seed."""
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


# -- masking --

@dataclass(frozen=True, eq=False)
class MaskPlan:
    masked: np.ndarray
    unmasked: np.ndarray

    @property
    def length(self) -> int:
        return self.masked.size + self.unmasked.size


def mask_count(length: int, mask_rate: float) -> int:
    return min(max(math.floor(mask_rate * length), 1), length - 1)


def apply_mask(seq, mask_rate: float, rng: np.random.Generator,
               exempt_seed: bool = False) -> MaskPlan:
    """Mask floor(rate * len) positions, clamped to [1, len - 1].

    The seed (position 0) is eligible unless ``exempt_seed``.
    """
    length = seq if isinstance(seq, (int, np.integer)) else len(seq)
    if length < 2:
        raise InputError(f"cannot mask a sequence of length {length}")
    l = mask_count(length, mask_rate)
    pool = np.arange(1 if exempt_seed else 0, length)
    l = min(l, pool.size)
    masked = np.sort(rng.choice(pool, size=l, replace=False))
    unmasked = np.setdiff1d(np.arange(length), masked)
    return MaskPlan(masked, unmasked)


@dataclass(eq=False)
class Batch:
    """Padded batch. Boolean masks are True where a slot is padding."""

    nodes: np.ndarray          # (B, T) node ids, 0 at padding
    pad: np.ndarray            # (B, T)
    masked: np.ndarray         # (B, T) real masked positions
    plans: list
    u_pos: np.ndarray          # (B, Tu) positions of unmasked tokens
    u_pad: np.ndarray          # (B, Tu)

    @property
    def unmasked_counts(self) -> np.ndarray:
        return (~self.u_pad).sum(1)


def build_batch(seqs: list[NodeSequence], mask_rate: float, rng,
                exempt_seed: bool = False, plans=None) -> Batch:
    b = len(seqs)
    t = max(len(s) for s in seqs)
    nodes = np.zeros((b, t), dtype=np.int64)
    pad = np.ones((b, t), dtype=bool)
    masked = np.zeros((b, t), dtype=bool)
    if plans is None:
        plans = [apply_mask(s, mask_rate, rng, exempt_seed) for s in seqs]
    tu = max(p.unmasked.size for p in plans)
    u_pos = np.zeros((b, tu), dtype=np.int64)
    u_pad = np.ones((b, tu), dtype=bool)
    for i, (s, p) in enumerate(zip(seqs, plans)):
        if p.length != len(s):
            raise InputError("mask plan does not match sequence length")
        nodes[i, :len(s)] = s.nodes
        pad[i, :len(s)] = False
        masked[i, p.masked] = True
        u_pos[i, :p.unmasked.size] = p.unmasked
        u_pad[i, :p.unmasked.size] = False
    return Batch(nodes, pad, masked, plans, u_pos, u_pad)


# -- model --

class MaskedGraphModel(nn.Module):
    """Projection, encoder, feature decoder, structure MLP and mask token."""

    def __init__(self, feat_dim: int, hidden: int, num_layers: int, decoder_layers: int,
                 heads: int, ffn_mult: int = 4, dropout: float = 0.0):
        super().__init__()
        self.dims = dict(feat_dim=feat_dim, hidden=hidden, num_layers=num_layers,
                         decoder_layers=decoder_layers, heads=heads, ffn_mult=ffn_mult,
                         dropout=dropout)
        self.proj = nn.Linear(feat_dim, hidden)
        self.encoder = Encoder(hidden, num_layers, heads, ffn_mult, dropout)
        self.mask_token = nn.Parameter(torch.zeros(hidden))
        self.decoder = Encoder(hidden, decoder_layers, heads, ffn_mult, dropout)
        self.decoder_head = nn.Linear(hidden, feat_dim)
        self.struct_mlp = nn.Sequential(nn.Linear(hidden, hidden), nn.ReLU(),
                                        nn.Linear(hidden, hidden))

    @classmethod
    def from_config(cls, feat_dim: int, cfg: PretrainConfig) -> "MaskedGraphModel":
        return cls(feat_dim, cfg.hidden_size, cfg.num_layers, cfg.decoder_layers, cfg.heads,
                   cfg.ffn_mult, cfg.dropout)

    @property
    def has_decoder(self) -> bool:
        return self.decoder_head is not None

    def encode(self, x, p, padding_mask=None):
        """Encode projected features plus positional vectors."""
        if p.shape[-1] != self.dims["hidden"]:
            raise InputError(f"positional dim {p.shape[-1]} != hidden {self.dims['hidden']}")
        return self.encoder(self.proj(x) + p, padding_mask)

    def reconstruct(self, h, padding_mask=None):
        """Decoder transformer followed by a linear map back to feature space."""
        if not self.has_decoder:
            raise InputError("checkpoint has no feature decoder")
        return self.decoder_head(self.decoder(h, padding_mask))


def _gather(table: torch.Tensor, idx: np.ndarray, pad: np.ndarray) -> torch.Tensor:
    out = table[torch.from_numpy(idx)]
    return out.masked_fill(torch.from_numpy(pad)[..., None], 0.0)


def encode_unmasked(batch: Batch, x_pos, p_pos, model: MaskedGraphModel):
    """Encode only unmasked tokens; returns (B, Tu, d') hidden states.

    ``x_pos``/``p_pos`` are position-aligned (B, T, .) feature and PE tensors.
    """
    idx = torch.from_numpy(batch.u_pos)
    upad = torch.from_numpy(batch.u_pad)
    x_u = torch.gather(x_pos, 1, idx[..., None].expand(-1, -1, x_pos.shape[-1]))
    p_u = torch.gather(p_pos, 1, idx[..., None].expand(-1, -1, p_pos.shape[-1]))
    x_u = x_u.masked_fill(upad[..., None], 0.0)
    p_u = p_u.masked_fill(upad[..., None], 0.0)
    return model.encode(x_u, p_u, upad)


def assemble_decoder_input(h_u, batch: Batch, mask_token, p_pos):
    """Masked slots get mask_token + p_i, unmasked slots encoder output + p_i."""
    b, t = batch.nodes.shape
    if h_u.shape[:2] != batch.u_pos.shape:
        raise InputError("encoder output does not match the batch mask plans")
    rows, cols = np.nonzero(~batch.u_pad)
    tgt = (torch.from_numpy(rows), torch.from_numpy(batch.u_pos[rows, cols]))
    placed = h_u.new_zeros(b, t, h_u.shape[-1]).index_put(tgt, h_u[rows, cols])
    is_masked = torch.from_numpy(batch.masked | batch.pad)[..., None]
    return torch.where(is_masked, mask_token.expand(b, t, -1), placed) + p_pos


def cosine(a, b):
    return (a * b).sum(-1) / (a.norm(dim=-1) * b.norm(dim=-1))


def feature_recon_loss(z, x, gamma: float = 2.0):
    """Mean over rows of (1 - cos(x_i, z_i))^gamma."""
    if z.shape != x.shape:
        raise ValueError(f"shape mismatch {tuple(z.shape)} vs {tuple(x.shape)}")
    for name, t in (("target", x), ("reconstruction", z)):
        zero = torch.nonzero(t.detach().norm(dim=-1) == 0)
        if zero.numel():
            raise ValueError(f"zero-norm {name} row at masked index {zero[0].item()}")
    return ((1.0 - cosine(x, z)) ** gamma).mean()


@dataclass(frozen=True)
class Pairs:
    """Flat token indices (into packed unmasked tokens) for positive/negative pairs."""

    pos_a: np.ndarray
    pos_b: np.ndarray
    neg_a: np.ndarray
    neg_b: np.ndarray


def sample_pairs(counts, t: int, rng: np.random.Generator) -> Pairs | None:
    """Uniform with-replacement draws of T intra- and T cross-sequence ordered pairs.

    ``counts[i]`` is the number of unmasked tokens of sequence i; tokens are
    numbered sequence-major. Returns None (with a warning) when no negatives
    or no positives exist.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if t < 1:
        raise ValueError("pair budget must be >= 1")
    offsets = np.concatenate([[0], np.cumsum(counts)])
    total = offsets[-1]
    w_pos = counts * (counts - 1)
    w_neg = counts * (total - counts)
    if counts.size < 2 or w_neg.sum() == 0 or w_pos.sum() == 0:
        log.warning("batch of %d sequences has no valid pair sets; skipping structure loss",
                    counts.size)
        return None
    seq = rng.choice(counts.size, size=t, p=w_pos / w_pos.sum())
    j = rng.integers(0, counts[seq])
    k = rng.integers(0, counts[seq] - 1)
    k = k + (k >= j)
    pos_a, pos_b = offsets[seq] + j, offsets[seq] + k

    seq = rng.choice(counts.size, size=t, p=w_neg / w_neg.sum())
    a = offsets[seq] + rng.integers(0, counts[seq])
    r = rng.integers(0, total - counts[seq])
    b = np.where(r >= offsets[seq], r + counts[seq], r)
    return Pairs(pos_a, pos_b, a, b)


def pair_scores(h_flat, pairs: Pairs, mlp: nn.Module, tau: float):
    """Cosine similarity of MLP-transformed embeddings divided by tau."""
    g = mlp(h_flat)
    idx = [torch.from_numpy(a) for a in (pairs.pos_a, pairs.pos_b, pairs.neg_a, pairs.neg_b)]
    s_pos = cosine(g[idx[0]], g[idx[1]]) / tau
    s_neg = cosine(g[idx[2]], g[idx[3]]) / tau
    return s_pos, s_neg


def structure_loss(s_pos, s_neg, contrast: str = "shared"):
    """InfoNCE over T positive and T negative scores.

    ``shared``: every positive is normalised by the sum over all 2T sampled
    pairs. ``per_positive``: each positive against itself plus the negatives.
    """
    if s_pos.numel() == 0 or s_neg.numel() == 0:
        raise ValueError("empty pair set")
    if contrast == "shared":
        denom = torch.logsumexp(torch.cat([s_pos, s_neg]), dim=0)
        return -(s_pos - denom).mean()
    if contrast == "per_positive":
        neg = s_neg.expand(s_pos.shape[0], -1)
        denom = torch.logsumexp(torch.cat([s_pos[:, None], neg], dim=1), dim=1)
        return -(s_pos - denom).mean()
    raise ValueError(f"unknown contrast mode {contrast!r}")


def total_loss(l1, l2, lam: float):
    return l1 if l2 is None else l1 + lam * l2


def batch_losses(model: MaskedGraphModel, batch: Batch, features, pe, pairs: Pairs | None,
                 cfg: PretrainConfig, x_pos=None):
    """Forward pass for one batch; returns (total, feature loss, structure loss or None)."""
    if x_pos is None:
        x_pos = _gather(features, batch.nodes, batch.pad)
    p_pos = _gather(pe, batch.nodes, batch.pad)
    h_u = encode_unmasked(batch, x_pos, p_pos, model)
    dec_in = assemble_decoder_input(h_u, batch, model.mask_token, p_pos)
    z = model.reconstruct(dec_in, torch.from_numpy(batch.pad))
    sel = torch.from_numpy(batch.masked)
    l1 = feature_recon_loss(z[sel], x_pos[sel], cfg.gamma)
    l2 = None
    if pairs is not None:
        h_flat = h_u[torch.from_numpy(~batch.u_pad)]
        s_pos, s_neg = pair_scores(h_flat, pairs, model.struct_mlp, cfg.tau)
        l2 = structure_loss(s_pos, s_neg, cfg.contrast)
    return total_loss(l1, l2, cfg.lambda_), l1, l2


# -- training --

class TrainingError(RuntimeError):
    pass


@dataclass
class TrainResult:
    model: MaskedGraphModel
    epoch_losses: list
    log_rows: list


def new_model(feat_dim: int, cfg: PretrainConfig, dtype=torch.float32) -> MaskedGraphModel:
    model = MaskedGraphModel.from_config(feat_dim, cfg)
    gen = torch.Generator().manual_seed(int(rng_stream(cfg.rng_seed, "init").integers(2**62)))
    init_params(model, generator=gen)
    return model.to(dtype)


def train(sequences: list[NodeSequence], features, pe, cfg: PretrainConfig,
          model: MaskedGraphModel | None = None, dtype=torch.float32) -> TrainResult:
    """Mini-batch pre-training with the fused objective and AdamW."""
    seqs = [s for s in sequences if len(s) >= 2]
    if len(seqs) < len(sequences):
        log.warning("dropping %d sequences shorter than 2", len(sequences) - len(seqs))
    if not seqs:
        raise InputError("no trainable sequences")
    feats = torch.tensor(np.asarray(features), dtype=dtype)
    pos = torch.tensor(np.asarray(pe), dtype=dtype)
    if pos.shape != (feats.shape[0], cfg.hidden_size):
        raise InputError(f"positional table {tuple(pos.shape)} must be "
                         f"({feats.shape[0]}, {cfg.hidden_size})")
    if model is None:
        model = new_model(feats.shape[1], cfg, dtype)
    opt = AdamW(model.named_parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    order_rng = rng_stream(cfg.rng_seed, "shuffle")
    mask_rng = rng_stream(cfg.rng_seed, "mask")
    pair_rng = rng_stream(cfg.rng_seed, "pairs")
    torch.manual_seed(int(rng_stream(cfg.rng_seed, "dropout").integers(2**62)))
    model.train()
    rows, epoch_losses, step = [], [], 0
    for epoch in range(cfg.num_epochs):
        perm = order_rng.permutation(len(seqs))
        totals = []
        for start in range(0, len(seqs), cfg.batch_size):
            chunk = [seqs[i] for i in perm[start:start + cfg.batch_size]]
            batch = build_batch(chunk, cfg.mask_rate, mask_rng, cfg.exempt_seed)
            pairs = sample_pairs(batch.unmasked_counts, cfg.pair_budget, pair_rng)
            loss, l1, l2 = batch_losses(model, batch, feats, pos, pairs, cfg)
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch} step {step}: "
                                    f"feat={l1.item()} struct={None if l2 is None else l2.item()}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            step += 1
            totals.append(loss.item())
            rows.append((epoch, step, loss.item(), l1.item(),
                         float("nan") if l2 is None else l2.item()))
        epoch_losses.append(float(np.mean(totals)))
        log.info("epoch %d mean loss %.5f", epoch, epoch_losses[-1])
    model.eval()
    return TrainResult(model, epoch_losses, rows)


def write_train_log(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "step", "loss_total", "loss_feat", "loss_struct"])
        for epoch, step, lt, lf, ls in rows:
            w.writerow([epoch, step, repr(lt), repr(lf), "" if math.isnan(ls) else repr(ls)])


def save_model(path, model: nn.Module, cfg: PretrainConfig | None = None, extra: dict | None = None) -> None:
    config = {"model": model.dims, "pretrain": None if cfg is None else cfg.to_dict()}
    if extra:
        config.update(extra)
    save_checkpoint(path, config, model.state_dict())


def load_model(path) -> tuple[MaskedGraphModel, dict]:
    """Rebuild a model from a checkpoint; extra (head) tensors stay in the config."""
    config, params = load_checkpoint(path)
    try:
        model = MaskedGraphModel(**config["model"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: checkpoint config lacks model dims ({exc})") from None
    own = model.state_dict()
    state = {k: torch.from_numpy(v) for k, v in params.items() if k in own}
    if "decoder_head.weight" not in state:
        model.decoder_head = None
        model.decoder = Encoder(model.dims["hidden"], 0, model.dims["heads"])
        own = model.state_dict()
    missing = set(own) - set(state)
    if missing:
        raise InputError(f"{path}: checkpoint missing {sorted(missing)[:3]}")
    model.load_state_dict(state)
    model.eval()
    config["extra_params"] = {k: v for k, v in params.items() if k not in own}
    return model, config

