"""Immutable CSR graphs, node features and label files."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MATRIX_HEADER = struct.Struct("<4sIQI")
MATRIX_VERSION = 1
FEATURE_MAGIC = b"MGTF"


class InputError(ValueError):
    """Raised for malformed or inconsistent input files and arguments."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Compressed sparse row adjacency.

    ``node_ids[i]`` is the external id of dense node ``i``; it is sorted so
    external ids can be mapped back with a binary search.
    """

    out_offsets: np.ndarray
    out_targets: np.ndarray
    directed: bool
    node_ids: np.ndarray = field(repr=False)

    def __post_init__(self):
        off, tgt = self.out_offsets, self.out_targets
        if off.ndim != 1 or off.size < 1 or off[0] != 0 or off[-1] != tgt.size:
            raise InputError("out_offsets must start at 0 and end at the edge count")
        if np.any(np.diff(off) < 0):
            raise InputError("out_offsets must be non-decreasing")
        if tgt.size and (tgt.min() < 0 or tgt.max() >= self.n):
            raise InputError("edge target out of range")
        if self.node_ids.shape != (self.n,):
            raise InputError("node id table does not match node count")
        for arr in (off, tgt, self.node_ids):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.out_offsets.size - 1

    @property
    def m(self) -> int:
        return int(self.out_targets.size)

    @property
    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_offsets)

    def edges(self) -> np.ndarray:
        """(m, 2) array of (src, dst) dense ids in CSR order."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degrees)
        return np.stack([src, self.out_targets.astype(np.int64)], axis=1)

    def index_of(self, external_ids) -> np.ndarray:
        ext = np.asarray(external_ids, dtype=np.int64)
        idx = np.searchsorted(self.node_ids, ext)
        bad = (idx >= self.n) | (self.node_ids[np.minimum(idx, self.n - 1)] != ext)
        if np.any(bad):
            raise InputError(f"unknown node id {ext[bad][0]}")
        return idx

    def is_symmetric(self) -> bool:
        e = self.edges()
        fwd = e[:, 0] * self.n + e[:, 1]
        rev = np.sort(e[:, 1] * self.n + e[:, 0])
        return np.array_equal(np.sort(fwd), rev)


def from_edges(src, dst, n: int | None = None, directed: bool = True,
               node_ids=None) -> Graph:
    """Build a CSR graph from dense-id edge arrays (deduplicated, targets sorted)."""
    src = np.asarray(src, dtype=np.int64).ravel()
    dst = np.asarray(dst, dtype=np.int64).ravel()
    if src.shape != dst.shape:
        raise InputError("src and dst lengths differ")
    if n is None:
        n = int(max(src.max(initial=-1), dst.max(initial=-1)) + 1)
    if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
        raise InputError("edge endpoint out of range")
    if not directed:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
    key = np.unique(src * n + dst)
    src, dst = key // n, key % n
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
    if node_ids is None:
        node_ids = np.arange(n, dtype=np.int64)
    return Graph(offsets, dst.astype(np.int64), directed,
                 np.asarray(node_ids, dtype=np.int64))


def symmetrize(g: Graph) -> Graph:
    e = g.edges()
    return from_edges(e[:, 0], e[:, 1], g.n, directed=False, node_ids=g.node_ids)


def load_edge_list(path, undirected: bool = True, num_nodes: int | None = None) -> Graph:
    """Read a whitespace-separated edge list.

    External ids are remapped to dense 0..N-1 in ascending id order; the
    mapping is kept on ``Graph.node_ids``. With ``num_nodes`` the ids must
    already be dense and isolated trailing nodes are kept.
    """
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected two node ids, got {s!r}")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-integer node id in {s!r}") from None
    if not pairs:
        raise InputError(f"{path}: no edges")
    arr = np.asarray(pairs, dtype=np.int64)
    if num_nodes is not None:
        if arr.min() < 0 or arr.max() >= num_nodes:
            raise InputError(f"{path}: node id outside 0..{num_nodes - 1}")
        ids = np.arange(num_nodes, dtype=np.int64)
        dense = arr
    else:
        ids, inv = np.unique(arr, return_inverse=True)
        dense = inv.reshape(arr.shape)
    return from_edges(dense[:, 0], dense[:, 1], ids.size, directed=not undirected,
                      node_ids=ids)


def write_edge_list(path, g: Graph) -> None:
    e = g.node_ids[g.edges()]
    if not g.directed:
        e = e[e[:, 0] <= e[:, 1]]
    np.savetxt(path, e, fmt="%d")


def write_id_map(path, g: Graph) -> None:
    np.savetxt(path, g.node_ids, fmt="%d")


def out_neighbors(g: Graph, v: int) -> np.ndarray:
    if not 0 <= v < g.n:
        raise IndexError(f"node {v} out of range for graph with {g.n} nodes")
    return g.out_targets[g.out_offsets[v]:g.out_offsets[v + 1]]


# -- dense float matrices (features, positional encodings, embeddings) --

@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.dtype != np.float32:
            raise InputError("feature matrix must be a 2-d float32 array")
        if not np.all(np.isfinite(self.data)):
            raise InputError("feature matrix has NaN/Inf entries")
        self.data.setflags(write=False)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def write_matrix(path, data: np.ndarray, magic: bytes) -> None:
    data = np.ascontiguousarray(data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MATRIX_HEADER.pack(magic, MATRIX_VERSION, data.shape[0], data.shape[1]))
        fh.write(data.tobytes())


def read_matrix(path, magic: bytes) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < MATRIX_HEADER.size:
        raise InputError(f"{path}: truncated header")
    got, version, n, d = MATRIX_HEADER.unpack_from(raw)
    if got != magic:
        raise InputError(f"{path}: bad magic {got!r}, expected {magic!r}")
    if version != MATRIX_VERSION:
        raise InputError(f"{path}: unsupported version {version}")
    body = raw[MATRIX_HEADER.size:]
    if len(body) != 4 * n * d:
        raise InputError(f"{path}: payload is {len(body)} bytes, header says {4 * n * d}")
    return np.frombuffer(body, dtype="<f4").reshape(n, d).astype(np.float32)


def write_features(path, feats) -> None:
    data = feats.data if isinstance(feats, FeatureMatrix) else feats
    write_matrix(path, data, FEATURE_MAGIC)


def load_features(path, graph: Graph | None = None) -> FeatureMatrix:
    fm = FeatureMatrix(read_matrix(path, FEATURE_MAGIC))
    if graph is not None and fm.n != graph.n:
        raise InputError(f"{path}: {fm.n} feature rows but graph has {graph.n} nodes")
    return fm


# -- labels --

SPLITS = ("train", "valid", "test")


@dataclass(frozen=True, eq=False)
class LabelSet:
    nodes: np.ndarray      # dense node ids
    classes: np.ndarray
    splits: np.ndarray     # 0=train, 1=valid, 2=test
    num_classes: int

    def __post_init__(self):
        if len({self.nodes.size, self.classes.size, self.splits.size}) != 1:
            raise InputError("label arrays differ in length")
        if np.unique(self.nodes).size != self.nodes.size:
            raise InputError("node labelled twice (splits must be disjoint)")
        if self.classes.size and (self.classes.min() < 0 or self.classes.max() >= self.num_classes):
            raise InputError("class index out of range")

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        sel = self.splits == SPLITS.index(name)
        return self.nodes[sel], self.classes[sel]


def load_labels(path, graph: Graph) -> LabelSet:
    nodes, classes, splits = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].startswith("#") or (lineno == 1 and row[0] == "node_id"):
                continue
            try:
                node, cls, split = int(row[0]), int(row[1]), row[2].strip()
            except (ValueError, IndexError):
                raise InputError(f"{path}:{lineno}: expected node_id,class,split") from None
            if split not in SPLITS:
                raise InputError(f"{path}:{lineno}: unknown split {split!r}")
            nodes.append(node)
            classes.append(cls)
            splits.append(SPLITS.index(split))
    classes = np.asarray(classes, dtype=np.int64)
    return LabelSet(graph.index_of(nodes), classes, np.asarray(splits, dtype=np.int8),
                    int(classes.max()) + 1 if classes.size else 0)


def write_labels(path, labels: LabelSet, graph: Graph) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "class", "split"])
        for v, c, s in zip(labels.nodes, labels.classes, labels.splits):
            w.writerow([int(graph.node_ids[v]), int(c), SPLITS[s]])


@dataclass(frozen=True, eq=False)
class EdgeLabelSet:
    u: np.ndarray
    v: np.ndarray
    label: np.ndarray
    splits: np.ndarray

    def __post_init__(self):
        if np.any(self.u == self.v):
            raise InputError("edge label with u == v")
        key = np.stack([self.u, self.v, self.label], axis=1)
        if np.unique(key, axis=0).shape[0] != key.shape[0]:
            raise InputError("duplicate edge label (splits must be disjoint)")

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        sel = self.splits == SPLITS.index(name)
        return self.u[sel], self.v[sel], self.label[sel]


def load_edge_labels(path, graph: Graph) -> EdgeLabelSet:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].startswith("#") or (lineno == 1 and row[0] == "u"):
                continue
            try:
                u, v, lab, split = int(row[0]), int(row[1]), int(row[2]), row[3].strip()
            except (ValueError, IndexError):
                raise InputError(f"{path}:{lineno}: expected u,v,label,split") from None
            if lab not in (0, 1) or split not in SPLITS:
                raise InputError(f"{path}:{lineno}: bad label or split")
            rows.append((u, v, lab, SPLITS.index(split)))
    if not rows:
        raise InputError(f"{path}: no edge labels")
    arr = np.asarray(rows, dtype=np.int64)
    return EdgeLabelSet(graph.index_of(arr[:, 0]), graph.index_of(arr[:, 1]),
                        arr[:, 2], arr[:, 3].astype(np.int8))


def write_edge_labels(path, el: EdgeLabelSet, graph: Graph) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", "label", "split"])
        for u, v, lab, s in zip(el.u, el.v, el.label, el.splits):
            w.writerow([int(graph.node_ids[u]), int(graph.node_ids[v]), int(lab), SPLITS[s]])
