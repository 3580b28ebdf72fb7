"""Masked graph-transformer pre-training on PPR-sampled node sequences."""

from graphmgm.graph import (
    EdgeLabelSet,
    FeatureMatrix,
    Graph,
    InputError,
    LabelSet,
    from_edges,
    load_edge_labels,
    load_edge_list,
    load_features,
    load_labels,
    out_neighbors,
    write_features,
)
from graphmgm.ppr import (
    NodeSequence,
    PPRConfig,
    PPRVector,
    ppr_forward_push,
    ppr_power_iteration,
    sample_sequences,
    top_k_sequence,
)

__all__ = [
    "EdgeLabelSet",
    "FeatureMatrix",
    "Graph",
    "InputError",
    "LabelSet",
    "NodeSequence",
    "PPRConfig",
    "PPRVector",
    "from_edges",
    "load_edge_labels",
    "load_edge_list",
    "load_features",
    "load_labels",
    "out_neighbors",
    "ppr_forward_push",
    "ppr_power_iteration",
    "sample_sequences",
    "top_k_sequence",
    "write_features",
]
