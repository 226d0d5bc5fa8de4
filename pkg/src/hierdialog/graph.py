"""Heterogeneous dialogue graph and its refinement.

Nodes: index 0 is the dialogue node, 1..m the turns, m+1..m+k the
arguments.  Edge channels are symmetric boolean adjacencies.  Refinement is
a soft channel selection composed over ``G`` steps (a simplified graph
transformer network) followed by mean-aggregating graph convolutions.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .preprocess import ARG_IDS, EncodedSequence

CHANNELS = ("DIALOGUE", "SPEAKER", "ENTITY", "SEQUENCE", "IDENTITY")
NUM_CHANNELS = len(CHANNELS)

# instrumentation for ablation checks
call_counts: Counter = Counter()


@dataclass
class HetGraph:
    num_turns: int
    num_args: int
    channels: dict[str, np.ndarray]
    node_features: np.ndarray | None = None
    turn_speakers: list[int] = field(default_factory=list)

    @property
    def node_count(self) -> int:
        return 1 + self.num_turns + self.num_args

    def node_kind(self, idx: int) -> str:
        if idx == 0:
            return "dialogue"
        return "turn" if idx <= self.num_turns else "argument"

    def edges(self, channel: str) -> list[tuple[int, int]]:
        """Undirected edges (i < j) of a channel in sorted order; IDENTITY lists (i, i)."""
        a = self.channels[channel]
        if channel == "IDENTITY":
            return [(i, i) for i in range(self.node_count)]
        rows, cols = np.nonzero(np.triu(a, k=1))
        return list(zip(rows.tolist(), cols.tolist()))

    def stacked(self) -> np.ndarray:
        return np.stack([self.channels[c] for c in CHANNELS])


@dataclass
class GraphParams:
    gtn_logits: Tensor  # (G, NUM_CHANNELS)
    gcn_weights: list[Tensor]
    gcn_biases: list[Tensor]

    def named(self) -> dict[str, Tensor]:
        out = {"gtn_logits": self.gtn_logits}
        for i, (w, b) in enumerate(zip(self.gcn_weights, self.gcn_biases)):
            out[f"gcn{i}.w"] = w
            out[f"gcn{i}.b"] = b
        return out


def init_graph(rng: np.random.Generator, dim: int, steps: int, layers: int) -> GraphParams:
    bound = np.sqrt(6.0 / (2 * dim))
    return GraphParams(
        gtn_logits=Tensor(np.zeros((steps, NUM_CHANNELS)), requires_grad=True),
        gcn_weights=[Tensor(rng.uniform(-bound, bound, (dim, dim)), requires_grad=True) for _ in range(layers)],
        gcn_biases=[Tensor(np.zeros(dim), requires_grad=True) for _ in range(layers)],
    )


def graph_structure(seq: EncodedSequence) -> HetGraph:
    """Typed channels for an encoded sequence; no node features attached."""
    m, k = seq.num_turns, seq.num_args
    n = 1 + m + k
    ch = {c: np.zeros((n, n), dtype=bool) for c in CHANNELS}
    ids = seq.token_ids
    speakers = [seq.speaker_ids[s] for s, _ in seq.turn_spans]
    for t in range(1, m + 1):
        ch["DIALOGUE"][0, t] = ch["DIALOGUE"][t, 0] = True
    for a, b in combinations(range(m), 2):
        ch["SEQUENCE"][a + 1, b + 1] = ch["SEQUENCE"][b + 1, a + 1] = True
        if speakers[a] == speakers[b]:
            ch["SPEAKER"][a + 1, b + 1] = ch["SPEAKER"][b + 1, a + 1] = True
    for i, (s, e) in enumerate(seq.turn_spans):
        present = set(ids[s:e])
        for j in range(k):
            if ARG_IDS[j] in present:
                ch["ENTITY"][1 + m + j, 1 + i] = ch["ENTITY"][1 + i, 1 + m + j] = True
    np.fill_diagonal(ch["IDENTITY"], True)
    return HetGraph(m, k, ch, turn_speakers=speakers)


def node_positions(seq: EncodedSequence) -> list[int]:
    """Hidden-state rows feeding each node: [CLS] then every turn/argument token."""
    return [seq.cls_position] + list(seq.tau_positions)


def build_graph(seq: EncodedSequence, hidden: np.ndarray) -> HetGraph:
    """Graph with node features copied from the [CLS] and turn-token rows of ``hidden``."""
    if not seq.has_tau:
        raise ValueError("build_graph needs turn tokens; use pooled features for sequences without them")
    graph = graph_structure(seq)
    graph.node_features = np.asarray(hidden)[node_positions(seq)].copy()
    return graph


def normalize_channels(channels: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization D^-1/2 A D^-1/2 per channel; empty rows stay zero."""
    a = channels.astype(np.float64)
    deg = a.sum(axis=-1)
    inv = np.zeros_like(deg)
    np.divide(1.0, np.sqrt(deg), out=inv, where=deg > 0)
    return a * inv[..., :, None] * inv[..., None, :]


def compose(channels: np.ndarray, logits: Tensor) -> Tensor:
    """Batched composition over normalized channels of shape (B, C, n, n).

    Step g mixes channels with softmax(logits[g]); the steps are chained by
    matrix product.
    """
    weights = ad.softmax(logits)  # (G, C)
    mixed = ad.as_tensor(channels.transpose(0, 2, 3, 1)) @ weights.transpose(1, 0)  # (B, n, n, G)
    mixed = mixed.transpose(0, 3, 1, 2)  # (B, G, n, n)
    out = ad.getitem(mixed, (slice(None), 0))
    for g in range(1, logits.shape[0]):
        out = out @ ad.getitem(mixed, (slice(None), g))
    return out


def gcn(adjacency: Tensor, features: Tensor, params: GraphParams) -> Tensor:
    """X <- D^-1 (A + I) X W + b per layer, ReLU between layers but not after the last."""
    n = adjacency.shape[-1]
    prop = ad.row_normalize(adjacency + np.eye(n))
    x = features
    last = len(params.gcn_weights) - 1
    for i, (w, b) in enumerate(zip(params.gcn_weights, params.gcn_biases)):
        x = prop @ x @ w + b
        if i < last:
            x = ad.relu(x)
    return x


def refine(channels: np.ndarray, features: Tensor, params: GraphParams) -> Tensor:
    """Batched graph pass: (B, C, n, n) normalized channels, (B, n, d) features."""
    call_counts["graph_forward"] += 1
    return gcn(compose(channels, params.gtn_logits), features, params)


# single-graph entry points


def gtn_compose(graph: HetGraph, params: GraphParams) -> np.ndarray:
    with ad.no_grad():
        return compose(normalize_channels(graph.stacked())[None], params.gtn_logits).data[0]


def gcn_forward(adjacency: np.ndarray, features: np.ndarray, params: GraphParams) -> np.ndarray:
    with ad.no_grad():
        return gcn(Tensor(adjacency[None]), Tensor(features[None]), params).data[0]


def graph_forward(graph: HetGraph, params: GraphParams) -> np.ndarray:
    if graph.node_features is None:
        raise ValueError("graph has no node features")
    with ad.no_grad():
        channels = normalize_channels(graph.stacked())[None]
        return refine(channels, Tensor(graph.node_features[None]), params).data[0]
