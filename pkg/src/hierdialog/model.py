"""Full forward pipeline: encoder, dialogue graph, classifier.

Instances are prepared once (sequence, mask, graph channels, pooling rows)
and then padded into batches.  Node features come from the [CLS] and turn
token rows, or from span means when the model runs without turn tokens.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import RunConfig
from .corpus import Instance
from .errors import DataError
from .encoder import EncoderParams, encode, init_encoder
from .graph import GraphParams, graph_structure, init_graph, normalize_channels, refine
from .head import HeadParams, classify_nodes, init_head, predict
from .masking import apply_padding, build_turn_mask
from .metrics import Prediction
from .preprocess import EncodedSequence, Vocab, encode_instance


@dataclass
class ModelParams:
    encoder: EncoderParams
    graph: GraphParams
    head: HeadParams

    def named(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for prefix, part in (("encoder", self.encoder), ("graph", self.graph), ("head", self.head)):
            out.update({f"{prefix}.{k}": v for k, v in part.named().items()})
        return out

    def zero_grad(self) -> None:
        for t in self.named().values():
            t.grad = None

    def copy(self) -> "ModelParams":
        clone = copy.deepcopy(self)
        clone.zero_grad()
        return clone


def init_params(cfg: RunConfig, num_classes: int, vocab_size: int) -> ModelParams:
    rng = np.random.default_rng(cfg.seed)
    return ModelParams(
        init_encoder(rng, vocab_size, cfg.dim, cfg.ff_dim, cfg.layers, cfg.heads, cfg.max_len, cfg.max_speakers),
        init_graph(rng, cfg.dim, cfg.gtn_steps, cfg.graph_layers),
        init_head(rng, cfg.dim, cfg.k_max, num_classes),
    )


@dataclass
class Prepared:
    """Everything about one instance that does not depend on parameters."""

    id: str
    seq: EncodedSequence
    allow: np.ndarray  # (N, N)
    channels: np.ndarray  # (C, n, n) normalized
    pool: np.ndarray  # (n, N) rows producing node features
    label: int


def prepare(inst: Instance, vocab: Vocab, cfg: RunConfig) -> Prepared:
    seq = encode_instance(inst, vocab, cfg.max_len, special_tokens=not cfg.no_special_tokens)
    if seq.num_args > cfg.k_max:
        raise DataError("ARG_COUNT", f"instance {inst.id!r} has {seq.num_args} arguments, k_max={cfg.k_max}")
    allow = build_turn_mask(seq, enabled=not cfg.no_turn_mask)
    graph = graph_structure(seq)
    n = graph.node_count
    pool = np.zeros((n, len(seq)))
    pool[0, seq.cls_position] = 1.0
    if seq.has_tau:
        for node, pos in enumerate(seq.tau_positions, start=1):
            pool[node, pos] = 1.0
    else:
        for node, (s, e) in enumerate(seq.spans, start=1):
            pool[node, s:e] = 1.0 / (e - s)
    return Prepared(inst.id, seq, allow, normalize_channels(graph.stacked()), pool, inst.label)


@dataclass
class Batch:
    ids: list[str]
    token_ids: np.ndarray
    speaker_ids: np.ndarray
    allow: np.ndarray
    channels: np.ndarray
    pool: np.ndarray
    select: np.ndarray
    labels: np.ndarray
    lengths: list[int]


def collate(items: Sequence[Prepared], k_max: int) -> Batch:
    b = len(items)
    n_tok = max(len(p.seq) for p in items)
    n_node = max(p.channels.shape[-1] for p in items)
    token_ids = np.zeros((b, n_tok), dtype=np.int64)
    speaker_ids = np.zeros((b, n_tok), dtype=np.int64)
    allow = np.zeros((b, n_tok, n_tok), dtype=bool)
    channels = np.zeros((b, items[0].channels.shape[0], n_node, n_node))
    pool = np.zeros((b, n_node, n_tok))
    select = np.zeros((b, 1 + k_max, n_node))
    for i, p in enumerate(items):
        n, nodes = len(p.seq), p.channels.shape[-1]
        token_ids[i, :n] = p.seq.token_ids
        speaker_ids[i, :n] = p.seq.speaker_ids
        allow[i] = apply_padding(p.allow, n, n_tok)
        channels[i, :, :nodes, :nodes] = p.channels
        pool[i, :nodes, :n] = p.pool
        select[i, 0, 0] = 1.0
        for j in range(p.seq.num_args):
            select[i, 1 + j, 1 + p.seq.num_turns + j] = 1.0
    return Batch(
        ids=[p.id for p in items],
        token_ids=token_ids,
        speaker_ids=speaker_ids,
        allow=allow,
        channels=channels,
        pool=pool,
        select=select,
        labels=np.array([p.label for p in items], dtype=np.int64),
        lengths=[p.seq.dialogue_length for p in items],
    )


def forward(
    batch: Batch,
    params: ModelParams,
    intra_turn_only: bool = False,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Logits (B, C) for a collated batch."""
    hidden = encode(batch.token_ids, batch.speaker_ids, batch.allow, params.encoder, dropout, rng)
    nodes = ad.as_tensor(batch.pool) @ hidden
    if not intra_turn_only:
        nodes = refine(batch.channels, nodes, params.graph)
    return classify_nodes(nodes, batch.select, params.head)


def loss(batch: Batch, params: ModelParams, intra_turn_only: bool = False, **kw) -> Tensor:
    return ad.cross_entropy(forward(batch, params, intra_turn_only, **kw), batch.labels)


def predict_prepared(
    items: Sequence[Prepared],
    params: ModelParams,
    cfg: RunConfig,
    batch_size: int | None = None,
) -> list[Prediction]:
    """Predictions in input order.  Batches are formed over length-sorted
    items so padding stays small."""
    order = sorted(range(len(items)), key=lambda i: len(items[i].seq))
    out: list[Prediction | None] = [None] * len(items)
    size = batch_size or cfg.batch_size
    with ad.no_grad():
        for start in range(0, len(order), size):
            idx = order[start:start + size]
            batch = collate([items[i] for i in idx], cfg.k_max)
            logits = forward(batch, params, cfg.intra_turn_only).data
            for row, i in enumerate(idx):
                out[i] = Prediction(
                    batch.ids[row], logits[row].copy(), int(predict(logits[row])),
                    int(batch.labels[row]), batch.lengths[row],
                )
    return out
