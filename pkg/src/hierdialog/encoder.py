"""Toy transformer encoder with token, position and speaker embeddings.

Post-norm layers: masked multi-head self-attention, residual, layer norm,
ReLU feed-forward, residual, layer norm.  All functions work on batches of
shape (B, N, d); pass B=1 for a single sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError

INIT_RANGE = 0.05


@dataclass
class LayerParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    ln1_g: Tensor
    ln1_b: Tensor
    ln2_g: Tensor
    ln2_b: Tensor

    def named(self) -> dict[str, Tensor]:
        return dict(vars(self))


@dataclass
class EncoderParams:
    tok_emb: Tensor
    pos_emb: Tensor
    spk_emb: Tensor
    layers: list[LayerParams]
    heads: int

    @property
    def dim(self) -> int:
        return self.tok_emb.shape[1]

    def named(self) -> dict[str, Tensor]:
        out = {"tok_emb": self.tok_emb, "pos_emb": self.pos_emb, "spk_emb": self.spk_emb}
        for i, layer in enumerate(self.layers):
            out.update({f"layer{i}.{k}": v for k, v in layer.named().items()})
        return out


def init_encoder(
    rng: np.random.Generator,
    vocab_size: int,
    dim: int,
    ff_dim: int,
    layers: int,
    heads: int,
    max_len: int,
    max_speakers: int,
) -> EncoderParams:
    if dim % heads:
        raise ValueError(f"heads ({heads}) must divide dim ({dim})")

    def uniform(*shape, bound=INIT_RANGE):
        return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

    # Glorot bounds for projections; at U(+-0.05) the attention path starts
    # too weak to move the residual stream and training stalls
    def proj(fan_in, fan_out):
        return uniform(fan_in, fan_out, bound=np.sqrt(6.0 / (fan_in + fan_out)))

    def const(value, *shape):
        return Tensor(np.full(shape, value, dtype=np.float64), requires_grad=True)

    tok = uniform(vocab_size, dim)
    pos = uniform(max_len, dim)
    spk = uniform(max_speakers, dim)
    spk.data[0] = 0.0
    stack = [
        LayerParams(
            wq=proj(dim, dim), wk=proj(dim, dim), wv=proj(dim, dim), wo=proj(dim, dim),
            w1=proj(dim, ff_dim), b1=const(0.0, ff_dim),
            w2=proj(ff_dim, dim), b2=const(0.0, dim),
            ln1_g=const(1.0, dim), ln1_b=const(0.0, dim),
            ln2_g=const(1.0, dim), ln2_b=const(0.0, dim),
        )
        for _ in range(layers)
    ]
    return EncoderParams(tok, pos, spk, stack, heads)


def embed(token_ids: np.ndarray, speaker_ids: np.ndarray, params: EncoderParams) -> Tensor:
    """Sum of token, absolute position and speaker embeddings.

    Speaker id 0 means "no speaker" and contributes an exact zero row that
    never receives gradient.
    """
    token_ids = np.atleast_2d(token_ids)
    speaker_ids = np.atleast_2d(speaker_ids)
    n = token_ids.shape[1]
    if token_ids.min() < 0 or token_ids.max() >= params.tok_emb.shape[0]:
        raise DataError("ID_OUT_OF_RANGE", "token id outside the vocabulary")
    if speaker_ids.min() < 0 or speaker_ids.max() >= params.spk_emb.shape[0]:
        raise DataError("ID_OUT_OF_RANGE", f"speaker id >= {params.spk_emb.shape[0]}")
    if n > params.pos_emb.shape[0]:
        raise DataError("ID_OUT_OF_RANGE", f"sequence length {n} exceeds {params.pos_emb.shape[0]}")
    tok = ad.embedding(params.tok_emb, token_ids)
    pos = ad.embedding(params.pos_emb, np.arange(n))
    has_speaker = (speaker_ids > 0)[..., None].astype(np.float64)
    spk = ad.embedding(params.spk_emb, speaker_ids) * has_speaker
    return tok + pos + spk


def attention_layer(
    x: Tensor,
    allow: np.ndarray,
    layer: LayerParams,
    heads: int,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    weights_out: list | None = None,
) -> Tensor:
    """One post-norm encoder layer.

    ``allow`` is a (B, N, N) boolean mask; attention weights on disallowed keys
    are exactly zero.  When ``weights_out`` is a list the (B, H, N, N)
    attention weights are appended to it.
    """
    b, n, d = x.shape
    dh = d // heads
    allow = np.broadcast_to(allow, (b, n, n))

    def split(t: Tensor) -> Tensor:
        return t.reshape(b, n, heads, dh).transpose(0, 2, 1, 3)

    q = split(x @ layer.wq)
    k = split(x @ layer.wk)
    v = split(x @ layer.wv)
    scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(dh))
    probs = ad.masked_softmax(scores, allow)
    if weights_out is not None:
        weights_out.append(probs.data)
    context = (probs @ v).transpose(0, 2, 1, 3).reshape(b, n, d)
    attended = ad.dropout(context @ layer.wo, dropout, rng)
    h = ad.layer_norm(x + attended, layer.ln1_g, layer.ln1_b)
    ff = ad.relu(h @ layer.w1 + layer.b1) @ layer.w2 + layer.b2
    ff = ad.dropout(ff, dropout, rng)
    return ad.layer_norm(h + ff, layer.ln2_g, layer.ln2_b)


def encode(
    token_ids: np.ndarray,
    speaker_ids: np.ndarray,
    allow: np.ndarray,
    params: EncoderParams,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Embed, then apply every layer with the same mask."""
    h = embed(token_ids, speaker_ids, params)
    allow = allow if allow.ndim == 3 else allow[None]
    for layer in params.layers:
        h = attention_layer(h, allow, layer, params.heads, dropout, rng)
    return h
