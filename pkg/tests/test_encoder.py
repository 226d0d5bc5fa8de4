import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_instance
from hierdialog import autodiff as ad
from hierdialog.autodiff import Tensor
from hierdialog.encoder import attention_layer, embed, encode, init_encoder
from hierdialog.errors import DataError, NumericError
from hierdialog.masking import build_turn_mask
from hierdialog.preprocess import RESERVED, Vocab, encode_instance


def params(layers=1, dim=8, heads=2, vocab=40, seed=0):
    return init_encoder(np.random.default_rng(seed), vocab, dim, 2 * dim, layers, heads, 64, 6)


def test_speaker_row_zero_gives_token_plus_position():
    p = params()
    ids = np.array([[3, 9, 9, 12]])
    out = embed(ids, np.zeros_like(ids), p).data[0]
    expected = p.tok_emb.data[ids[0]] + p.pos_emb.data[:4]
    assert (out == expected).all()


def test_same_token_differs_by_position_embedding():
    p = params()
    out = embed(np.array([[7, 7]]), np.array([[2, 2]]), p).data[0]
    assert np.allclose(out[1] - out[0], p.pos_emb.data[1] - p.pos_emb.data[0], atol=1e-15)


def test_no_speaker_row_gets_no_gradient():
    p = params()
    out = embed(np.array([[7, 8, 9]]), np.array([[0, 1, 0]]), p)
    out.backward(np.ones(out.shape))
    assert (p.spk_emb.grad[0] == 0).all()
    assert (p.spk_emb.grad[1] == 1).all()


@pytest.mark.parametrize("tok, spk, n", [(40, 0, 2), (-1, 0, 2), (3, 6, 2), (3, 0, 65)])
def test_embed_rejects_out_of_range(tok, spk, n):
    ids = np.full((1, n), 3)
    spks = np.zeros((1, n), dtype=int)
    ids[0, 0], spks[0, 0] = tok, spk
    with pytest.raises(DataError) as err:
        embed(ids, spks, params())
    assert err.value.code == "ID_OUT_OF_RANGE"


def test_embedding_row_gradient_matches_finite_differences():
    p = params()
    ids, spks = np.array([[3, 5, 3, 8]]), np.array([[0, 1, 1, 2]])
    allow = np.ones((4, 4), dtype=bool)
    w = np.random.default_rng(1).normal(size=(1, 4, 8))

    def f():
        return float((encode(ids, spks, allow, p).data * w).sum())

    out = encode(ids, spks, allow, p)
    out.backward(w)
    row, eps = p.tok_emb.data[3], 1e-4
    for j in range(8):
        orig = row[j]
        row[j] = orig + eps
        up = f()
        row[j] = orig - eps
        down = f()
        row[j] = orig
        num = (up - down) / (2 * eps)
        assert p.tok_emb.grad[3, j] == pytest.approx(num, rel=1e-3, abs=1e-9)


def test_identical_rows_stay_identical():
    p = params()
    x = Tensor(np.tile(np.random.default_rng(0).normal(size=8), (1, 5, 1)))
    out = attention_layer(x, np.ones((5, 5), dtype=bool), p.layers[0], p.heads).data[0]
    assert np.allclose(out, out[0], atol=1e-13)


def test_single_allowed_key_copies_its_value():
    p = params()
    layer = p.layers[0]
    x = np.random.default_rng(2).normal(size=(1, 4, 8))
    allow = np.zeros((4, 4), dtype=bool)
    allow[:, 2] = True
    weights = []
    attention_layer(Tensor(x), allow, layer, p.heads, weights_out=weights)
    probs = weights[0]
    assert (probs[..., 2] == 1.0).all()
    context = np.einsum("bhij,bjhd->bihd", probs, (x @ layer.wv.data).reshape(1, 4, 2, 4)).reshape(1, 4, 8)
    assert np.allclose(context, np.broadcast_to((x @ layer.wv.data)[:, 2:3], (1, 4, 8)), atol=1e-15)


def test_empty_mask_row():
    p = params()
    allow = np.ones((3, 3), dtype=bool)
    allow[1] = False
    with pytest.raises(NumericError):
        attention_layer(Tensor(np.zeros((1, 3, 8))), allow, p.layers[0], p.heads)


def test_zero_layers_is_embed():
    p = params(layers=0)
    ids, spks = np.array([[2, 4, 11]]), np.array([[0, 1, 1]])
    assert (encode(ids, spks, np.ones((3, 3), dtype=bool), p).data == embed(ids, spks, p).data).all()


def test_encode_is_deterministic():
    p = params(layers=2)
    ids, spks = np.array([[2, 4, 11, 5]]), np.array([[0, 1, 1, 0]])
    allow = np.ones((4, 4), dtype=bool)
    with ad.no_grad():
        assert (encode(ids, spks, allow, p).data == encode(ids, spks, allow, p).data).all()


def test_batch_rows_match_single_runs():
    p = params(layers=2)
    rng = random.Random(0)
    seqs = [encode_instance(random_instance(rng), Vocab(["x"]), 64) for _ in range(2)]
    vocab_size = p.tok_emb.shape[0]
    for s in seqs:
        s.token_ids[:] = [t % vocab_size for t in s.token_ids]
    n = max(len(s) for s in seqs)
    ids = np.zeros((2, n), dtype=int)
    spks = np.zeros((2, n), dtype=int)
    allow = np.zeros((2, n, n), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, :len(s)], spks[i, :len(s)] = s.token_ids, np.minimum(s.speaker_ids, 5)
        allow[i, :, :len(s)] = True
        allow[i, :len(s), :len(s)] = build_turn_mask(s)
    with ad.no_grad():
        batched = encode(ids, spks, allow, p).data
        for i, s in enumerate(seqs):
            alone = encode(ids[i:i + 1, :len(s)], spks[i:i + 1, :len(s)], allow[i, :len(s), :len(s)], p).data
            assert np.allclose(batched[i, :len(s)], alone[0], atol=1e-12)


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_one_layer_locality(seed):
    rng = random.Random(seed)
    inst = random_instance(rng)
    vocab = Vocab.from_instances([inst])
    seq = encode_instance(inst, vocab, 128)
    p = init_encoder(np.random.default_rng(seed), len(vocab), 8, 16, 1, 2, 128, 8)
    allow = build_turn_mask(seq)
    ids = np.array([seq.token_ids])
    spks = np.array([seq.speaker_ids])
    with ad.no_grad():
        base = encode(ids, spks, allow, p).data[0]
        for tau, (s, e) in zip(seq.tau_positions, seq.spans):
            outside = [q for q in range(len(seq)) if not s <= q < e]
            q = rng.choice(outside)
            changed = ids.copy()
            changed[0, q] = len(RESERVED) + (changed[0, q] + 1 - len(RESERVED)) % (len(vocab) - len(RESERVED))
            if changed[0, q] == ids[0, q]:
                continue
            out = encode(changed, spks, allow, p).data[0]
            assert (out[tau] == base[tau]).all()
