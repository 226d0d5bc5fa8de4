"""Turn-level attention mask.

``allow[i, j]`` is True when query position ``i`` may attend to key ``j``.
Each ``[T]`` row is restricted to its own span; every other row (including
``[CLS]`` and ``[SEP]``) attends everywhere.
"""

from __future__ import annotations

import numpy as np

from .preprocess import EncodedSequence


def build_turn_mask(seq: EncodedSequence, enabled: bool = True) -> np.ndarray:
    n = len(seq)
    allow = np.ones((n, n), dtype=bool)
    if not enabled:
        return allow
    for tau, (start, end) in zip(seq.tau_positions, seq.spans):
        row = allow[tau]
        row[:] = False
        row[start:end] = True
    return allow


def apply_padding(mask: np.ndarray, valid_len: int, padded_len: int) -> np.ndarray:
    """Embed ``mask`` in a ``padded_len`` square and forbid keys at or past ``valid_len``.

    Rows past ``valid_len`` keep the allowed real columns so no row is empty;
    they belong to padding and are never read.
    """
    if valid_len > padded_len:
        raise ValueError(f"valid_len {valid_len} exceeds padded_len {padded_len}")
    out = np.ones((padded_len, padded_len), dtype=bool)
    n = min(mask.shape[0], padded_len)
    out[:n, :n] = mask[:n, :n]
    out[:, valid_len:] = False
    return out


def row_sums(mask: np.ndarray) -> np.ndarray:
    return mask.sum(axis=1)


def render_mask(mask: np.ndarray) -> str:
    """0/1 grid, one row per line."""
    return "\n".join("".join("1" if v else "0" for v in row) for row in mask) + "\n"
