"""Checkpoint text format.

::

    hierdialog-checkpoint 1
    config <n>           followed by n lines of the flat config format
    classes <n>          followed by n class names, one per line
    neutral <index|none>
    vocab <n>            followed by n tokens, one per line, in id order
    tensor <name> <ndim> <dim> ...
    <row-major values as C99 hex floats, space separated>
    ...
    end

Hex floats round-trip float64 exactly, so a loaded model reproduces the
saved one's outputs bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import DataError
from .model import ModelParams, init_params
from .preprocess import RESERVED, Vocab

MAGIC = "hierdialog-checkpoint"
VERSION = 1


@dataclass
class Checkpoint:
    config: RunConfig
    vocab: Vocab
    params: ModelParams
    class_names: list[str]
    neutral_class: int | None = None
    history: list[dict] = field(default_factory=list)


def dumps(ckpt: Checkpoint) -> str:
    out = [f"{MAGIC} {VERSION}"]
    cfg_lines = ckpt.config.to_text().splitlines()
    out.append(f"config {len(cfg_lines)}")
    out.extend(cfg_lines)
    out.append(f"classes {len(ckpt.class_names)}")
    out.extend(ckpt.class_names)
    out.append(f"neutral {'none' if ckpt.neutral_class is None else ckpt.neutral_class}")
    out.append(f"vocab {len(ckpt.vocab)}")
    out.extend(ckpt.vocab.itos)
    for name, t in ckpt.params.named().items():
        shape = " ".join(str(s) for s in t.shape)
        out.append(f"tensor {name} {t.ndim} {shape}".rstrip())
        out.append(" ".join(float(v).hex() for v in t.data.ravel()))
    out.append("end")
    return "\n".join(out) + "\n"


def save(ckpt: Checkpoint, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(ckpt))


def _take(lines: list[str], pos: int, keyword: str) -> tuple[str, int]:
    if pos >= len(lines):
        raise DataError("BAD_CHECKPOINT", f"truncated checkpoint, expected {keyword!r}")
    head, _, rest = lines[pos].partition(" ")
    if head != keyword:
        raise DataError("BAD_CHECKPOINT", f"line {pos + 1}: expected {keyword!r}, got {head!r}")
    return rest, pos + 1


def loads(text: str) -> Checkpoint:
    try:
        return _parse(text.split("\n"))
    except (ValueError, IndexError) as exc:
        raise DataError("BAD_CHECKPOINT", f"unparseable checkpoint: {exc}") from None


def _parse(lines: list[str]) -> Checkpoint:
    version, pos = _take(lines, 0, MAGIC)
    if version.strip() != str(VERSION):
        raise DataError("BAD_CHECKPOINT", f"unsupported checkpoint version {version!r}")
    count, pos = _take(lines, pos, "config")
    cfg = RunConfig.from_text("\n".join(lines[pos:pos + int(count)]))
    pos += int(count)
    count, pos = _take(lines, pos, "classes")
    classes = lines[pos:pos + int(count)]
    pos += int(count)
    neutral, pos = _take(lines, pos, "neutral")
    neutral_idx = None if neutral == "none" else int(neutral)
    count, pos = _take(lines, pos, "vocab")
    tokens = lines[pos:pos + int(count)]
    pos += int(count)
    if tuple(tokens[:len(RESERVED)]) != RESERVED:
        raise DataError("BAD_CHECKPOINT", "vocabulary does not start with the reserved tokens")
    vocab = Vocab(tokens[len(RESERVED):])

    params = init_params(cfg, len(classes), len(vocab))
    named = params.named()
    loaded = set()
    while lines[pos] != "end":
        header, pos = _take(lines, pos, "tensor")
        parts = header.split()
        name, ndim = parts[0], int(parts[1])
        shape = tuple(int(s) for s in parts[2:2 + ndim])
        if name not in named or named[name].shape != shape:
            raise DataError("BAD_CHECKPOINT", f"tensor {name} {shape} does not fit the configured model")
        values = [float.fromhex(v) for v in lines[pos].split()]
        pos += 1
        if len(values) != int(np.prod(shape)):
            raise DataError("BAD_CHECKPOINT", f"tensor {name} has {len(values)} values for shape {shape}")
        named[name].data[...] = np.array(values, dtype=np.float64).reshape(shape)
        loaded.add(name)
    missing = set(named) - loaded
    if missing:
        raise DataError("BAD_CHECKPOINT", f"missing tensors {sorted(missing)}")
    return Checkpoint(cfg, vocab, params, classes, neutral_idx)


def load(path: str) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
