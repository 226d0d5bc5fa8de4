"""Input reconstruction: argument markers, turn tokens and sequence layout.

The assembled layout is::

    [CLS] ([T] speaker-tokens : text-tokens)* [SEP] ([T] [S_j])* [SEP]

With ``special_tokens=False`` every ``[T]`` is dropped and the spans cover
the bare turn / argument segments instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from .corpus import Instance, Query, Turn, contains_phrase, is_mentioned
from .errors import DataError

PAD, UNK, CLS, SEP, TURN = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[T]"
ARG_MARKERS = ("[S1]", "[S2]")
RESERVED = (PAD, UNK, CLS, SEP, TURN) + ARG_MARKERS
PAD_ID, UNK_ID, CLS_ID, SEP_ID, TURN_ID = range(5)
ARG_IDS = (5, 6)
COLON = ":"


def marker(j: int) -> str:
    """Marker token for the 0-based argument index ``j``."""
    return ARG_MARKERS[j]


class Vocab:
    """Bijective token <-> id map with fixed reserved ids."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = list(RESERVED)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        idx = self.stoi.get(token)
        if idx is None:
            idx = len(self.itos)
            self.itos.append(token)
            self.stoi[token] = idx
        return idx

    def __len__(self) -> int:
        return len(self.itos)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self.itos == other.itos

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self.itos[idx]

    @classmethod
    def from_instances(cls, instances: Iterable[Instance]) -> "Vocab":
        """Vocabulary over substituted speaker and text tokens, in first-seen order."""
        vocab = cls([COLON])
        for inst in instances:
            for turn in substitute_arguments(inst).dialogue:
                for tok in turn.speaker.split() + turn.tokens:
                    vocab.add(tok)
        return vocab


@dataclass
class EncodedSequence:
    token_ids: list[int]
    speaker_ids: list[int]
    tau_positions: list[int]
    spans: list[tuple[int, int]]
    num_turns: int
    num_args: int
    label: int
    tokens: list[str] = field(default_factory=list)
    cls_position: int = 0

    def __len__(self) -> int:
        return len(self.token_ids)

    @property
    def has_tau(self) -> bool:
        return bool(self.tau_positions)

    @property
    def turn_spans(self) -> list[tuple[int, int]]:
        return self.spans[: self.num_turns]

    @property
    def arg_spans(self) -> list[tuple[int, int]]:
        return self.spans[self.num_turns:]

    @property
    def dialogue_length(self) -> int:
        """Number of tokens in the dialogue segment, excluding structural tokens."""
        return sum(e - s for s, e in self.turn_spans) - (self.num_turns if self.has_tau else 0)


def _substitute_tokens(tokens: list[str], phrases: list[list[str]]) -> list[str]:
    out: list[str] = []
    i = 0
    while i < len(tokens):
        for j, phrase in enumerate(phrases):
            n = len(phrase)
            if n and tokens[i:i + n] == phrase:
                out.append(marker(j))
                i += n
                break
        else:
            out.append(tokens[i])
            i += 1
    return out


def substitute_arguments(inst: Instance) -> Instance:
    """Replace argument mentions and matching speakers by ``[S_j]`` markers.

    Matching is whole-token and case-sensitive; multi-token arguments match a
    contiguous token run.  Earlier arguments win when two would match.
    """
    args = list(inst.query.arguments)
    phrases = [a.split() for a in args]
    turns = []
    for turn in inst.dialogue:
        speaker = turn.speaker
        for j, a in enumerate(args):
            if speaker == a:
                speaker = marker(j)
                break
        text = " ".join(_substitute_tokens(turn.tokens, phrases))
        turns.append(Turn(speaker, text))
    query = Query(tuple(marker(j) for j in range(len(args))))
    return replace(inst, dialogue=tuple(turns), query=query)


def build_sequence(
    inst: Instance,
    vocab: Vocab,
    max_len: int,
    special_tokens: bool = True,
) -> EncodedSequence:
    """Assemble the model input for an already substituted instance."""
    tokens: list[str] = [CLS]
    speakers: list[int] = [0]
    spans: list[tuple[int, int]] = []
    taus: list[int] = []
    speaker_index: dict[str, int] = {}

    for turn in inst.dialogue:
        sid = speaker_index.setdefault(turn.speaker, len(speaker_index) + 1)
        start = len(tokens)
        if special_tokens:
            taus.append(start)
            tokens.append(TURN)
        tokens.extend(turn.speaker.split())
        tokens.append(COLON)
        tokens.extend(turn.tokens)
        speakers.extend([sid] * (len(tokens) - start))
        spans.append((start, len(tokens)))
    tokens.append(SEP)
    speakers.append(0)
    for arg in inst.query.arguments:
        start = len(tokens)
        if special_tokens:
            taus.append(start)
            tokens.append(TURN)
        tokens.append(arg)
        speakers.extend([0] * (len(tokens) - start))
        spans.append((start, len(tokens)))
    tokens.append(SEP)
    speakers.append(0)

    if len(tokens) > max_len:
        raise DataError(
            "SEQUENCE_TOO_LONG",
            f"instance {inst.id!r} needs {len(tokens)} positions, max_len is {max_len}",
        )
    return EncodedSequence(
        token_ids=[vocab.id(t) for t in tokens],
        speaker_ids=speakers,
        tau_positions=taus,
        spans=spans,
        num_turns=inst.m,
        num_args=inst.k,
        label=inst.label,
        tokens=tokens,
    )


def prefix_length(inst: Instance) -> int:
    """Smallest p such that turns[:p] mention every argument."""
    p = 1
    for arg in inst.query.arguments:
        first = next(i for i, t in enumerate(inst.dialogue) if is_mentioned(arg, t))
        p = max(p, first + 1)
    return p


def truncate_to_prefix(inst: Instance) -> Instance:
    """Restrict the dialogue to the shortest turn prefix mentioning all arguments."""
    p = prefix_length(inst)
    if p == inst.m:
        return inst
    return replace(inst, dialogue=inst.dialogue[:p])


def encode_instance(
    inst: Instance, vocab: Vocab, max_len: int, special_tokens: bool = True
) -> EncodedSequence:
    return build_sequence(substitute_arguments(inst), vocab, max_len, special_tokens)


__all__ = [
    "Vocab",
    "EncodedSequence",
    "substitute_arguments",
    "build_sequence",
    "truncate_to_prefix",
    "prefix_length",
    "encode_instance",
    "contains_phrase",
]
