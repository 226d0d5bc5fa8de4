"""Synthetic relation corpora with a fixed grammar.

Each dialogue has two arguments: a speaker (``Speaker N``) and a person
name.  The label is the relation cue word (``friend``, ``boss``, ...) in one
designated turn:

* ``cue="key"``: the key turn is spoken by the first argument, mentions the
  second and carries the cue.  Other turns may carry distractor cues next to
  other names.
* ``cue="last"``: both arguments appear in turn 1 without a cue; the cue
  sits in the final turn, so any prefix stopping at the first mention loses it.
"""

from __future__ import annotations

import random
from typing import Literal

from .corpus import Instance, Query, Schema, Turn

SPEAKERS = ("Speaker 1", "Speaker 2", "Speaker 3", "Speaker 4")
NAMES = ("Frank", "Emma", "Ross", "Mona", "Paul", "Rita", "Joey", "Carol")
CUES = ("friend", "boss", "sister", "neighbor", "teacher", "cousin", "partner", "doctor")
FILLER = (
    "hey so I think that was really nice you know what about the party yesterday "
    "we should go again maybe later okay sure right well anyway"
).split()


def schema(num_classes: int) -> Schema:
    if not 2 <= num_classes <= len(CUES):
        raise ValueError(f"num_classes must be in [2, {len(CUES)}]")
    return Schema(tuple(f"rel:{c}" for c in CUES[:num_classes]))


def _filler(rng: random.Random, lo: int = 2, hi: int = 5) -> list[str]:
    return [rng.choice(FILLER) for _ in range(rng.randint(lo, hi))]


def _sentence(rng: random.Random, core: list[str], pad: tuple[int, int]) -> str:
    return " ".join(_filler(rng, *pad) + core + _filler(rng, *pad))


def generate(
    n: int,
    num_classes: int = 4,
    seed: int = 0,
    cue: Literal["key", "last"] = "key",
    min_turns: int = 2,
    max_turns: int = 5,
    distractor_rate: float = 0.5,
    padding: tuple[int, int] = (0, 2),
    id_prefix: str = "syn",
) -> list[Instance]:
    """``padding`` bounds the filler words placed on each side of a turn's core."""
    if cue not in ("key", "last"):
        raise ValueError(f"unknown cue placement {cue!r}")
    rng = random.Random(seed)
    out = []
    for i in range(n):
        label = rng.randrange(num_classes)
        m = rng.randint(min_turns, max_turns)
        subject = rng.choice(SPEAKERS)
        obj = rng.choice(NAMES)
        others = [s for s in SPEAKERS if s != subject]
        other_names = [x for x in NAMES if x != obj]
        turns: list[Turn] = []
        if cue == "key":
            key = rng.randrange(m)
            for t in range(m):
                if t == key:
                    turns.append(Turn(subject, _sentence(rng, [obj, "is", "my", CUES[label]], padding)))
                    continue
                speaker = rng.choice(others)
                if rng.random() < distractor_rate:
                    wrong = rng.choice([c for c in range(num_classes) if c != label])
                    core = [rng.choice(other_names), "is", "my", CUES[wrong]]
                else:
                    core = _filler(rng, 1, 2)
                turns.append(Turn(speaker, _sentence(rng, core, padding)))
        else:
            turns.append(Turn(subject, _sentence(rng, ["have", "you", "met", obj], padding)))
            for _ in range(m - 2):
                turns.append(Turn(rng.choice(others), _sentence(rng, _filler(rng, 1, 2), padding)))
            turns.append(Turn(rng.choice(others), _sentence(rng, ["a", CUES[label], "indeed"], padding)))
        out.append(Instance(f"{id_prefix}-{seed}-{i}", tuple(turns), Query((subject, obj)), label))
    return out
