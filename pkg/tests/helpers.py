"""Random valid instances for property and acceptance tests."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from hierdialog.corpus import Instance, Query, Turn

SPEAKERS = ["Speaker 1", "Speaker 2", "Speaker 3", "Speaker 4"]
NAMES = ["Frank", "Emma", "Ross", "Mona Lisa"]
WORDS = "hi so we went to the park and it was nice okay fine Franklin".split()


def random_instance(rng: random.Random, max_turns: int = 8, max_args: int = 2, idx: int = 0) -> Instance:
    m = rng.randint(1, max_turns)
    n_speakers = rng.randint(1, len(SPEAKERS))
    turns = []
    for _ in range(m):
        words = [rng.choice(WORDS) for _ in range(rng.randint(1, 6))]
        if rng.random() < 0.4:
            words.insert(rng.randint(0, len(words)), rng.choice(NAMES))
        turns.append(Turn(rng.choice(SPEAKERS[:n_speakers]), " ".join(words)))
    mentioned = sorted({t.speaker for t in turns} | {n for n in NAMES if any(_has(t.text, n) for t in turns)})
    k = rng.randint(1, max_args)
    if len(mentioned) < k:
        name = next(n for n in NAMES if n not in mentioned)
        i = rng.randrange(m)
        turns[i] = Turn(turns[i].speaker, f"{turns[i].text} {name}")
        mentioned.append(name)
    args = tuple(rng.sample(mentioned, k))
    return Instance(f"r{idx}", tuple(turns), Query(args), rng.randrange(3))


def _has(text: str, phrase: str) -> bool:
    toks, ph = text.split(), phrase.split()
    return any(toks[i:i + len(ph)] == ph for i in range(len(toks) - len(ph) + 1))


@st.composite
def instances(draw, max_turns: int = 8, max_args: int = 2) -> Instance:
    seed = draw(st.integers(0, 2**32 - 1))
    return random_instance(random.Random(seed), max_turns, max_args)
