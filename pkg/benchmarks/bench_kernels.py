"""Compiled vs numpy kernels on attention shapes from the synthetic corpus.

    python3 benchmarks/bench_kernels.py [--repeat 50] [--batch 16]

Prints per-call time for each kernel and backend plus one full training
epoch per backend.
"""

from __future__ import annotations

import argparse
import time
import timeit

import numpy as np

from hierdialog import kernels, synthetic
from hierdialog.config import RunConfig
from hierdialog.corpus import Corpus
from hierdialog.model import collate, prepare
from hierdialog.preprocess import Vocab
from hierdialog.training import train


def realistic_batch(batch: int, seed: int = 0):
    cfg = RunConfig()
    insts = synthetic.generate(batch, 4, seed=seed)
    vocab = Vocab.from_instances(insts)
    b = collate([prepare(x, vocab, cfg) for x in insts], cfg.k_max)
    rng = np.random.default_rng(seed)
    n = b.allow.shape[-1]
    scores = rng.normal(size=(batch, cfg.heads, n, n))
    x = rng.normal(size=(batch * n, cfg.dim))
    return scores, b.allow, x, cfg.dim


def time_call(fn, repeat: int) -> float:
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=50)
    parser.add_argument("--batch", type=int, default=16)
    parser.add_argument("--epoch-size", type=int, default=200, help="training instances for the epoch timing")
    args = parser.parse_args()

    scores, allow, x, dim = realistic_batch(args.batch)
    gain, bias = np.ones(dim), np.zeros(dim)
    print(f"scores {scores.shape}, {allow.mean():.0%} of mask entries allowed; layer norm input {x.shape}")
    print(f"{'kernel':<26}" + "".join(f"{name:>12}" for name in kernels.available_backends()) + "   (ms, best of repeats)")

    previous = kernels.backend_name()
    rows: dict[str, list[float]] = {}
    try:
        for name in kernels.available_backends():
            kernels.use_backend(name)
            probs = kernels.masked_softmax(scores, allow)
            y, xhat, rstd = kernels.layer_norm(x, gain, bias)
            cases = {
                "masked_softmax": lambda: kernels.masked_softmax(scores, allow),
                "masked_softmax_backward": lambda: kernels.masked_softmax_backward(probs, scores),
                "layer_norm": lambda: kernels.layer_norm(x, gain, bias),
                "layer_norm_backward": lambda: kernels.layer_norm_backward(x, xhat, rstd, gain),
            }
            for label, fn in cases.items():
                rows.setdefault(label, []).append(time_call(fn, args.repeat))
        for label, times in rows.items():
            print(f"{label:<26}" + "".join(f"{t:>12.3f}" for t in times))

        names = list(synthetic.schema(4).class_names)
        corpus = Corpus(synthetic.generate(args.epoch_size, 4, seed=7), names)
        line = f"{'train epoch':<26}"
        for name in kernels.available_backends():
            kernels.use_backend(name)
            start = time.perf_counter()
            train(RunConfig(epochs=1), corpus)
            line += f"{(time.perf_counter() - start) * 1e3:>12.1f}"
        print(line)
    finally:
        kernels.use_backend(previous)


if __name__ == "__main__":
    main()
