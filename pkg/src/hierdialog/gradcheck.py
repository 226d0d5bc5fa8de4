"""Central finite-difference check of every parameter gradient."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import RunConfig
from .corpus import Instance, Query, Turn
from .model import ModelParams, collate, init_params, loss, prepare
from .preprocess import Vocab

EPS = 1e-4
REL_TOL = 1e-3
TINY_GRAD = 1e-8
ABS_TOL = 1e-6

SMALL_CONFIG = RunConfig(dim=8, ff_dim=16, layers=2, heads=2, graph_layers=1, gtn_steps=2, max_len=32, max_speakers=4, seed=3)


@dataclass
class GroupResult:
    name: str
    size: int
    max_rel_error: float
    max_abs_error: float
    failures: int

    @property
    def ok(self) -> bool:
        return self.failures == 0


def compare(analytic: np.ndarray, numeric: np.ndarray) -> tuple[float, float, int]:
    """(max relative error, max absolute error, failing entries).

    Entries whose analytic gradient is below TINY_GRAD in magnitude are held
    to ABS_TOL absolutely, the rest to REL_TOL relatively.
    """
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    tiny = np.abs(analytic) < TINY_GRAD
    rel = np.where(tiny, 0.0, diff / np.where(scale > 0, scale, 1.0))
    fails = int(np.sum(np.where(tiny, diff > ABS_TOL, rel > REL_TOL)))
    return float(rel.max(initial=0.0)), float(diff.max(initial=0.0)), fails


def numeric_gradient(f: Callable[[], float], t: Tensor, eps: float = EPS) -> np.ndarray:
    grad = np.zeros_like(t.data)
    flat, out = t.data.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        out[i] = (up - down) / (2 * eps)
    return grad


def sample_instance() -> Instance:
    return Instance(
        "gradcheck",
        (Turn("Speaker 1", "I met Frank at the party"), Turn("Speaker 2", "Frank is your friend")),
        Query(("Speaker 1", "Frank")),
        1,
    )


def check_gradients(
    cfg: RunConfig = SMALL_CONFIG, inst: Instance | None = None, num_classes: int = 3
) -> list[GroupResult]:
    inst = inst or sample_instance()
    vocab = Vocab.from_instances([inst])
    params: ModelParams = init_params(cfg, num_classes, len(vocab))
    batch = collate([prepare(inst, vocab, cfg)], cfg.k_max)

    params.zero_grad()
    loss(batch, params, cfg.intra_turn_only).backward()

    def value() -> float:
        with ad.no_grad():
            return float(loss(batch, params, cfg.intra_turn_only).data)

    results = []
    for name, t in params.named().items():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numeric_gradient(value, t)
        rel, abs_err, fails = compare(analytic, numeric)
        results.append(GroupResult(name, t.data.size, rel, abs_err, fails))
    return results


def render(results: list[GroupResult]) -> str:
    lines = [f"{'parameter':<28}{'size':>6}{'max_rel':>12}{'max_abs':>12}  status"]
    for r in results:
        lines.append(f"{r.name:<28}{r.size:>6}{r.max_rel_error:>12.3e}{r.max_abs_error:>12.3e}  {'ok' if r.ok else 'FAIL'}")
    return "\n".join(lines) + "\n"
