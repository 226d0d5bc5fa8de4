"""Linear classifier over the dialogue node and the argument nodes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError


@dataclass
class HeadParams:
    weight: Tensor  # ((1 + k_max) * d, C)
    bias: Tensor  # (C,)

    @property
    def slots(self) -> int:
        return self.weight.shape[0]

    def named(self) -> dict[str, Tensor]:
        return {"w": self.weight, "b": self.bias}


def init_head(rng: np.random.Generator, dim: int, k_max: int, num_classes: int) -> HeadParams:
    fan_in = (1 + k_max) * dim
    bound = np.sqrt(6.0 / (fan_in + num_classes))
    return HeadParams(
        Tensor(rng.uniform(-bound, bound, (fan_in, num_classes)), requires_grad=True),
        Tensor(np.zeros(num_classes), requires_grad=True),
    )


def classify_nodes(nodes: Tensor, select: np.ndarray, params: HeadParams) -> Tensor:
    """Batched logits.

    ``select`` is (B, 1 + k_max, n): one-hot rows picking the dialogue node
    and each argument node, all-zero rows for absent argument slots.
    """
    b = nodes.shape[0]
    picked = ad.as_tensor(select) @ nodes  # (B, 1 + k_max, d)
    flat = picked.reshape(b, -1)
    if flat.shape[1] != params.weight.shape[0]:
        raise DataError("SHAPE_MISMATCH", f"features {flat.shape[1]} vs weight rows {params.weight.shape[0]}")
    return flat @ params.weight + params.bias


def classify(dialogue_node: np.ndarray, arg_nodes: Sequence[np.ndarray], params: HeadParams) -> np.ndarray:
    """Logits W.concat(dialogue, args, zero padding) + b for one instance."""
    d = len(dialogue_node)
    k_max = params.slots // d - 1
    if params.slots % d or len(arg_nodes) > k_max or any(len(a) != d for a in arg_nodes):
        raise DataError("SHAPE_MISMATCH", "node sizes do not match the classifier")
    feats = np.zeros(params.slots)
    feats[:d] = dialogue_node
    for j, a in enumerate(arg_nodes):
        feats[(j + 1) * d:(j + 2) * d] = a
    return feats @ params.weight.data + params.bias.data


def cross_entropy(logits: np.ndarray, gold: int) -> float:
    """-log softmax(logits)[gold] with max subtraction."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    return float(np.log(np.exp(z).sum()) - z[gold])


def predict(logits: np.ndarray) -> np.ndarray:
    """Argmax over the last axis; ties go to the lowest class index."""
    return np.argmax(logits, axis=-1)
