"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
fallback is used.  ``use_backend`` switches explicitly (tests, benchmarks).
Results of the two backends agree to rounding, not bitwise, so determinism
guarantees hold per backend.
"""

from __future__ import annotations

from types import ModuleType

import numpy as np

from . import _kernels_py
from .errors import NumericError

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS: dict[str, ModuleType] = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active: ModuleType = _compiled if _compiled is not None else _kernels_py

LN_EPS = 1e-5


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def backend_name() -> str:
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use_backend(name: str) -> None:
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}") from None


def masked_softmax(scores: np.ndarray, allow: np.ndarray) -> np.ndarray:
    if not allow.any(axis=-1).all():
        raise NumericError("EMPTY_MASK_ROW", "attention mask has a row with no allowed key")
    return _active.masked_softmax(
        np.ascontiguousarray(scores, dtype=np.float64),
        np.ascontiguousarray(allow, dtype=np.uint8),
    )


def masked_softmax_backward(probs: np.ndarray, grad: np.ndarray) -> np.ndarray:
    return _active.masked_softmax_backward(
        np.ascontiguousarray(probs), np.ascontiguousarray(grad, dtype=np.float64)
    )


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = LN_EPS):
    return _active.layer_norm(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(gain, dtype=np.float64),
        np.ascontiguousarray(bias, dtype=np.float64),
        eps,
    )


def layer_norm_backward(dy, xhat, rstd, gain):
    return _active.layer_norm_backward(
        np.ascontiguousarray(dy, dtype=np.float64),
        np.ascontiguousarray(xhat),
        np.ascontiguousarray(rstd),
        np.ascontiguousarray(gain, dtype=np.float64),
    )
