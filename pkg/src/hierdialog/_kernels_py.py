"""Pure numpy versions of the fused kernels.

Signatures match the compiled ``_kernels`` module exactly; all arrays are
C-contiguous float64 except masks, which are uint8.
"""

import numpy as np

MASK_FILL = -1e9


def masked_softmax(scores, allow):
    """Row softmax of ``scores`` (B, H, N, N) restricted to ``allow`` (B, N, N).

    Disallowed logits get a large negative offset before the softmax and are
    then multiplied by zero, so their weights are exactly 0.
    """
    keep = allow[:, None, :, :].astype(np.float64)
    z = scores + (1.0 - keep) * MASK_FILL
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z) * keep
    return e / e.sum(axis=-1, keepdims=True)


def masked_softmax_backward(probs, grad):
    inner = (grad * probs).sum(axis=-1, keepdims=True)
    return probs * (grad - inner)


def layer_norm(x, gain, bias, eps):
    """Row-wise layer norm of ``x`` (R, d); returns (y, xhat, rstd)."""
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = centered * rstd
    return xhat * gain + bias, xhat, rstd[:, 0]


def layer_norm_backward(dy, xhat, rstd, gain):
    """Returns (dx, dgain, dbias)."""
    d = xhat.shape[1]
    dgain = (dy * xhat).sum(axis=0)
    dbias = dy.sum(axis=0)
    dxhat = dy * gain
    dx = (dxhat - dxhat.mean(axis=1, keepdims=True)
          - xhat * (dxhat * xhat).sum(axis=1, keepdims=True) / d) * rstd[:, None]
    return dx, dgain, dbias
