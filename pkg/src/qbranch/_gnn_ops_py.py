"""Numpy reference for the fused graph-network kernels in ``_gnn_ext.pyx``."""
import numpy as np

backend = "python"


def bias_relu(z, b):
    """``relu(z + b)`` and its on/off mask."""
    h = z + b
    mask = h > 0
    h *= mask
    return h, mask


def bias_relu_ln(z, b, g, beta, eps):
    """``LN(relu(z + b))`` over the last axis.

    Returns ``(y, xhat, inv, mask)``: output, normalised activations, the
    reciprocal standard deviation per row and the ReLU mask.
    """
    a, mask = bias_relu(z, b)
    mu = a.mean(axis=1, keepdims=True)
    xc = a - mu
    inv = 1.0 / np.sqrt(np.mean(xc * xc, axis=1) + eps)
    xhat = xc * inv[:, None]
    return xhat * g + beta, xhat, inv, mask


def ln_relu_bwd(dy, g, xhat, inv, mask, dg, dbeta):
    """Backward of :func:`bias_relu_ln` w.r.t. ``z``; accumulates into ``dg``/``dbeta``."""
    dg += (dy * xhat).sum(axis=0)
    dbeta += dy.sum(axis=0)
    dxh = dy * g
    dz = inv[:, None] * (dxh - dxh.mean(axis=1, keepdims=True)
                         - xhat * (dxh * xhat).mean(axis=1, keepdims=True))
    dz *= mask
    return dz
