"""Layer primitives with explicit forward and backward passes.

Every ``*_fwd`` returns (output, cache) and the matching ``*_bwd`` consumes
the upstream gradient plus that cache.  All math runs in float64 regardless
of parameter storage dtype; the analytic backward passes are verified
against central finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

# Additive attention bias for masked keys.  Finite so fully-masked rows
# stay NaN-free, yet exp(bias - max) underflows to exactly 0.0, keeping
# masked keys at exactly zero weight.
MASK_BIAS = -1e9

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def linear_fwd(x, w, b):
    return x @ w + b, (x, w)


def linear_bwd(dout, cache):
    x, w = cache
    dx = dout @ w.T
    x2 = x.reshape(-1, x.shape[-1])
    d2 = dout.reshape(-1, dout.shape[-1])
    return dx, x2.T @ d2, d2.sum(axis=0)


def layernorm_fwd(x, gamma, beta, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return gamma * xhat + beta, (xhat, inv, gamma)


def layernorm_bwd(dout, cache):
    xhat, inv, gamma = cache
    n = xhat.shape[-1]
    dxhat = dout * gamma
    dgamma = (dout * xhat).reshape(-1, n).sum(axis=0)
    dbeta = dout.reshape(-1, n).sum(axis=0)
    dx = (inv / n) * (
        n * dxhat
        - dxhat.sum(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


def gelu_fwd(x):
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2)), x


def gelu_bwd(dout, cache):
    x = cache
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return dout * (cdf + x * pdf)


def dropout_fwd(x, p, rng):
    """Inverted dropout; ``rng=None`` (eval mode) is the identity."""
    if rng is None or p <= 0.0:
        return x, None
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * keep, keep


def dropout_bwd(dout, keep):
    return dout if keep is None else dout * keep


def softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=axis, keepdims=True)


def _split_heads(x, n_heads):
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def attention_fwd(x, p, prefix, n_heads, pad_mask, attn_dropout, rng):
    """Multi-head self-attention with key-padding masking.

    ``p`` is the parameter dict and ``prefix`` names this layer's block
    (e.g. "enc0.attn.").  ``pad_mask`` is (batch, time) with True at real
    positions.
    """
    q, cq = linear_fwd(x, p[prefix + "wq"], p[prefix + "bq"])
    k, ck = linear_fwd(x, p[prefix + "wk"], p[prefix + "bk"])
    v, cv = linear_fwd(x, p[prefix + "wv"], p[prefix + "bv"])
    qh, kh, vh = (_split_heads(a, n_heads) for a in (q, k, v))
    scale = 1.0 / np.sqrt(qh.shape[-1])
    scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
    scores = scores + np.where(pad_mask[:, None, None, :], 0.0, MASK_BIAS)
    probs = softmax(scores)
    probs_kept, keep = dropout_fwd(probs, attn_dropout, rng)
    ctx = probs_kept @ vh
    out, co = linear_fwd(_merge_heads(ctx), p[prefix + "wo"], p[prefix + "bo"])
    cache = (cq, ck, cv, co, qh, kh, vh, probs, probs_kept, keep, scale, n_heads)
    return out, cache


def attention_bwd(dout, cache, grads, prefix):
    cq, ck, cv, co, qh, kh, vh, probs, probs_kept, keep, scale, n_heads = cache
    dmerged, grads[prefix + "wo"], grads[prefix + "bo"] = linear_bwd(dout, co)
    dctx = _split_heads(dmerged, n_heads)
    dprobs_kept = dctx @ vh.transpose(0, 1, 3, 2)
    dvh = probs_kept.transpose(0, 1, 3, 2) @ dctx
    dprobs = dropout_bwd(dprobs_kept, keep)
    dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
    dqh = (dscores @ kh) * scale
    dkh = (dscores.transpose(0, 1, 3, 2) @ qh) * scale
    dxq, grads[prefix + "wq"], grads[prefix + "bq"] = linear_bwd(_merge_heads(dqh), cq)
    dxk, grads[prefix + "wk"], grads[prefix + "bk"] = linear_bwd(_merge_heads(dkh), ck)
    dxv, grads[prefix + "wv"], grads[prefix + "bv"] = linear_bwd(_merge_heads(dvh), cv)
    return dxq + dxk + dxv
