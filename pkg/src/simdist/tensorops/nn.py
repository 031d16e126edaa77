"""Network building blocks: linear layers, attention, feed-forward.

All blocks are pre-norm residual: x + Attn(LN(x)), then x + FFN(LN(x)).
Masks are boolean with True meaning *blocked*; blocked logits act as
negative infinity and a fully blocked query row attends to nothing
(zero attention output).
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import ShapeError, layer_norm, masked_softmax, matmul, silu


def linear(x, w, b=None):
    if x.data.shape[-1] != w.data.shape[0]:
        raise ShapeError(f"linear: input width {x.data.shape[-1]} != {w.data.shape[0]}")
    y = matmul(x, w)
    return y if b is None else y + b


def feed_forward(x, store, prefix):
    h = silu(linear(x, store[f"{prefix}/ffn1_w"], store[f"{prefix}/ffn1_b"]))
    return linear(h, store[f"{prefix}/ffn2_w"], store[f"{prefix}/ffn2_b"])


def _split_heads(x, num_heads):
    b, s, d = x.data.shape
    return x.reshape((b, s, num_heads, d // num_heads)).swapaxes(1, 2)


def _merge_heads(x):
    b, h, s, dh = x.data.shape
    return x.swapaxes(1, 2).reshape((b, s, h * dh))


def _check_mask(blocked, n_q, n_kv):
    if blocked is None:
        return
    if blocked.shape[-1] != n_kv or blocked.shape[-2] not in (1, n_q):
        raise ShapeError(f"mask trailing dims {blocked.shape[-2:]} != ({n_q}, {n_kv})")


def multi_head_attention(q_tokens, kv_tokens, blocked, store, prefix, num_heads):
    """Scaled dot-product attention over projected tokens.

    ``q_tokens``/``kv_tokens`` are (B, S, D); the key/value batch may be 1
    for a shared context. ``blocked`` broadcasts against the logits
    (..., S_q, S_kv).
    """
    d = q_tokens.data.shape[-1]
    if d % num_heads:
        raise ShapeError(f"width {d} not divisible by {num_heads} heads")
    _check_mask(blocked, q_tokens.data.shape[1], kv_tokens.data.shape[1])

    q = _split_heads(linear(q_tokens, store[f"{prefix}/wq"], store[f"{prefix}/bq"]), num_heads)
    # no key bias: adding one shifts every logit of a query row equally,
    # which softmax ignores, leaving an exactly-zero gradient direction
    k = _split_heads(linear(kv_tokens, store[f"{prefix}/wk"]), num_heads)
    v = _split_heads(linear(kv_tokens, store[f"{prefix}/wv"], store[f"{prefix}/bv"]), num_heads)

    logits = matmul(q, k.swapaxes(-1, -2)) * (1.0 / math.sqrt(d // num_heads))
    weights = masked_softmax(logits, blocked)
    out = _merge_heads(matmul(weights, v))
    return linear(out, store[f"{prefix}/wo"], store[f"{prefix}/bo"])


def attention_block(x, kv, blocked, store, prefix, num_heads):
    """Pre-norm attention + feed-forward with residuals.

    ``kv=None`` means self-attention; otherwise cross-attention into the
    separately normalized key/value tokens.
    """
    q_in = layer_norm(x, store[f"{prefix}/ln1_g"], store[f"{prefix}/ln1_b"])
    if kv is None:
        kv_in = q_in
    else:
        kv_in = layer_norm(kv, store[f"{prefix}/lnkv_g"], store[f"{prefix}/lnkv_b"])
    x = x + multi_head_attention(q_in, kv_in, blocked, store, prefix, num_heads)
    x = x + feed_forward(layer_norm(x, store[f"{prefix}/ln2_g"], store[f"{prefix}/ln2_b"]), store, prefix)
    return x


def causal_mask(n):
    """(n, n) boolean mask blocking attention to later positions."""
    return np.triu(np.ones((n, n), dtype=bool), k=1)


# -- initialization ----------------------------------------------------

def init_linear(store, name, fan_in, fan_out, rng, bias=True, scale=1.0):
    bound = scale / math.sqrt(max(fan_in, 1))
    store.add(f"{name}_w", rng.uniform(-bound, bound, (fan_in, fan_out)))
    if bias:
        store.add(f"{name}_b", np.zeros(fan_out))


def init_layer_norm(store, name, dim):
    store.add(f"{name}_g", np.ones(dim))
    store.add(f"{name}_b", np.zeros(dim))


def init_embedding(store, name, rows, dim, rng):
    bound = 1.0 / math.sqrt(dim)
    store.add(name, rng.uniform(-bound, bound, (rows, dim)))


def init_attention_block(store, prefix, dim, ffn_hidden, rng, cross=False):
    init_layer_norm(store, f"{prefix}/ln1", dim)
    if cross:
        init_layer_norm(store, f"{prefix}/lnkv", dim)
    bound = 1.0 / math.sqrt(dim)
    for proj in ("q", "k", "v", "o"):
        store.add(f"{prefix}/w{proj}", rng.uniform(-bound, bound, (dim, dim)))
        if proj != "k":
            store.add(f"{prefix}/b{proj}", np.zeros(dim))
    init_layer_norm(store, f"{prefix}/ln2", dim)
    init_linear(store, f"{prefix}/ffn1", dim, ffn_hidden, rng)
    init_linear(store, f"{prefix}/ffn2", ffn_hidden, dim, rng)


__all__ = [
    "linear",
    "feed_forward",
    "multi_head_attention",
    "attention_block",
    "causal_mask",
    "init_linear",
    "init_layer_norm",
    "init_embedding",
    "init_attention_block",
]
