"""World-model networks over the gradient tape.

Components share one ParamStore under the prefixes encoder/, history/,
dynamics/, reward/, value/, policy/ and decoder/ so training phases can
freeze whole components.

The history encoder emits a token sequence (no pooling): projected
proprio and action tokens interleaved chronologically, a type embedding
marking proprio vs action vs padding, one token for the latest
exteroceptive grid, and learned positional embeddings. The dynamics and
policy transformers cross-attend into these tokens; padded history steps
are blocked keys.
"""

from __future__ import annotations

import numpy as np

from ..tensorops import (
    ParamStore,
    ShapeError,
    Tensor,
    attention_block,
    causal_mask,
    concat,
    embedding_lookup,
    init_attention_block,
    init_embedding,
    init_layer_norm,
    init_linear,
    linear,
    silu,
    stack,
    tensor,
)
from ..tensorops.tensor import layer_norm, tanh
from .config import MLP, SEQ2SEQ

TYPE_PROPRIO, TYPE_ACTION, TYPE_EXTERO, TYPE_PAD = 0, 1, 2, 3


def init_world_model(cfg, rng):
    store = ParamStore()
    d = cfg.latent_width

    # encoder: project both observation parts, then a two-layer fuse
    init_linear(store, "encoder/proprio", cfg.proprio_dim, d, rng)
    enc_in = d
    if cfg.extero_dim:
        init_linear(store, "encoder/extero", cfg.extero_dim, d, rng)
        enc_in += d
    init_linear(store, "encoder/fuse1", enc_in, cfg.encoder_hidden, rng)
    init_linear(store, "encoder/fuse2", cfg.encoder_hidden, d, rng, scale=0.1)

    # history tokens
    init_linear(store, "history/proprio", cfg.proprio_dim, d, rng)
    init_linear(store, "history/action", cfg.action_dim, d, rng)
    init_linear(store, "history/extero", cfg.extero_dim, d, rng)
    init_embedding(store, "history/type", 4, d, rng)
    init_embedding(store, "history/pos", 2 * cfg.history_len + 1, d, rng)

    # chunked latent dynamics
    init_linear(store, "dynamics/zproj", d, d, rng)
    init_linear(store, "dynamics/aproj", cfg.action_dim, d, rng)
    init_embedding(store, "dynamics/pos", cfg.horizon, d, rng)
    for i in range(cfg.dynamics_layers):
        init_attention_block(store, f"dynamics/l{i}/self", d, cfg.ffn_hidden, rng)
        init_attention_block(store, f"dynamics/l{i}/cross", d, cfg.ffn_hidden, rng, cross=True)
    init_layer_norm(store, "dynamics/out_ln", d)
    init_linear(store, "dynamics/out", d, d, rng, scale=0.1)

    # return heads
    if cfg.head_variant == SEQ2SEQ:
        init_linear(store, "reward/zproj", d, d, rng)
        init_linear(store, "reward/aproj", cfg.action_dim, d, rng)
        init_embedding(store, "reward/pos", cfg.horizon + 1, d, rng)
        for i in range(cfg.reward_layers):
            init_attention_block(store, f"reward/l{i}", d, cfg.ffn_hidden, rng)
        init_layer_norm(store, "reward/out_ln", d)
        init_linear(store, "reward/head", d, 1, rng)

        init_linear(store, "value/zproj", d, d, rng)
        init_embedding(store, "value/pos", cfg.horizon + 1, d, rng)
        for i in range(cfg.value_layers):
            init_attention_block(store, f"value/l{i}", d, cfg.ffn_hidden, rng)
        init_layer_norm(store, "value/out_ln", d)
        init_linear(store, "value/head", d, 1, rng)
    else:
        init_linear(store, "reward/mlp1", d + cfg.action_dim, cfg.head_hidden, rng)
        init_linear(store, "reward/mlp2", cfg.head_hidden, 1, rng)
        init_linear(store, "value/mlp1", d, cfg.head_hidden, rng)
        init_linear(store, "value/mlp2", cfg.head_hidden, 1, rng)

    # action-chunk policy
    init_linear(store, "policy/zproj", d, d, rng)
    init_embedding(store, "policy/pos", cfg.horizon, d, rng)
    for i in range(cfg.policy_layers):
        init_attention_block(store, f"policy/l{i}/self", d, cfg.ffn_hidden, rng)
        init_attention_block(store, f"policy/l{i}/cross", d, cfg.ffn_hidden, rng, cross=True)
    init_layer_norm(store, "policy/out_ln", d)
    init_linear(store, "policy/head", d, cfg.action_dim, rng)

    if cfg.reconstruction:
        init_linear(store, "decoder/mlp1", d, cfg.encoder_hidden, rng)
        init_linear(store, "decoder/mlp2", cfg.encoder_hidden, cfg.obs_dim, rng)
    return store


def _as_tensor(x):
    return x if isinstance(x, Tensor) else tensor(x)


def encode(store, cfg, proprio, extero):
    """Observation -> latent, (B, P) + (B, R, C) -> (B, D)."""
    proprio, extero = _as_tensor(proprio), _as_tensor(extero)
    if proprio.data.shape[-1] != cfg.proprio_dim:
        raise ShapeError(f"proprio width {proprio.data.shape[-1]} != {cfg.proprio_dim}")
    b = proprio.data.shape[0]
    parts = [linear(proprio, store["encoder/proprio_w"], store["encoder/proprio_b"])]
    if cfg.extero_dim:
        flat = extero.reshape((b, cfg.extero_dim))
        parts.append(linear(flat, store["encoder/extero_w"], store["encoder/extero_b"]))
    x = concat(parts, axis=-1) if len(parts) > 1 else parts[0]
    h = silu(linear(x, store["encoder/fuse1_w"], store["encoder/fuse1_b"]))
    return linear(h, store["encoder/fuse2_w"], store["encoder/fuse2_b"])


def encode_history(store, cfg, hist_proprio, hist_actions, extero_now, pad):
    """Past (proprio, action) pairs plus the current grid -> token sequence.

    Returns (tokens (B, 2H+1, D), blocked (B, 1, 1, 2H+1)): padded steps
    carry the pad type embedding and are blocked keys for cross-attention.
    """
    hist_proprio, hist_actions = _as_tensor(hist_proprio), _as_tensor(hist_actions)
    extero_now = _as_tensor(extero_now)
    b, h = hist_proprio.data.shape[:2]
    if h != cfg.history_len or hist_actions.data.shape[1] != cfg.history_len:
        raise ShapeError(f"history length {h} != {cfg.history_len}")
    pad = np.asarray(pad, bool)

    type_table = store["history/type"]
    p_tok = linear(hist_proprio, store["history/proprio_w"], store["history/proprio_b"])
    a_tok = linear(hist_actions, store["history/action_w"], store["history/action_b"])
    p_tok = p_tok + embedding_lookup(type_table, np.where(pad, TYPE_PAD, TYPE_PROPRIO))
    a_tok = a_tok + embedding_lookup(type_table, np.where(pad, TYPE_PAD, TYPE_ACTION))
    inter = stack([p_tok, a_tok], axis=2).reshape((b, 2 * h, cfg.latent_width))

    flat = extero_now.reshape((b, cfg.extero_dim))
    e_tok = linear(flat, store["history/extero_w"], store["history/extero_b"])
    e_tok = (e_tok + embedding_lookup(type_table, np.array([TYPE_EXTERO]))).reshape(
        (b, 1, cfg.latent_width))

    tokens = concat([inter, e_tok], axis=1) + store["history/pos"]
    blocked = np.concatenate(
        [np.repeat(pad, 2, axis=1), np.zeros((b, 1), bool)], axis=1)
    return tokens, blocked[:, None, None, :]


def rollout_latents(store, cfg, z, actions, h_tokens, h_blocked):
    """Predict all future latents in one causal pass.

    Query k carries the current latent, the k-th candidate action, and a
    positional embedding; causal self-attention keeps prediction k
    independent of later actions while cross-attention reads the history
    tokens.
    """
    z, actions = _as_tensor(z), _as_tensor(actions)
    t = cfg.horizon
    if actions.data.shape[1] != t:
        raise ShapeError(f"need exactly {t} actions, got {actions.data.shape[1]}")
    q = linear(z, store["dynamics/zproj_w"], store["dynamics/zproj_b"]).reshape(
        (z.data.shape[0], 1, cfg.latent_width))
    x = q + linear(actions, store["dynamics/aproj_w"], store["dynamics/aproj_b"]) \
        + store["dynamics/pos"]
    causal = causal_mask(t)
    for i in range(cfg.dynamics_layers):
        x = attention_block(x, None, causal, store, f"dynamics/l{i}/self", cfg.dynamics_heads)
        x = attention_block(x, h_tokens, h_blocked, store, f"dynamics/l{i}/cross",
                            cfg.dynamics_heads)
    x = layer_norm(x, store["dynamics/out_ln_g"], store["dynamics/out_ln_b"])
    return linear(x, store["dynamics/out_w"], store["dynamics/out_b"])


def predict_rewards(store, cfg, z_seq, actions):
    """(B, T+1, D) latents + (B, T, A) actions -> (B, T) rewards."""
    z_seq, actions = _as_tensor(z_seq), _as_tensor(actions)
    t = cfg.horizon
    if z_seq.data.shape[1] != t + 1:
        raise ShapeError(f"need {t + 1} latents, got {z_seq.data.shape[1]}")
    b = z_seq.data.shape[0]
    if cfg.head_variant == MLP:
        x = concat([z_seq[:, :t], actions], axis=-1)
        h = silu(linear(x, store["reward/mlp1_w"], store["reward/mlp1_b"]))
        return linear(h, store["reward/mlp2_w"], store["reward/mlp2_b"]).reshape((b, t))
    a_tok = linear(actions, store["reward/aproj_w"], store["reward/aproj_b"])
    a_tok = concat([a_tok, tensor(np.zeros((b, 1, cfg.latent_width), np.float32))], axis=1)
    x = linear(z_seq, store["reward/zproj_w"], store["reward/zproj_b"]) + a_tok \
        + store["reward/pos"]
    mask = causal_mask(t + 1) if cfg.return_head_causal else None
    for i in range(cfg.reward_layers):
        x = attention_block(x, None, mask, store, f"reward/l{i}", cfg.reward_heads)
    x = layer_norm(x, store["reward/out_ln_g"], store["reward/out_ln_b"])
    out = linear(x, store["reward/head_w"], store["reward/head_b"])
    return out[:, :t, 0]


def predict_values(store, cfg, z_seq):
    """(B, T+1, D) latents -> (B, T) values for the predicted steps."""
    z_seq = _as_tensor(z_seq)
    t = cfg.horizon
    if z_seq.data.shape[1] != t + 1:
        raise ShapeError(f"need {t + 1} latents, got {z_seq.data.shape[1]}")
    b = z_seq.data.shape[0]
    if cfg.head_variant == MLP:
        h = silu(linear(z_seq[:, 1:], store["value/mlp1_w"], store["value/mlp1_b"]))
        return linear(h, store["value/mlp2_w"], store["value/mlp2_b"]).reshape((b, t))
    x = linear(z_seq, store["value/zproj_w"], store["value/zproj_b"]) + store["value/pos"]
    mask = causal_mask(t + 1) if cfg.return_head_causal else None
    for i in range(cfg.value_layers):
        x = attention_block(x, None, mask, store, f"value/l{i}", cfg.value_heads)
    x = layer_norm(x, store["value/out_ln_g"], store["value/out_ln_b"])
    out = linear(x, store["value/head_w"], store["value/head_b"])
    return out[:, 1:, 0]


def base_policy(store, cfg, z, h_tokens, h_blocked):
    """Action chunk (B, T, A), squashed into the action bounds."""
    z = _as_tensor(z)
    t = cfg.horizon
    q = linear(z, store["policy/zproj_w"], store["policy/zproj_b"]).reshape(
        (z.data.shape[0], 1, cfg.latent_width))
    x = q + store["policy/pos"]
    causal = causal_mask(t)
    for i in range(cfg.policy_layers):
        x = attention_block(x, None, causal, store, f"policy/l{i}/self", cfg.policy_heads)
        x = attention_block(x, h_tokens, h_blocked, store, f"policy/l{i}/cross",
                            cfg.policy_heads)
    x = layer_norm(x, store["policy/out_ln_g"], store["policy/out_ln_b"])
    raw = linear(x, store["policy/head_w"], store["policy/head_b"])
    return tanh(raw) * cfg.action_scale


def decode_obs(store, cfg, z_seq):
    """Latents back to flat observation vectors (reconstruction ablation)."""
    if "decoder/mlp1_w" not in store:
        raise ShapeError("decoder parameters absent: reconstruction not enabled")
    h = silu(linear(_as_tensor(z_seq), store["decoder/mlp1_w"], store["decoder/mlp1_b"]))
    return linear(h, store["decoder/mlp2_w"], store["decoder/mlp2_b"])
