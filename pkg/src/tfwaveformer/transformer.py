"""Hybrid encoder over the temporal and frequency streams.

The two streams (a position-wise MLP of the fused slot features, and the
gated multi-scale response) are summed with a sinusoidal positional table
and layer-normalized, then run through a stack of post-norm self-attention
blocks with key-side padding masks.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor, concat, lecun_uniform
from .errors import ConfigError

MASK_BIAS = -1e30


def positional_table(length, d, dtype=np.float32):
    """Interleaved sin/cos table, ``(length, d)``.

    ``table[pos, 2i] = sin(pos / 10000**(2i/d))`` and the next column holds
    the matching cosine. Odd widths cannot interleave and are rejected.
    """
    if d % 2 != 0:
        raise ConfigError(f"positional table needs an even width, got {d}")
    pos = np.arange(length, dtype=np.float64)[:, None]
    i2 = np.arange(0, d, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, i2 / d)
    table = np.empty((length, d), dtype=np.float64)
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return table.astype(dtype)


class LayerNormAffine:
    """Layer norm over the channel axis with a learned scale and shift."""

    def __init__(self, d, dtype=np.float32):
        self.gamma = Tensor(np.ones(d, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)

    def parameters(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def __call__(self, x):
        return x.layer_norm(axis=-1) * self.gamma + self.beta


class MultiHeadSelfAttention:
    """Per-head projections with key-side padding masks.

    Masked key columns receive a large negative additive bias before the
    softmax, so their weights underflow to exactly zero. Sequences with no
    valid slot at all produce all-zero attention output rows.
    """

    def __init__(self, d, h, rng, dtype=np.float32):
        if h < 1:
            raise ConfigError(f"need at least one attention head, got {h}")
        if d % h != 0:
            raise ConfigError(f"width {d} is not divisible by {h} heads")
        self.d = d
        self.h = h
        self.d_h = d // h

        def proj(shape, fan_in):
            return Tensor(lecun_uniform(rng, shape, fan_in, dtype), requires_grad=True)

        self.wq = [proj((d, self.d_h), d) for _ in range(h)]
        self.wk = [proj((d, self.d_h), d) for _ in range(h)]
        self.wv = [proj((d, self.d_h), d) for _ in range(h)]
        self.wo = proj((d, d), d)

    def parameters(self):
        out = {}
        for i in range(self.h):
            out[f"head{i}.wq"] = self.wq[i]
            out[f"head{i}.wk"] = self.wk[i]
            out[f"head{i}.wv"] = self.wv[i]
        out["wo"] = self.wo
        return out

    def forward(self, x, mask, return_weights=False):
        """``x`` is ``(N, L, d)``; ``mask`` ``(N, L)`` marks valid keys."""
        n, length, _ = x.shape
        mask = np.asarray(mask, dtype=bool)
        bias = np.where(mask, 0.0, MASK_BIAS).astype(x.data.dtype)[:, None, :]
        # rows of sequences with no valid key still softmax to a uniform
        # distribution; this factor zeroes those outputs afterwards
        any_valid = mask.any(axis=1).astype(x.data.dtype)[:, None, None]

        heads = []
        weights = []
        for i in range(self.h):
            q = x @ self.wq[i]
            k = x @ self.wk[i]
            v = x @ self.wv[i]
            logits = q @ k.swapaxes(-1, -2) + bias
            att = logits.softmax(axis=-1, temperature=math.sqrt(self.d_h))
            if return_weights:
                weights.append(att.data.copy())
            heads.append(att @ v)
        out = (concat(heads, axis=-1) @ self.wo) * any_valid
        if return_weights:
            return out, weights
        return out


class TransformerLayer:
    """Post-norm block: attention then a GELU MLP, both with residuals."""

    def __init__(self, d, h, rng, dtype=np.float32):
        self.attn = MultiHeadSelfAttention(d, h, rng, dtype=dtype)
        self.ln1 = LayerNormAffine(d, dtype=dtype)
        d_ff = 4 * d
        self.ffn_w1 = Tensor(lecun_uniform(rng, (d, d_ff), d, dtype), requires_grad=True)
        self.ffn_b1 = Tensor(np.zeros(d_ff, dtype=dtype), requires_grad=True)
        self.ffn_w2 = Tensor(lecun_uniform(rng, (d_ff, d), d_ff, dtype), requires_grad=True)
        self.ffn_b2 = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
        self.ln2 = LayerNormAffine(d, dtype=dtype)

    def parameters(self):
        out = {f"attn.{k}": v for k, v in self.attn.parameters().items()}
        out.update({f"ln1.{k}": v for k, v in self.ln1.parameters().items()})
        out["ffn.w1"] = self.ffn_w1
        out["ffn.b1"] = self.ffn_b1
        out["ffn.w2"] = self.ffn_w2
        out["ffn.b2"] = self.ffn_b2
        out.update({f"ln2.{k}": v for k, v in self.ln2.parameters().items()})
        return out

    def ffn(self, z):
        return ((z @ self.ffn_w1 + self.ffn_b1).gelu()) @ self.ffn_w2 + self.ffn_b2

    def forward(self, z, mask, dropout=0.0, rng=None):
        a = self.attn.forward(z, mask)
        a = _maybe_dropout(a, dropout, rng)
        z1 = self.ln1(z + a)
        f = self.ffn(z1)
        f = _maybe_dropout(f, dropout, rng)
        return self.ln2(z1 + f)


def _maybe_dropout(x, rate, rng):
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)
    return x * keep


class HybridTransformer:
    """Stream fusion plus a stack of attention blocks."""

    def __init__(self, d, h, n_layers, rng, dtype=np.float32, dropout=0.0):
        if n_layers < 1:
            raise ConfigError(f"need at least one encoder layer, got {n_layers}")
        self.d = d
        self.dropout = float(dropout)
        self.dtype = dtype

        self.tm_w1 = Tensor(lecun_uniform(rng, (d, d), d, dtype), requires_grad=True)
        self.tm_b1 = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
        self.tm_w2 = Tensor(lecun_uniform(rng, (d, d), d, dtype), requires_grad=True)
        self.tm_b2 = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
        self.input_norm = LayerNormAffine(d, dtype=dtype)
        self.layers = [TransformerLayer(d, h, rng, dtype=dtype) for _ in range(n_layers)]

    def parameters(self):
        out = {
            "temporal_mlp.w1": self.tm_w1,
            "temporal_mlp.b1": self.tm_b1,
            "temporal_mlp.w2": self.tm_w2,
            "temporal_mlp.b2": self.tm_b2,
        }
        out.update({f"input_norm.{k}": v for k, v in self.input_norm.parameters().items()})
        for i, layer in enumerate(self.layers):
            out.update({f"layer{i}.{k}": v for k, v in layer.parameters().items()})
        return out

    def temporal_stream(self, x):
        return ((x @ self.tm_w1 + self.tm_b1).gelu()) @ self.tm_w2 + self.tm_b2

    def fuse_streams(
        self, x, z_gated, use_temporal=True, use_frequency=True, with_positions=True
    ):
        """``LN(MLP(X) + Z_gated + PE)``; an ablated stream contributes zero."""
        n, length, _ = x.shape
        parts = None
        if use_temporal:
            parts = self.temporal_stream(x)
        if use_frequency and z_gated is not None:
            parts = z_gated if parts is None else parts + z_gated
        if parts is None:
            parts = x * 0.0
        if with_positions:
            parts = parts + positional_table(length, self.d, dtype=self.dtype)
        return self.input_norm(parts)

    def encode(self, z0, mask, rng=None):
        z = z0
        for layer in self.layers:
            z = layer.forward(z, mask, dropout=self.dropout, rng=rng)
        return z
