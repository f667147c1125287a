"""Learnable multi-scale sequence decomposition with gated fusion.

A bank of per-channel depthwise kernels filters the fused slot features at
several widths in parallel (no cascading between scales). Per-channel
softmax attention mixes the scale outputs, and a small gate network decides
how much of the mixed signal passes through.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, lecun_uniform
from .errors import ContractError, ParameterError, ScaleError

MAX_SCALES = 5


def default_kernel_sizes(m):
    """The first ``m`` odd widths, ``[1, 3, 5, 7, 9]`` prefix."""
    if not 1 <= m <= MAX_SCALES:
        raise ParameterError(f"number of scales must be in 1..{MAX_SCALES}, got {m}")
    return [1, 3, 5, 7, 9][:m]


def depthwise_conv(z, kernel):
    """Per-channel 1-D convolution along the slot axis with zero padding.

    ``z`` is ``(N, L, d)`` and ``kernel`` ``(d, k)``. Odd widths pad
    ``k // 2`` zeros on both sides; even widths pad one more on the left
    than on the right, so the output keeps length ``L``. Widths above
    ``2 * L`` are rejected.
    """
    n, length, d = z.shape
    dk, k = kernel.shape
    if dk != d:
        raise ContractError(f"kernel has {dk} channels but input has {d}")
    if k < 1:
        raise ParameterError(f"kernel width must be >= 1, got {k}")
    if k > 2 * length:
        raise ScaleError(
            f"kernel width {k} exceeds twice the sequence length ({2 * length})"
        )
    left = k // 2
    right = k - 1 - left
    padded = z.pad(1, left, right)
    out = None
    for j in range(k):
        term = padded[:, j : j + length, :] * kernel[:, j]
        out = term if out is None else out + term
    return out


class WaveletBank:
    """Learnable per-channel filters at ``m`` widths, applied in parallel."""

    def __init__(self, d, kernel_sizes, rng, lam=1e-5, dtype=np.float32):
        if lam < 0:
            raise ParameterError(f"kernel penalty weight must be >= 0, got {lam}")
        sizes = [int(k) for k in kernel_sizes]
        if not sizes or any(k < 1 for k in sizes):
            raise ParameterError(f"kernel sizes must be positive, got {kernel_sizes}")
        self.d = d
        self.kernel_sizes = sizes
        self.lam = float(lam)
        self.kernels = [
            Tensor(lecun_uniform(rng, (d, k), k, dtype), requires_grad=True)
            for k in sizes
        ]

    def parameters(self):
        return {f"kernel_{k}": w for k, w in zip(self.kernel_sizes, self.kernels)}

    def decompose(self, z):
        """All scale responses of ``z``, each computed from the raw input."""
        return [depthwise_conv(z, w) for w in self.kernels]

    def reg_penalty(self):
        """``lam`` times the summed square of every kernel entry."""
        total = None
        for w in self.kernels:
            s = (w * w).sum()
            total = s if total is None else total + s
        return total * self.lam


class ScaleAttention:
    """Per-channel softmax mixture over the scale responses."""

    def __init__(self, d, m, tau=1.0, dtype=np.float32):
        if tau <= 0:
            raise ParameterError(f"scale temperature must be > 0, got {tau}")
        self.tau = float(tau)
        # zero logits start every channel as an even mixture of scales
        self.weights = Tensor(np.zeros((m, d), dtype=dtype), requires_grad=True)

    def parameters(self):
        return {"weights": self.weights}

    def mixture(self):
        """Softmax of ``w / tau`` across scales, columns sum to one."""
        return self.weights.softmax(axis=0, temperature=self.tau)

    def fuse(self, responses):
        if len(responses) != self.weights.shape[0]:
            raise ContractError(
                f"got {len(responses)} scale responses for "
                f"{self.weights.shape[0]} attention rows"
            )
        s = self.mixture()
        out = None
        for k, z_k in enumerate(responses):
            term = z_k * s[k]
            out = term if out is None else out + term
        return out


class GateNetwork:
    """Elementwise sigmoid gate computed from the mixed response itself."""

    def __init__(self, d, rng, dtype=np.float32):
        self.f1 = Tensor(lecun_uniform(rng, (d, d), d, dtype), requires_grad=True)
        self.b1 = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
        self.f2 = Tensor(lecun_uniform(rng, (d, d), d, dtype), requires_grad=True)
        self.b2 = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)

    def parameters(self):
        return {"f1": self.f1, "b1": self.b1, "f2": self.f2, "b2": self.b2}

    def gate(self, z):
        h = (z @ self.f1 + self.b1).gelu()
        return (h @ self.f2 + self.b2).sigmoid()

    def reconstruct(self, z):
        return self.gate(z) * z


class FrequencyBranch:
    """Decompose, mix and gate: the full frequency-domain pathway."""

    def __init__(self, d, kernel_sizes, rng, lam=1e-5, tau=1.0, dtype=np.float32):
        self.bank = WaveletBank(d, kernel_sizes, rng, lam=lam, dtype=dtype)
        self.attention = ScaleAttention(d, len(self.bank.kernel_sizes), tau=tau, dtype=dtype)
        self.gate = GateNetwork(d, rng, dtype=dtype)

    def parameters(self):
        out = {}
        for name, p in self.bank.parameters().items():
            out[f"bank.{name}"] = p
        for name, p in self.attention.parameters().items():
            out[f"scale_attention.{name}"] = p
        for name, p in self.gate.parameters().items():
            out[f"gate.{name}"] = p
        return out

    def forward(self, z):
        mixed = self.attention.fuse(self.bank.decompose(z))
        return self.gate.reconstruct(mixed)
