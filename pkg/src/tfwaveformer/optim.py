"""Adam with bias correction over named parameter tensors."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError


class Adam:
    """Standard Adam; parameters whose gradient is ``None`` are skipped."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        if lr <= 0:
            raise ParameterError(f"learning rate must be > 0, got {lr}")
        b1, b2 = betas
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise ParameterError(f"betas must sit in [0, 1), got {betas}")
        self.params = dict(params)
        self.lr = float(lr)
        self.beta1 = float(b1)
        self.beta2 = float(b2)
        self.eps = float(eps)
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.data -= self.lr * update

    def state_arrays(self):
        """Moment estimates and step count, keyed for checkpointing."""
        out = {"t": np.array([self.t], dtype=np.float32)}
        for name in self.params:
            out[f"m.{name}"] = self.m[name].copy()
            out[f"v.{name}"] = self.v[name].copy()
        return out

    def load_state_arrays(self, arrays):
        self.t = int(arrays["t"][0])
        for name, p in self.params.items():
            self.m[name] = (
                np.asarray(arrays[f"m.{name}"])
                .reshape(p.data.shape)
                .astype(p.data.dtype, copy=True)
            )
            self.v[name] = (
                np.asarray(arrays[f"v.{name}"])
                .reshape(p.data.shape)
                .astype(p.data.dtype, copy=True)
            )
