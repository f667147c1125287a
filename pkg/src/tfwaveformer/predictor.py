"""Sequence pooling, pairwise link scoring and the training loss."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, lecun_uniform
from .errors import ContractError


class LinkPredictor:
    """Pools slot embeddings and scores node pairs symmetrically.

    The score is ``w . (h_u * h_v) + b``; swapping the endpoints leaves it
    bit-identical because the elementwise product commutes.
    """

    def __init__(self, d, rng, dtype=np.float32, masked_pool=False):
        self.d = d
        self.masked_pool = bool(masked_pool)
        self.w = Tensor(lecun_uniform(rng, (d,), d, dtype), requires_grad=True)
        self.b = Tensor(np.zeros(1, dtype=dtype), requires_grad=True)

    def parameters(self):
        return {"w": self.w, "b": self.b}

    def pool(self, h, mask=None):
        """Mean over the slot axis with divisor exactly ``L``.

        With ``masked_pool`` set, padded rows are dropped and the divisor
        becomes the number of valid slots (empty sequences pool to zero).
        """
        if not self.masked_pool or mask is None:
            return h.mean(axis=1)
        m = np.asarray(mask, dtype=h.data.dtype)[..., None]
        counts = np.maximum(m.sum(axis=1), 1.0)
        return (h * m).sum(axis=1) * Tensor(1.0 / counts)

    def score(self, h_u, h_v):
        """Raw pair scores, shape ``(n,)``."""
        return ((h_u * h_v) * self.w).sum(axis=-1) + self.b

    def predict(self, h_u, h_v):
        return self.score(h_u, h_v).sigmoid()


def link_loss(scores, labels):
    """Mean logistic loss ``log(1 + exp(-y* s))`` with ``y* = 2y - 1``.

    Evaluated through a stable softplus, so scores of magnitude in the
    hundreds stay finite. The gradient wrt each score is
    ``-y* sigmoid(-y* s) / n``.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ContractError("loss over an empty batch is undefined")
    if scores.shape[0] != labels.shape[0]:
        raise ContractError(
            f"{scores.shape[0]} scores but {labels.shape[0]} labels"
        )
    ysign = (2.0 * labels - 1.0).astype(scores.data.dtype)
    return (scores * (-ysign)).softplus().mean()
