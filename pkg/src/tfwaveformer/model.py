"""End-to-end model: features -> frequency branch -> encoder -> scores."""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .features import FeatureExtractor
from .predictor import LinkPredictor, link_loss
from .transformer import HybridTransformer
from .wavelet import FrequencyBranch


class TFWaveFormer:
    """Dynamic link predictor over recent-interaction sequences.

    ``embed`` maps a batch of neighbor sequences to node embeddings;
    ``score_pairs`` expects the stacked layout produced by
    :func:`~.features.build_pair_batch` (sources in the first half of the
    rows, destinations in the second).
    """

    def __init__(
        self,
        d,
        d_e,
        heads,
        n_layers,
        kernel_sizes,
        seed=42,
        tau=1.0,
        lam=1e-5,
        dropout=0.0,
        masked_pool=False,
        use_temporal=True,
        use_frequency=True,
        dtype=np.float32,
    ):
        rng = np.random.default_rng(seed)
        self.d = d
        self.d_e = d_e
        self.use_temporal = bool(use_temporal)
        self.use_frequency = bool(use_frequency)
        self.hyper_record = {
            "d": d,
            "d_e": d_e,
            "heads": heads,
            "n_layers": n_layers,
            "kernel_sizes": list(kernel_sizes),
            "seed": seed,
            "tau": tau,
            "lam": lam,
            "dropout": dropout,
            "masked_pool": int(bool(masked_pool)),
            "use_temporal": int(bool(use_temporal)),
            "use_frequency": int(bool(use_frequency)),
        }
        self.features = FeatureExtractor(d, d_e, rng, dtype=dtype)
        self.frequency = FrequencyBranch(
            d, kernel_sizes, rng, lam=lam, tau=tau, dtype=dtype
        )
        self.encoder = HybridTransformer(
            d, heads, n_layers, rng, dtype=dtype, dropout=dropout
        )
        self.predictor = LinkPredictor(d, rng, dtype=dtype, masked_pool=masked_pool)

    def parameters(self):
        out = {}
        for prefix, module in (
            ("features", self.features),
            ("frequency", self.frequency),
            ("encoder", self.encoder),
            ("predictor", self.predictor),
        ):
            for name, p in module.parameters().items():
                out[f"{prefix}.{name}"] = p
        return out

    def zero_grad(self):
        for p in self.parameters().values():
            p.grad = None

    def embed(self, batch, rng=None):
        """Pooled embeddings ``(N, d)`` for a batch of sequences."""
        x = self.features.fuse(batch)
        z_gated = self.frequency.forward(x) if self.use_frequency else None
        z0 = self.encoder.fuse_streams(
            x,
            z_gated,
            use_temporal=self.use_temporal,
            use_frequency=self.use_frequency,
        )
        h = self.encoder.encode(z0, batch.mask, rng=rng)
        return self.predictor.pool(h, batch.mask)

    def score_pairs(self, batch, rng=None):
        """Raw scores for a stacked pair batch (first half u, second half v)."""
        n = batch.n
        if n % 2 != 0:
            raise ContractError(
                f"pair batches stack sources then destinations; got {n} rows"
            )
        emb = self.embed(batch, rng=rng)
        half = n // 2
        return self.predictor.score(emb[:half], emb[half:])

    def loss(self, batch, labels, rng=None):
        """Classification loss plus the kernel norm penalty."""
        scores = self.score_pairs(batch, rng=rng)
        base = link_loss(scores, labels)
        if self.use_frequency and self.frequency.bank.lam > 0:
            return base + self.frequency.bank.reg_penalty()
        return base
