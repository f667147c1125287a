"""Tests for pooling, pair scoring and the logistic link loss."""

import math

import numpy as np
import pytest
from helpers import assert_param_grads_match

from tfwaveformer.autodiff import Tensor
from tfwaveformer.errors import ContractError
from tfwaveformer.predictor import LinkPredictor, link_loss
from scipy.special import expit


class TestPooling:
    def test_plain_mean_divides_by_full_length(self):
        rng = np.random.default_rng(40)
        pred = LinkPredictor(4, rng, dtype=np.float64)
        h = rng.standard_normal((3, 5, 4))
        out = pred.pool(Tensor(h)).data
        np.testing.assert_allclose(out, h.sum(axis=1) / 5.0, atol=1e-12)

    def test_plain_mean_ignores_mask(self):
        rng = np.random.default_rng(41)
        pred = LinkPredictor(4, rng, dtype=np.float64)
        h = rng.standard_normal((2, 4, 4))
        mask = np.array([[False, False, True, True], [True] * 4])
        out = pred.pool(Tensor(h), mask).data
        np.testing.assert_allclose(out, h.mean(axis=1), atol=1e-12)

    def test_masked_variant_divides_by_valid_count(self):
        rng = np.random.default_rng(42)
        pred = LinkPredictor(4, rng, dtype=np.float64, masked_pool=True)
        h = rng.standard_normal((2, 4, 4))
        mask = np.array([[False, False, True, True], [True] * 4])
        out = pred.pool(Tensor(h), mask).data
        np.testing.assert_allclose(out[0], h[0, 2:].mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(out[1], h[1].mean(axis=0), atol=1e-12)

    def test_masked_variant_empty_sequence(self):
        rng = np.random.default_rng(43)
        pred = LinkPredictor(4, rng, dtype=np.float64, masked_pool=True)
        h = rng.standard_normal((1, 3, 4))
        mask = np.zeros((1, 3), dtype=bool)
        out = pred.pool(Tensor(h), mask).data
        np.testing.assert_array_equal(out, 0.0)


class TestScoring:
    def test_symmetry_is_exact(self):
        rng = np.random.default_rng(44)
        pred = LinkPredictor(16, rng)
        hu = Tensor(rng.standard_normal((10, 16)).astype(np.float32))
        hv = Tensor(rng.standard_normal((10, 16)).astype(np.float32))
        s_uv = pred.score(hu, hv).data
        s_vu = pred.score(hv, hu).data
        np.testing.assert_array_equal(s_uv, s_vu)

    def test_predict_is_sigmoid_of_score(self):
        rng = np.random.default_rng(45)
        pred = LinkPredictor(8, rng, dtype=np.float64)
        hu = Tensor(rng.standard_normal((5, 8)))
        hv = Tensor(rng.standard_normal((5, 8)))
        p = pred.predict(hu, hv).data
        s = pred.score(hu, hv).data
        np.testing.assert_allclose(p, expit(s), rtol=1e-12)
        assert np.all((p > 0) & (p < 1))

    def test_score_gradients(self):
        rng = np.random.default_rng(46)
        pred = LinkPredictor(6, rng, dtype=np.float64)
        hu = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
        hv = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
        labels = np.array([1.0, 0.0, 1.0, 1.0])

        def loss():
            return link_loss(pred.score(hu, hv), labels)

        params = {"w": pred.w, "b": pred.b, "hu": hu, "hv": hv}
        assert_param_grads_match(loss, params)


class TestLinkLoss:
    def test_zero_scores_give_log_two(self):
        scores = Tensor(np.zeros(7, dtype=np.float64))
        loss = link_loss(scores, np.array([1, 0, 1, 0, 1, 1, 0]))
        assert abs(loss.item() - math.log(2.0)) <= 1e-9

    def test_extreme_scores_stay_finite(self):
        scores = Tensor(np.array([500.0, -500.0, 500.0, -500.0]))
        loss = link_loss(scores, np.array([1, 1, 0, 0]))
        val = loss.item()
        assert np.isfinite(val)
        # two items contribute ~0, two contribute ~500
        np.testing.assert_allclose(val, 250.0, rtol=1e-6)

    def test_empty_batch_rejected(self):
        with pytest.raises(ContractError):
            link_loss(Tensor(np.zeros(0)), np.zeros(0))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ContractError):
            link_loss(Tensor(np.zeros(3)), np.array([1.0]))

    def test_score_gradient_closed_form(self):
        """dL/ds must equal -y* sigmoid(-y* s) / n."""
        rng = np.random.default_rng(47)
        s = Tensor(rng.standard_normal(9) * 3.0, requires_grad=True)
        labels = (rng.random(9) < 0.5).astype(np.float64)
        link_loss(s, labels).backward()
        ysign = 2.0 * labels - 1.0
        want = -ysign * expit(-ysign * s.data) / 9.0
        np.testing.assert_allclose(s.grad, want, rtol=1e-12)
