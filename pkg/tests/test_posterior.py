import numpy as np
import pytest

from bone.core import GaussBelief, LinearDynamics
from bone.measurement import MeasurementSpec
from bone.posterior import kf_predict, lg_update, wolf_update
from oracles import batch_linreg_posterior

LINEAR = MeasurementSpec("linear-gaussian", obs_noise=[[1.0]])


class TestKfPredict:
    def test_identity_dynamics(self):
        belief = GaussBelief([1.0, -2.0], np.diag([0.5, 2.0]))
        dyn = LinearDynamics(np.eye(2), np.zeros(2), np.zeros((2, 2)))
        out = kf_predict(belief, dyn)
        np.testing.assert_array_equal(out.mean, belief.mean)
        np.testing.assert_array_equal(out.cov, belief.cov)

    def test_instant_reversion(self):
        # rate-zero mean reversion: F = 0, b = mu0, Q = Sigma0
        mu0, Sigma0 = np.array([3.0]), np.array([[2.0]])
        belief = GaussBelief([-5.0], [[9.0]])
        dyn = LinearDynamics(np.zeros((1, 1)), mu0, Sigma0)
        out = kf_predict(belief, dyn)
        assert out.mean == pytest.approx(mu0)
        np.testing.assert_allclose(out.cov, Sigma0)

    def test_scalar_affine(self):
        belief = GaussBelief([1.0], [[1.0]])
        dyn = LinearDynamics([[2.0]], [0.0], [[3.0]])
        out = kf_predict(belief, dyn)
        assert out.mean == pytest.approx([2.0])
        np.testing.assert_allclose(out.cov, [[7.0]])


class TestLgUpdate:
    def test_equal_precision_average(self):
        post, diag = lg_update(GaussBelief([0.0], [[1.0]]), LINEAR, [1.0], [1.0])
        assert post.mean == pytest.approx([0.5])
        np.testing.assert_allclose(post.cov, [[0.5]])
        assert diag.wolf_weight == 1.0
        assert diag.innovation == pytest.approx([1.0])
        np.testing.assert_allclose(diag.innovation_cov, [[2.0]])

    def test_zero_jacobian_keeps_prior(self):
        post, _ = lg_update(GaussBelief([0.7], [[2.0]]), LINEAR, [0.0], [5.0])
        assert post.mean == pytest.approx([0.7])
        np.testing.assert_allclose(post.cov, [[2.0]])

    def test_sequential_equals_batch_oracle(self):
        rng = np.random.default_rng(1)
        mu0 = np.zeros(2)
        Sigma0 = np.eye(2)
        X = rng.normal(size=(20, 2))
        y = rng.normal(size=20)
        belief = GaussBelief(mu0, Sigma0)
        spec = MeasurementSpec("linear-gaussian", obs_noise=[[1.0]])
        for t in range(20):
            belief, _ = lg_update(belief, spec, X[t], [y[t]])
        mu_b, Sigma_b = batch_linreg_posterior(X, y, mu0, Sigma0, 1.0)
        np.testing.assert_allclose(belief.mean, mu_b, atol=1e-8)
        np.testing.assert_allclose(belief.cov, Sigma_b, atol=1e-8)

    def test_order_invariance_against_batch(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(15, 3))
        y = rng.normal(size=15)
        mu0, Sigma0 = np.zeros(3), 2.0 * np.eye(3)
        spec = MeasurementSpec("linear-gaussian", obs_noise=[[0.5]])
        mu_b, Sigma_b = batch_linreg_posterior(X, y, mu0, Sigma0, 0.5)
        for seed in range(3):
            perm = np.random.default_rng(seed).permutation(15)
            belief = GaussBelief(mu0, Sigma0)
            for t in perm:
                belief, _ = lg_update(belief, spec, X[t], [y[t]])
            np.testing.assert_allclose(belief.mean, mu_b, atol=1e-8)
            np.testing.assert_allclose(belief.cov, Sigma_b, atol=1e-8)

    def test_trace_never_increases(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            m = rng.integers(1, 4)
            a = rng.normal(size=(m, m))
            prior = GaussBelief(rng.normal(size=m), a @ a.T + 0.1 * np.eye(m))
            spec = MeasurementSpec("linear-gaussian", obs_noise=[[rng.uniform(0.1, 2.0)]])
            x = rng.normal(size=m)
            post, _ = lg_update(prior, spec, x, [rng.normal()])
            assert np.trace(post.cov) <= np.trace(prior.cov) + 1e-10

    def test_expfam_route(self):
        spec = MeasurementSpec("bernoulli-logit")
        prior = GaussBelief([0.0, 0.0], np.eye(2))
        post, diag = lg_update(prior, spec, [1.0, -1.0], 1.0)
        # observing class 1 at logit 0 pulls the mean toward positive logits
        assert post.mean @ np.array([1.0, -1.0]) > 0.0
        assert diag.innovation == pytest.approx([0.5])


class TestWolfUpdate:
    def test_zero_residual_matches_lg(self):
        prior = GaussBelief([1.0], [[2.0]])
        post_w, diag = wolf_update(prior, LINEAR, [1.0], [1.0], c=4.0)
        post_l, _ = lg_update(prior, LINEAR, [1.0], [1.0])
        assert diag.wolf_weight == pytest.approx(1.0)
        np.testing.assert_allclose(post_w.mean, post_l.mean)
        np.testing.assert_allclose(post_w.cov, post_l.cov)

    def test_residual_at_threshold(self):
        # e = c with R = 1 gives weight 2^(-1/2) and effective noise 2
        c = 3.0
        prior = GaussBelief([0.0], [[1.0]])
        _, diag = wolf_update(prior, LINEAR, [1.0], [c], c=c)
        assert diag.wolf_weight == pytest.approx(2.0**-0.5)
        # S = H Sigma H^T + R/W^2 = 1 + 2
        np.testing.assert_allclose(diag.innovation_cov, [[3.0]])

    def test_outlier_influence_bounded(self):
        # settled-in prior: variance 0.25 after a stretch of clean data
        prior = GaussBelief([0.0], [[0.25]])
        post_w, diag = wolf_update(prior, LINEAR, [1.0], [40.0], c=4.0)
        post_l, _ = lg_update(prior, LINEAR, [1.0], [40.0])
        assert diag.wolf_weight == pytest.approx((1.0 + 1600.0 / 16.0) ** -0.5, rel=1e-9)
        move_w = abs(post_w.mean[0] - prior.mean[0])
        move_l = abs(post_l.mean[0] - prior.mean[0])
        assert move_w < 0.015 * move_l

    def test_weight_monotone_and_vanishing(self):
        prior = GaussBelief([0.0], [[1.0]])
        residuals = [0.0, 1.0, 2.0, 5.0, 10.0, 100.0, 1e4]
        weights = [
            wolf_update(prior, LINEAR, [1.0], [e], c=2.0)[1].wolf_weight
            for e in residuals
        ]
        assert all(w1 >= w2 for w1, w2 in zip(weights, weights[1:]))
        assert weights[-1] < 1e-3

    def test_requires_gaussian_family(self):
        with pytest.raises(ValueError):
            wolf_update(
                GaussBelief([0.0], [[1.0]]),
                MeasurementSpec("bernoulli-logit"),
                [1.0],
                1.0,
                c=2.0,
            )

    def test_rejects_nonpositive_threshold(self):
        with pytest.raises(ValueError):
            wolf_update(GaussBelief([0.0], [[1.0]]), LINEAR, [1.0], [1.0], c=0.0)
