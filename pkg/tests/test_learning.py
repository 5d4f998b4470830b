import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solsa.bptt import bptt_gradients, unrolled_forward
from solsa.dynamics import LayerParams, NetworkParams, NetworkState, init_params, network_forward_step
from solsa.learning import (LearnerState, SequencingError, accumulate_step, apply_update,
                            eligibility_trace_step, kernel_decay_factor,
                            learning_signal_backprop, per_step_loss)


def random_net(seed, sizes, input_filter=False, scale=2.5):
    return init_params(sizes, np.random.default_rng(seed), weight_scale=scale,
                       input_filter=input_filter)


def random_frames(seed, T, D):
    return np.random.default_rng(seed).uniform(0, 1, (T, D))


class TestPerStepLoss:
    @pytest.mark.parametrize("out, target, value, grad", [
        ([1, 0], 0, 0.0, [0, 0]),
        ([0, 0], 0, 0.5, [-1, 0]),
        ([1, 1], 1, 0.5, [1, 0]),
    ])
    def test_examples(self, out, target, value, grad):
        loss = per_step_loss(np.array(out), target, 2)
        assert loss.value == value
        np.testing.assert_array_equal(loss.dE_dO, grad)

    @pytest.mark.parametrize("target", [-1, 2])
    def test_bad_target(self, target):
        with pytest.raises(IndexError):
            per_step_loss(np.zeros(2), target, 2)


class TestLearningSignal:
    def test_zero_error(self):
        params = random_net(0, [3, 4, 2])
        mu = learning_signal_backprop(np.zeros(2), [np.ones(4), np.ones(2)], params)
        assert all(not m.any() for m in mu)

    def test_single_layer(self):
        params = random_net(0, [3, 2])
        mu = learning_signal_backprop(np.array([0.5, -1.0]), [np.array([0.2, 0.3])], params)
        np.testing.assert_allclose(mu[0], [0.1, -0.3])

    def test_two_layer_scalar_chain(self):
        def layer(w, b):
            return LayerParams(np.array([[w]]), np.array([[0.5]]), np.array([[b]]), False)
        params = NetworkParams([layer(1.0, 1.0), layer(0.7, 0.6)])
        dE, e1, e2 = -1.0, 0.3, 0.8
        mu = learning_signal_backprop(np.array([dE]), [np.array([e1]), np.array([e2])], params)
        assert mu[1][0] == pytest.approx(dE * e2)
        assert mu[0][0] == pytest.approx(dE * e2 * 0.7 * 0.6 * e1)

    def test_shape_mismatch(self):
        params = random_net(0, [3, 4, 2])
        with pytest.raises(ValueError):
            learning_signal_backprop(np.zeros(2), [np.ones(2)], params)


class TestEligibilityTrace:
    @pytest.mark.parametrize("e_prev, eps, F, expected", [
        (0.0, 0.3, 0.7, 0.7),
        (1.0, 0.0, 0.0, 0.9),
        (1.0, 0.5, 0.2, 0.6),
    ])
    def test_examples(self, e_prev, eps, F, expected):
        assert eligibility_trace_step(e_prev, eps, F, 0.9, 1.0) == pytest.approx(expected)

    @given(st.floats(0.0, 0.8), st.floats(-2, 2), st.floats(0.1, 0.95))
    def test_closed_form_fixed_point(self, eps, f, lam):
        v_th = 1.0
        leak = lam - v_th * eps
        e = 0.0
        for _ in range(2000):
            e = eligibility_trace_step(e, eps, f, lam, v_th)
        assert abs(leak) < 1
        assert e == pytest.approx(f / (1 - lam + v_th * eps), abs=1e-9)


class TestKernelDecay:
    def test_first_step(self):
        assert kernel_decay_factor(0, 0.9) == 1.0

    @given(st.floats(0.01, 0.99))
    def test_monotone_and_bounded(self, gamma):
        vals = [kernel_decay_factor(t, gamma) for t in range(200)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert max(vals) <= 1 / (1 - gamma) * (1 + 1e-12)


class TestAccumulate:
    def test_before_forward(self):
        params = random_net(0, [2, 2])
        with pytest.raises(SequencingError):
            accumulate_step(LearnerState.zeros(params), NetworkState.zeros(params), np.zeros(2),
                            params)

    def test_skipped_step(self):
        params = random_net(0, [2, 2])
        state = NetworkState.zeros(params)
        for _ in range(2):
            state, _ = network_forward_step(state, np.ones(2), params)
        with pytest.raises(SequencingError):
            accumulate_step(LearnerState.zeros(params), state, np.zeros(2), params)

    def test_zero_dE_gives_zero_gradients(self):
        params = random_net(1, [3, 5, 4, 2])
        learner = LearnerState.zeros(params)
        state = NetworkState.zeros(params)
        for frame in random_frames(2, 30, 3):
            state, _ = network_forward_step(state, frame, params)
            accumulate_step(learner, state, np.zeros(2), params)
        for arrs in (learner.grad_w, learner.grad_alpha, learner.grad_beta):
            assert all(not a.any() for a in arrs)
        assert learner.grad_log == [0.0] * 30

    @pytest.mark.parametrize("input_filter", [False, True])
    def test_perfect_output_gives_zero_gradients(self, solsa_sequence, input_filter):
        w = np.array([[10.0, 10.0], [-10.0, -10.0]])
        lp = LayerParams(w, np.full((2, 2), 0.9), np.full((2, 2), 0.9), not input_filter)
        params = NetworkParams([lp])
        frames = np.ones((15, 2))
        hist = unrolled_forward(params, frames, 0)
        assert hist.losses.sum() == 0
        learner = solsa_sequence(params, frames, 0)
        for arrs in (learner.grad_w, learner.grad_alpha, learner.grad_beta):
            assert all(not a.any() for a in arrs)
        for arrs in bptt_gradients(hist, params):
            assert all(not a.any() for a in arrs)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.booleans(), st.integers(1, 6), st.integers(1, 5))
    def test_single_layer_matches_bptt(self, solsa_sequence, rel_err, seed, input_filter, D, K):
        params = random_net(seed, [D, K], input_filter=input_filter)
        frames = random_frames(seed + 1, 20, D)
        label = seed % K
        learner = solsa_sequence(params, frames, label, adapt_kernels=False)
        gw, _, _ = bptt_gradients(unrolled_forward(params, frames, label), params)
        if np.linalg.norm(gw[0]) == 0:
            assert not learner.grad_w[0].any()
        else:
            assert rel_err(learner.grad_w, gw) < 1e-6

    def test_kernel_gradients_brute_force_replay(self, solsa_sequence):
        params = random_net(5, [3, 6, 4, 2])
        frames = random_frames(6, 25, 3)
        gamma = 0.8
        record = []
        learner = solsa_sequence(params, frames, 1, gamma=gamma, record=record)
        for l, lp in enumerate(params.layers):
            ga = np.zeros_like(lp.w)
            gb = np.zeros_like(lp.w)
            if not lp.is_input_layer:
                for t, step in enumerate(record):
                    geo = sum(gamma ** n for n in range(t + 1))
                    ga += step["mu"][l][:, None] * lp.w * step["F_prev"][l] * geo
                    gb += step["mu"][l][:, None] * lp.w * step["x"][l][None, :] * geo
            np.testing.assert_allclose(learner.grad_alpha[l], ga, rtol=1e-10, atol=1e-14)
            np.testing.assert_allclose(learner.grad_beta[l], gb, rtol=1e-10, atol=1e-14)
        assert any(np.abs(g).sum() > 0 for g in learner.grad_alpha)

    def test_frozen_kernels_accumulate_nothing(self, solsa_sequence):
        params = random_net(5, [3, 6, 2])
        learner = solsa_sequence(params, random_frames(6, 25, 3), 0, adapt_kernels=False)
        assert all(not g.any() for g in learner.grad_alpha + learner.grad_beta)
        assert any(g.any() for g in learner.grad_w)

    def test_multilayer_alignment(self, solsa_sequence):
        cosines = []
        rng = np.random.default_rng(123)
        for trial in range(100):
            D, H, K = rng.integers(2, 6), rng.integers(2, 11), rng.integers(2, 5)
            T = int(rng.integers(10, 31))
            params = random_net(1000 + trial, [D, H, K], scale=3.0)
            frames = random_frames(2000 + trial, T, D)
            label = int(rng.integers(K))
            learner = solsa_sequence(params, frames, label, adapt_kernels=False)
            gw, _, _ = bptt_gradients(unrolled_forward(params, frames, label), params)
            a = np.concatenate([g.ravel() for g in learner.grad_w])
            b = np.concatenate([g.ravel() for g in gw])
            if np.linalg.norm(a) and np.linalg.norm(b):
                cosines.append(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
        cosines = np.array(cosines)
        print(f"\nSOLSA/BPTT cosine over {len(cosines)} nets: min {cosines.min():.3f} "
              f"median {np.median(cosines):.3f} max {cosines.max():.3f}")
        assert len(cosines) >= 90
        assert (cosines > 0).all()


class TestApplyUpdate:
    def setup_method(self):
        self.params = random_net(0, [3, 4, 2])
        self.learner = LearnerState.zeros(self.params)
        rng = np.random.default_rng(1)
        for arrs in (self.learner.grad_w, self.learner.grad_alpha, self.learner.grad_beta,
                     self.learner.eligibility):
            for a in arrs:
                a[...] = rng.normal(size=a.shape)

    def test_zero_accumulators_no_change(self):
        learner = LearnerState.zeros(self.params)
        before = self.params.copy()
        apply_update(self.params, learner, 0.1, 0.1)
        for a, b in zip(before.layers, self.params.layers):
            np.testing.assert_array_equal(a.w, b.w)
            np.testing.assert_array_equal(a.alpha, b.alpha)

    def test_sgd_and_reset(self):
        before = self.params.copy()
        gw = [g.copy() for g in self.learner.grad_w]
        traces = [e.copy() for e in self.learner.eligibility]
        apply_update(self.params, self.learner, 0.01, 0.0)
        for l, lp in enumerate(self.params.layers):
            np.testing.assert_allclose(lp.w, before.layers[l].w - 0.01 * gw[l])
            np.testing.assert_array_equal(self.learner.eligibility[l], traces[l])
            assert not self.learner.grad_w[l].any()
        snapshot = self.params.copy()
        apply_update(self.params, self.learner, 0.01, 0.01)
        for a, b in zip(snapshot.layers, self.params.layers):
            np.testing.assert_array_equal(a.w, b.w)
            np.testing.assert_array_equal(a.beta, b.beta)

    def test_lr_w_zero_keeps_weights(self):
        before = self.params.copy()
        apply_update(self.params, self.learner, 0.0, 0.01)
        np.testing.assert_array_equal(before.layers[1].w, self.params.layers[1].w)
        assert not np.array_equal(before.layers[1].beta, self.params.layers[1].beta)
        # the input layer has no filters to adapt
        np.testing.assert_array_equal(before.layers[0].beta, self.params.layers[0].beta)

    def test_alpha_clamped(self):
        self.learner.grad_alpha[1][...] = -1e6
        apply_update(self.params, self.learner, 0.0, 1.0, alpha_max=0.95)
        assert self.params.layers[1].alpha.max() == 0.95
        self.learner.grad_alpha[1][...] = 1e6
        apply_update(self.params, self.learner, 0.0, 1.0)
        assert self.params.layers[1].alpha.min() == 0.0
