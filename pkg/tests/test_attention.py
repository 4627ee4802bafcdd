"""Recalibration forwards against hand-rolled references."""

import numpy as np
import pytest

from mfcal.attention import (
    dct_basis,
    fca_forward,
    fca_gates,
    gap,
    gsp,
    init_mono_params,
    init_multi_params,
    lowest_frequency_pairs,
    multi_forward,
    multi_membership,
    scse_forward,
    se_forward,
    sigmoid,
    srm_forward,
    srm_gates,
)
from mfcal.holder import NormState, ScaleSet

SCALES = ScaleSet((2, 3, 4))


def mono_fixture(channels, rng, norm_mode="frozen", use_bias=True):
    params = init_mono_params(channels, 2, rng=rng, norm_mode=norm_mode,
                              use_bias=use_bias)
    params.b1 = rng.normal(scale=0.3, size=params.b1.shape)
    params.b2 = rng.normal(scale=0.3, size=params.b2.shape)
    params.norm.gamma = rng.uniform(0.5, 1.5, channels)
    params.norm.beta = rng.uniform(-0.5, 0.5, channels)
    params.norm.running_mean = rng.uniform(-0.2, 0.2, channels)
    params.norm.running_var = rng.uniform(0.5, 1.5, channels)
    return params


class TestPooling:
    def test_gap_constant_channel(self):
        assert gap(np.full((3, 3, 1), 4.2))[0] == pytest.approx(4.2)

    def test_gap_two_pixels(self):
        stack = np.array([[[0.0]], [[2.0]]])  # 2 x 1 x 1
        assert gap(stack)[0] == 1.0

    def test_gap_equals_brute_force_mean(self):
        rng = np.random.default_rng(0)
        stack = rng.normal(size=(8, 8, 3))
        brute = np.array([stack[:, :, c].ravel().mean() for c in range(3)])
        assert np.array_equal(gap(stack), brute)

    def test_gsp_constant_channel_is_zero(self):
        assert gsp(np.full((4, 4, 1), 7.0))[0] == 0.0

    def test_gsp_two_pixels(self):
        stack = np.array([[[0.0]], [[2.0]]])
        assert gsp(stack)[0] == 1.0  # population convention

    def test_gsp_equals_brute_force_std(self):
        rng = np.random.default_rng(1)
        stack = rng.normal(size=(8, 8, 3))
        brute = np.array(
            [np.sqrt(((stack[:, :, c] - stack[:, :, c].mean()) ** 2).mean())
             for c in range(3)]
        )
        np.testing.assert_allclose(gsp(stack), brute, rtol=0, atol=1e-12)


class TestSeForward:
    def test_zero_logits_halve_the_stack(self):
        rng = np.random.default_rng(2)
        stack = rng.uniform(size=(4, 4, 4))
        params = init_mono_params(4, 2, rng=rng)
        params.w2[:] = 0.0
        gates, out = se_forward(stack, params, source="features")
        assert np.all(gates == 0.5)
        np.testing.assert_allclose(out, stack / 2.0, rtol=0, atol=0)

    def test_large_logits_saturate(self):
        rng = np.random.default_rng(3)
        stack = rng.uniform(size=(4, 4, 4))
        params = init_mono_params(4, 2, rng=rng)
        params.w2[:] = 0.0
        params.b2[:] = 50.0
        gates, out = se_forward(stack, params, source="features")
        assert np.all(gates > 1.0 - 1e-9)
        np.testing.assert_allclose(out, stack, rtol=1e-9)

    def test_matches_hand_rolled_two_layer_evaluation(self):
        rng = np.random.default_rng(4)
        stack = rng.uniform(size=(6, 6, 4))
        params = mono_fixture(4, rng)
        gates, out = se_forward(stack, params, source="features")
        z = np.array([stack[:, :, c].mean() for c in range(4)])
        hidden = np.maximum(params.w1 @ z + params.b1, 0.0)
        expected = 1.0 / (1.0 + np.exp(-(params.w2 @ hidden + params.b2)))
        np.testing.assert_allclose(gates, expected, rtol=0, atol=1e-12)
        np.testing.assert_allclose(out, stack * expected, rtol=0, atol=1e-12)

    def test_multiplicative_contract_is_exact(self):
        rng = np.random.default_rng(5)
        stack = rng.uniform(0.1, 1.0, size=(5, 5, 4))
        gates, out = se_forward(stack, mono_fixture(4, rng), source="alpha-map",
                                scales=SCALES)
        assert np.array_equal(out, stack * gates)
        assert np.all((gates > 0.0) & (gates < 1.0))

    def test_gate_argmax_is_scale_invariant_on_the_exponent_path(self):
        rng = np.random.default_rng(6)
        stack = rng.uniform(0.5, 1.5, size=(8, 8, 6))
        params = mono_fixture(6, rng)
        gates, _ = se_forward(stack, params, source="alpha-map", scales=SCALES,
                              epsilon=0.0)
        scaled, _ = se_forward(211.7 * stack, params, source="alpha-map",
                               scales=SCALES, epsilon=0.0)
        assert np.argmax(gates) == np.argmax(scaled)
        np.testing.assert_allclose(gates, scaled, rtol=0, atol=1e-9)

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(7)
        with pytest.raises(ValueError, match="channel"):
            se_forward(np.ones((4, 4, 3)), init_mono_params(4, 2, rng=rng))

    def test_unknown_source_rejected(self):
        rng = np.random.default_rng(8)
        with pytest.raises(ValueError, match="source"):
            se_forward(np.ones((4, 4, 4)), init_mono_params(4, 2, rng=rng),
                       source="wavelet")


class TestScse:
    def test_zero_spatial_weights_give_half_gate(self):
        rng = np.random.default_rng(9)
        stack = rng.uniform(size=(4, 4, 4))
        params = mono_fixture(4, rng)
        out = scse_forward(stack, params, np.zeros(4))
        _, channel_branch = se_forward(stack, params, source="features")
        np.testing.assert_allclose(out, np.maximum(channel_branch, stack / 2.0),
                                   rtol=0, atol=0)

    def test_identical_branches_are_idempotent(self):
        rng = np.random.default_rng(10)
        stack = rng.uniform(size=(3, 3, 2))
        params = init_mono_params(2, 1, rng=rng)
        params.w1[:] = 0.0
        params.w2[:] = 0.0
        params.b2[:] = 0.0  # channel gates = 0.5 everywhere
        out = scse_forward(stack, params, np.zeros(2))
        np.testing.assert_allclose(out, stack / 2.0, rtol=0, atol=0)

    def test_matches_brute_force_maxout(self):
        rng = np.random.default_rng(11)
        stack = rng.uniform(size=(5, 5, 4))
        params = mono_fixture(4, rng)
        weights = rng.normal(size=4)
        bias = 0.3
        out = scse_forward(stack, params, weights, bias)
        gates, channel_branch = se_forward(stack, params, source="features")
        spatial = sigmoid(stack @ weights + bias)[:, :, None]
        np.testing.assert_allclose(out, np.maximum(channel_branch, stack * spatial),
                                   rtol=0, atol=1e-12)


class TestSrm:
    def test_zero_std_weight_reduces_to_mean_gate(self):
        rng = np.random.default_rng(12)
        stack = rng.uniform(size=(6, 6, 3))
        w_mean = rng.normal(size=3)
        norm = NormState.identity(3, mode="frozen")
        gates = srm_gates(stack, w_mean, np.zeros(3), norm)
        expected = sigmoid((w_mean * gap(stack)) / np.sqrt(1.0 + 1e-5))
        np.testing.assert_allclose(gates, expected, rtol=0, atol=1e-12)

    def test_constant_stack_kills_the_std_term(self):
        stack = np.full((4, 4, 2), 3.0)
        norm = NormState.identity(2, mode="frozen")
        with_std = srm_gates(stack, np.ones(2), np.full(2, 5.0), norm)
        without = srm_gates(stack, np.ones(2), np.zeros(2), norm)
        np.testing.assert_allclose(with_std, without, rtol=0, atol=0)

    def test_matches_hand_rolled_evaluation(self):
        rng = np.random.default_rng(13)
        stack = rng.uniform(size=(7, 5, 3))
        w_mean, w_std = rng.normal(size=3), rng.normal(size=3)
        norm = NormState.identity(3, mode="frozen")
        norm.gamma = rng.uniform(0.5, 1.5, 3)
        norm.beta = rng.normal(size=3)
        norm.running_mean = rng.normal(size=3) * 0.1
        norm.running_var = rng.uniform(0.5, 1.5, 3)
        out = srm_forward(stack, w_mean, w_std, norm)
        t = w_mean * gap(stack) + w_std * gsp(stack)
        normed = (t - norm.running_mean) / np.sqrt(norm.running_var + 1e-5)
        expected_gates = sigmoid(norm.gamma * normed + norm.beta)
        np.testing.assert_allclose(out, stack * expected_gates, rtol=0, atol=1e-12)


class TestDctBasis:
    def test_zero_frequency_is_all_ones(self):
        assert np.array_equal(dct_basis(8, 8, 0, 0), np.ones((8, 8)))

    def test_distinct_pairs_are_orthogonal(self):
        pairs = lowest_frequency_pairs(6, 8, 8)
        fields = [dct_basis(8, 8, i, j).ravel() for i, j in pairs]
        for a in range(len(fields)):
            for b in range(a + 1, len(fields)):
                assert abs(fields[a] @ fields[b]) < 1e-9

    def test_zero_frequency_squeeze_equals_hw_gap(self):
        rng = np.random.default_rng(14)
        stack = rng.uniform(size=(8, 8, 4))
        basis = dct_basis(8, 8, 0, 0)
        squeeze = np.array([(stack[:, :, c] * basis).sum() for c in range(4)])
        assert np.array_equal(squeeze, 8 * 8 * gap(stack))

    def test_out_of_range_frequency_rejected(self):
        with pytest.raises(ValueError, match="frequency"):
            dct_basis(4, 4, 4, 0)
        with pytest.raises(ValueError, match="frequency"):
            dct_basis(4, 4, 0, -1)

    def test_lowest_pairs_start_at_dc(self):
        pairs = lowest_frequency_pairs(16, 224, 224)
        assert pairs[0] == (0, 0)
        assert len(set(pairs)) == 16


class TestFca:
    def test_all_zero_frequencies_reduce_to_scaled_se(self):
        rng = np.random.default_rng(15)
        stack = rng.uniform(size=(8, 8, 4))
        params = mono_fixture(4, rng)
        gates = fca_gates(stack, params, freq_pairs=[(0, 0)])
        se_gates, _ = se_forward(8 * 8 * stack, params, source="features")
        np.testing.assert_allclose(gates, se_gates, rtol=0, atol=1e-12)

    def test_matches_brute_force_double_sum(self):
        rng = np.random.default_rng(16)
        stack = rng.uniform(size=(8, 8, 8))
        params = mono_fixture(8, rng)
        pairs = [(0, 0), (0, 1), (1, 0), (1, 1)]
        out = fca_forward(stack, params, freq_pairs=pairs)
        z = np.zeros(8)
        for g, (i, j) in enumerate(pairs):
            basis = dct_basis(8, 8, i, j)
            for c in range(2 * g, 2 * g + 2):
                acc = 0.0
                for h in range(8):
                    for w in range(8):
                        acc += stack[h, w, c] * basis[h, w]
                z[c] = acc
        hidden = np.maximum(params.w1 @ z + params.b1, 0.0)
        gates = sigmoid(params.w2 @ hidden + params.b2)
        np.testing.assert_allclose(out, stack * gates, rtol=0, atol=1e-9)

    def test_indivisible_grouping_rejected(self):
        rng = np.random.default_rng(17)
        with pytest.raises(ValueError, match="divisible"):
            fca_forward(np.ones((8, 8, 8)), init_mono_params(8, 2, rng=rng),
                        freq_pairs=[(0, 0), (0, 1), (1, 0)])


class TestMultiMembership:
    def test_single_level_set_is_constant_one(self):
        params = init_multi_params(1, 0.0, 4.0)
        member = multi_membership(np.random.default_rng(18).normal(size=(3, 3, 2)),
                                  params)
        assert np.all(member == 1.0)

    def test_dominant_logit_saturates(self):
        params = init_multi_params(2, 0.0, 100.0)
        member = multi_membership(np.zeros((2, 2, 1)), params)
        np.testing.assert_allclose(member[..., 0], 1.0, atol=1e-12)

    def test_memberships_sum_to_one(self):
        rng = np.random.default_rng(19)
        params = init_multi_params(16, 1.0, 3.0)
        params.sharpness = rng.uniform(0.5, 2.0, 16)
        member = multi_membership(rng.normal(2.0, 0.5, (8, 8, 8)), params)
        np.testing.assert_allclose(member.sum(axis=-1), 1.0, rtol=0, atol=1e-12)

    def test_shift_invariance_of_the_softmax(self):
        # the stabilized implementation must equal the plain exponential form
        rng = np.random.default_rng(20)
        params = init_multi_params(4, 0.0, 3.0)
        params.sharpness = rng.uniform(0.5, 2.0, 4)
        alpha = rng.normal(1.5, 0.5, (4, 4, 2))
        member = multi_membership(alpha, params)
        logits = -params.sharpness * (alpha[..., None] - params.centers) ** 2
        plain = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)
        np.testing.assert_allclose(member, plain, rtol=0, atol=1e-12)


class TestMultiForward:
    def test_dead_rectifier_adds_one_half(self):
        rng = np.random.default_rng(21)
        stack = rng.uniform(size=(4, 4, 3))
        alpha = rng.normal(2.0, 0.3, (4, 4, 3))
        params = init_multi_params(4, 1.0, 3.0)
        params.norm.beta = np.full(4, -50.0)  # every normalized membership < 0
        gate, out = multi_forward(stack, alpha, params)
        assert np.all(gate == 0.5)
        np.testing.assert_allclose(out, stack + 0.5, rtol=0, atol=0)

    def test_single_level_set_standardizes_to_half(self):
        rng = np.random.default_rng(22)
        stack = rng.uniform(size=(4, 4, 3))
        alpha = rng.normal(2.0, 0.3, (4, 4, 3))
        gate, out = multi_forward(stack, alpha, init_multi_params(1, 1.0, 3.0))
        assert np.all(gate == 0.5)
        np.testing.assert_allclose(out, stack + 0.5, rtol=0, atol=0)

    def test_additive_contract_is_exact(self):
        rng = np.random.default_rng(23)
        stack = rng.uniform(size=(6, 6, 4))
        alpha = rng.normal(2.0, 0.4, (6, 6, 4))
        params = init_multi_params(8, float(alpha.min()), float(alpha.max()))
        params.sharpness = rng.uniform(0.5, 2.0, 8)
        gate, out = multi_forward(stack, alpha, params)
        assert np.array_equal(out, stack + gate)
        assert np.all((gate > 0.0) & (gate < 1.0))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            multi_forward(np.ones((4, 4, 2)), np.ones((4, 4, 3)),
                          init_multi_params(2, 0.0, 1.0))


class TestInit:
    def test_mono_init_is_deterministic_and_fan_bounded(self):
        a = init_mono_params(8, 2, rng=42)
        b = init_mono_params(8, 2, rng=42)
        assert np.array_equal(a.w1, b.w1) and np.array_equal(a.w2, b.w2)
        bound = np.sqrt(6.0 / (8 + 4))
        assert np.abs(a.w1).max() <= bound
        assert np.all(a.b1 == 0.0) and np.all(a.b2 == 0.0)
        assert a.w1.shape == (4, 8) and a.w2.shape == (8, 4)

    def test_multi_init_spans_the_calibration_range(self):
        params = init_multi_params(4, 1.0, 3.0)
        np.testing.assert_allclose(params.centers, [1.0, 5 / 3, 7 / 3, 3.0])
        assert np.all(params.sharpness == 1.0)

    def test_multi_init_validates(self):
        with pytest.raises(ValueError):
            init_multi_params(0, 0.0, 1.0)
        with pytest.raises(ValueError):
            init_multi_params(2, 2.0, 1.0)
