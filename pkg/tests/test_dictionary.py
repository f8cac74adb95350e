"""Tests for softplus, the modulation network, basis synthesis, and mixing."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdict.dataset import make_time_grid
from specdict.dictionary import (
    ModulationNetwork,
    SpectralDictionary,
    basis_with_cache,
    reconstruct,
    sigmoid,
    softplus,
    softplus_inverse,
    synthesize_basis,
)
from tests.conftest import tiny_dictionary, zero_modnet_dictionary

AMP_ONE = softplus_inverse(1.0)  # ln(e - 1): softplus of this is exactly 1


class TestSoftplus:
    def test_at_zero(self):
        assert softplus(0.0) == pytest.approx(math.log(2.0), rel=1e-15)

    def test_large_argument_asymptote(self):
        assert softplus(40.0) == pytest.approx(40.0, rel=1e-15)

    def test_negative_tail(self):
        # independent evaluation of log1p(exp(-20))
        assert softplus(-20.0) == pytest.approx(math.log1p(math.exp(-20.0)), rel=1e-12)
        assert softplus(-20.0) == pytest.approx(2.0611536e-9, rel=1e-6)

    def test_no_overflow(self):
        assert np.isfinite(softplus(1e4))
        assert softplus(-800.0) == 0.0  # underflows cleanly, not NaN

    @given(st.floats(min_value=-600, max_value=600))
    @settings(max_examples=200, deadline=None)
    def test_positive_and_monotone_vs_sigmoid(self, x):
        assert softplus(x) >= 0.0
        # derivative is sigmoid: check a secant against it
        h = 1e-6
        secant = (softplus(x + h) - softplus(x - h)) / (2 * h)
        assert secant == pytest.approx(sigmoid(x), abs=1e-5)

    def test_inverse_round_trip(self):
        y = np.array([1e-8, 0.1, 1.0, 30.0, 768.0])
        np.testing.assert_allclose(softplus(softplus_inverse(y)), y, rtol=1e-12)

    def test_inverse_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            softplus_inverse(0.0)


class TestModulationNetwork:
    def test_zero_network_outputs_zero(self):
        net = ModulationNetwork.zeros(n_atoms=4, hidden_width=3)
        for t in [0.0, 0.3, 1.0]:
            da, df, dphi = net.modulate(t)
            assert not da.any() and not df.any() and not dphi.any()

    def test_bias_passthrough(self):
        k, h = 2, 3
        bias = np.array([1.0, -2.0, 0.5, 3.0, -0.25, 4.0])
        net = ModulationNetwork(
            input_weights=np.ones(h),
            input_bias=np.zeros(h),
            output_weights=np.zeros((3 * k, h)),
            output_bias=bias,
        )
        for t in [0.0, 0.7]:
            da, df, dphi = net.modulate(t)
            np.testing.assert_array_equal(da, bias[:k])
            np.testing.assert_array_equal(df, bias[k : 2 * k])
            np.testing.assert_array_equal(dphi, bias[2 * k :])

    def test_hand_computed_forward_pass(self):
        # H=2, K=1, checked against scalar arithmetic
        net = ModulationNetwork(
            input_weights=np.array([0.3, -0.2]),
            input_bias=np.array([0.1, 0.4]),
            output_weights=np.array([[0.5, -1.0], [0.25, 0.75], [-0.6, 0.2]]),
            output_bias=np.array([0.05, -0.1, 0.2]),
        )
        t = 0.7
        h0 = math.tanh(0.3 * t + 0.1)
        h1 = math.tanh(-0.2 * t + 0.4)
        da, df, dphi = net.modulate(t)
        assert da[0] == pytest.approx(0.5 * h0 - 1.0 * h1 + 0.05, rel=1e-14)
        assert df[0] == pytest.approx(0.25 * h0 + 0.75 * h1 - 0.1, rel=1e-14)
        assert dphi[0] == pytest.approx(-0.6 * h0 + 0.2 * h1 + 0.2, rel=1e-14)

    def test_output_dimension_must_be_multiple_of_three(self):
        with pytest.raises(ValueError):
            ModulationNetwork(
                input_weights=np.zeros(2),
                input_bias=np.zeros(2),
                output_weights=np.zeros((4, 2)),
                output_bias=np.zeros(4),
            )


class TestSynthesizeBasis:
    def test_unit_sine(self):
        # amplitude 1, frequency 1, phase 0 -> sin(2 pi t)
        d = zero_modnet_dictionary([AMP_ONE], [AMP_ONE], [0.0])
        grid = make_time_grid(5)
        s = synthesize_basis(d, grid)
        assert s.shape == (5, 1)
        assert s[1, 0] == pytest.approx(1.0, abs=1e-12)  # t = 0.25
        assert s[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_phase_offset(self):
        d = zero_modnet_dictionary([AMP_ONE], [AMP_ONE], [math.pi / 2])
        s = synthesize_basis(d, make_time_grid(4))
        assert s[0, 0] == pytest.approx(1.0, abs=1e-12)  # sin(pi/2)

    def test_matches_closed_form_with_zero_modnet(self, rng):
        k = 4
        amp0 = rng.normal(size=k)
        freq0 = rng.normal(size=k)
        phase0 = rng.uniform(0, 2 * math.pi, size=k)
        d = zero_modnet_dictionary(amp0, freq0, phase0)
        t = rng.uniform(0, 1, size=10)
        s = synthesize_basis(d, np.sort(t))
        expected = softplus(amp0)[None, :] * np.sin(
            2 * math.pi * softplus(freq0)[None, :] * np.sort(t)[:, None] + phase0
        )
        np.testing.assert_allclose(s, expected, rtol=1e-12, atol=1e-14)

    def test_cache_matches_light_path(self, rng):
        d = tiny_dictionary(n_atoms=5, hidden_width=3, randomize_output=True)
        grid = make_time_grid(30)
        np.testing.assert_array_equal(basis_with_cache(d, grid).basis, synthesize_basis(d, grid))

    def test_amplitude_bound(self):
        rng = np.random.default_rng(99)
        for trial in range(50):
            d = tiny_dictionary(n_atoms=4, hidden_width=3, seed=trial, randomize_output=True)
            grid = rng.uniform(0, 1, size=20)
            cache = basis_with_cache(d, np.sort(grid))
            assert np.all(np.abs(cache.basis) <= cache.amplitude + 1e-15)
            assert np.all(cache.amplitude > 0)


class TestReconstruct:
    def test_zero_weights(self):
        s = np.arange(12.0).reshape(4, 3)
        np.testing.assert_array_equal(reconstruct(s, np.zeros(3)), np.zeros(4))

    def test_one_hot_selects_column(self, rng):
        s = rng.normal(size=(6, 4))
        for i in range(4):
            e = np.zeros(4)
            e[i] = 1.0
            np.testing.assert_array_equal(reconstruct(s, e), s[:, i])

    def test_matches_naive_triple_sum(self, rng):
        s = rng.normal(size=(4, 3))
        w = rng.normal(size=3)
        expected = np.zeros(4)
        for j in range(4):
            for i in range(3):
                expected[j] += s[j, i] * w[i]
        np.testing.assert_allclose(reconstruct(s, w), expected, rtol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            reconstruct(np.zeros((4, 3)), np.zeros(5))

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_linearity(self, seed):
        r = np.random.default_rng(seed)
        s = r.normal(size=(8, 5))
        w1, w2 = r.normal(size=5), r.normal(size=5)
        a, b = r.normal(), r.normal()
        left = reconstruct(s, a * w1 + b * w2)
        right = a * reconstruct(s, w1) + b * reconstruct(s, w2)
        scale = max(1.0, np.abs(right).max())
        assert np.abs(left - right).max() / scale < 1e-12


def test_effective_positivity_thousand_draws():
    rng = np.random.default_rng(7)
    from specdict.dictionary import softplus as sp

    count = 0
    for trial in range(100):
        d = tiny_dictionary(n_atoms=2, hidden_width=2, seed=trial, randomize_output=True)
        t = rng.uniform(0, 1, size=10)
        da, df, _ = d.modnet.modulate_grid(np.sort(t))
        amp = sp(d.base_amplitude[None, :] + da)
        freq = sp(d.base_frequency[None, :] + df)
        assert np.all(amp > 0) and np.all(freq > 0)
        count += amp.size
    assert count >= 1000


def test_initialize_frequency_sweep():
    d = SpectralDictionary.initialize(8, 4, 3072, np.random.default_rng(0))
    freqs = softplus(d.base_frequency)
    assert freqs[0] == pytest.approx(1.0, rel=1e-9)
    assert freqs[-1] == pytest.approx(3072 / 4, rel=1e-9)
    assert np.all(np.diff(freqs) > 0)
    # warm start: modulations identically zero
    da, df, dphi = d.modnet.modulate(0.37)
    assert not da.any() and not df.any() and not dphi.any()
    amps = softplus(d.base_amplitude)
    np.testing.assert_allclose(amps, 0.1, rtol=1e-9)
