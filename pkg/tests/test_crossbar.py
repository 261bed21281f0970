"""
Test suite for the crossbar simulator
"""

import numpy as np
import pytest

from convssm_edges.accelerator.crossbar import (
    CrossbarConfig,
    CrossbarSimulator,
    crossbar_convolve,
    map_to_conductances,
    map_to_voltages,
    noise_study,
    quantize_conductances,
    readout_error,
)
from convssm_edges.saim import build_kernel_set, valid_convolve


class TestMapping:

    def setup_method(self):
        self.ideal = CrossbarConfig(quantize=False)

    def test_voltages(self):
        np.testing.assert_allclose(map_to_voltages(np.array([0.0, 128.0, 255.0]), self.ideal), [0.0, 1.28, 2.55])

    def test_conductances_signed(self):
        kernel = np.array([[2.0, 0.0, -1.0]] * 3)
        g = map_to_conductances(kernel, self.ideal)

        assert g[0, 0] == pytest.approx(2e-4)
        assert g[0, 1] == 0.0
        assert g[0, 2] == pytest.approx(-1e-4)

    def test_gain(self):
        assert CrossbarConfig().gain == pytest.approx(-0.1)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            CrossbarConfig(p_v=0)
        with pytest.raises(ValueError):
            CrossbarConfig(samples_per_pulse=0)
        with pytest.raises(ValueError):
            CrossbarConfig(noise_level=-0.1)
        with pytest.raises(ValueError):
            CrossbarConfig(conductance_levels=2)


class TestQuantization:

    def test_zero_exact_and_grid_symmetric(self):
        g = np.array([-2.0, -0.7, 0.0, 0.31, 2.0])
        q = quantize_conductances(g, levels=5)
        np.testing.assert_array_equal(q, [-2.0, -1.0, 0.0, 0.0, 2.0])

    def test_error_bounded_by_half_step(self, rng):
        g = rng.uniform(-3, 3, size=100)
        q = quantize_conductances(g, levels=256)
        step = np.max(np.abs(g)) / 127
        assert np.max(np.abs(q - g)) <= step / 2 + 1e-12

    def test_all_zero(self):
        np.testing.assert_array_equal(quantize_conductances(np.zeros((3, 3)), 256), np.zeros((3, 3)))


class TestConvolve:

    def test_exact_without_noise_or_quantization(self, rng):
        cfg = CrossbarConfig(quantize=False)
        kernel = build_kernel_set().b_x
        for _ in range(100):
            x = rng.uniform(0, 255, size=(9, 12))
            y_volts, decoded = crossbar_convolve(x, kernel, cfg)
            expected = valid_convolve(x, kernel)

            np.testing.assert_allclose(decoded, expected, rtol=1e-12, atol=1e-12 * np.max(np.abs(expected)))
            np.testing.assert_allclose(y_volts, -cfg.r_k1 * 1e-6 * expected, rtol=1e-12,
                                       atol=1e-12 * np.max(np.abs(y_volts)))

    def test_superposition(self, rng):
        cfg = CrossbarConfig(quantize=False)
        kernel = rng.normal(size=(3, 3))
        x1, x2 = rng.uniform(0, 255, size=(2, 7, 7))

        _, both = crossbar_convolve(x1 + x2, kernel, cfg)
        _, first = crossbar_convolve(x1, kernel, cfg)
        _, second = crossbar_convolve(x2, kernel, cfg)
        np.testing.assert_allclose(both, first + second, rtol=1e-10, atol=1e-9)

    def test_zero_input_stays_zero_with_noise(self):
        cfg = CrossbarConfig(noise_level=0.3)
        _, decoded = crossbar_convolve(np.zeros((7, 7)), build_kernel_set().b_x, cfg)
        assert not decoded.any()

    def test_zero_sum_kernel_on_flat_tile(self):
        _, decoded = crossbar_convolve(np.ones((7, 7)), build_kernel_set().d_x, CrossbarConfig())
        np.testing.assert_allclose(decoded, 0.0, atol=1e-9)

    def test_seeded_noise_is_reproducible(self, rng):
        cfg = CrossbarConfig(noise_level=0.1, rng_seed=7)
        x = rng.uniform(0, 255, size=(8, 8))
        kernel = build_kernel_set().b_x

        _, first = crossbar_convolve(x, kernel, cfg)
        _, second = crossbar_convolve(x, kernel, cfg)
        np.testing.assert_array_equal(first, second)


class TestSimulator:

    def test_programmed_kernel_without_quantization(self):
        kernel = build_kernel_set().b_x
        sim = CrossbarSimulator(CrossbarConfig(quantize=False))
        np.testing.assert_allclose(sim.programmed_kernel(kernel), kernel, rtol=1e-12)

    def test_programmed_kernel_is_quantized(self):
        kernel = build_kernel_set().b_x
        realised = CrossbarSimulator(CrossbarConfig(conductance_levels=7)).programmed_kernel(kernel)
        assert not np.allclose(realised, kernel)
        assert np.max(np.abs(realised - kernel)) <= np.max(np.abs(kernel)) / 6

    def test_generator_advances_between_calls(self, rng):
        sim = CrossbarSimulator(CrossbarConfig(noise_level=0.2))
        x = rng.uniform(0, 255, size=(8, 8))
        kernel = build_kernel_set().b_x
        assert not np.array_equal(sim.convolve(x, kernel), sim.convolve(x, kernel))


class TestReadoutError:

    def test_needs_enough_trials(self):
        with pytest.raises(ValueError):
            readout_error(CrossbarConfig(), trials=50)

    def test_exact_without_noise(self):
        result = readout_error(CrossbarConfig(quantize=False), trials=100)
        assert result.max_rel_error < 1e-12

    def test_quantization_floor(self):
        result = readout_error(CrossbarConfig(), trials=200)
        assert 0 < result.mean_rel_error < 0.01

    @pytest.mark.slow
    def test_sampling_reduces_error(self):
        single = readout_error(CrossbarConfig(noise_level=0.3, samples_per_pulse=1), trials=10_000)
        averaged = readout_error(CrossbarConfig(noise_level=0.3, samples_per_pulse=144), trials=10_000)

        assert 0.10 < single.mean_rel_error < 0.20
        assert averaged.mean_rel_error < 0.025
        assert averaged.max_rel_error < single.max_rel_error

    @pytest.mark.slow
    def test_averaging_law(self):
        base = dict(noise_level=0.3, quantize=False)
        many = readout_error(CrossbarConfig(samples_per_pulse=64, **base), trials=10_000)
        few = readout_error(CrossbarConfig(samples_per_pulse=16, **base), trials=10_000)

        assert many.std_error / few.std_error == pytest.approx(0.5, rel=0.2)

    def test_noise_study_layout(self):
        rows = noise_study(CrossbarConfig(), noise_levels=[0.0, 0.1], samples=[1, 4], trials=100)

        assert len(rows) == 4
        assert [(r['noise_pct'], r['samples']) for r in rows] == [(0.0, 1), (10.0, 1), (0.0, 4), (10.0, 4)]
        assert set(rows[0]) == {'noise_pct', 'samples', 'mean_error_pct', 'max_error_pct', 'std_error_pct'}
        assert rows[1]['mean_error_pct'] > rows[0]['mean_error_pct']


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
