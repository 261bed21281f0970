"""
Test suite for the SAIM scanner
"""

import numpy as np
import pytest
from numpy.lib.stride_tricks import sliding_window_view

from convssm_edges.saim import (
    GradientField,
    SaimWeights,
    ScanConfig,
    build_kernel_set,
    degenerate_kernel_set,
    effective_weights,
    extract_tile,
    flip_image,
    fuse_scans,
    kernel_set_from_dict,
    saim_step,
    scan_image,
    scan_with_flips,
    state_operator,
    unflip_field,
    valid_convolve,
    zero_pad,
)

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


def naive_correlate(image, kernel):
    rows, cols = image.shape
    out = np.zeros((rows - 2, cols - 2))
    for r in range(rows - 2):
        for c in range(cols - 2):
            out[r, c] = np.sum(image[r:r + 3, c:c + 3] * kernel)
    return out


class TestKernels:

    def test_published_kernels(self):
        kernels = build_kernel_set(v=1.3)

        assert kernels.b_x[0, 0] == pytest.approx(1.3 - 1.69)
        assert kernels.b_x[1, 1] == pytest.approx(2.6)
        assert kernels.b_x[1, 2] == -2.0
        np.testing.assert_array_equal(kernels.a_y, kernels.a_x.T)
        np.testing.assert_array_equal(kernels.b_y, kernels.b_x.T)
        np.testing.assert_array_equal(kernels.d_x, SOBEL_X)
        np.testing.assert_array_equal(kernels.c_x, kernels.d_x)
        np.testing.assert_array_equal(kernels.d_y, SOBEL_X.T)

    def test_degenerate_set_keeps_only_d(self):
        kernels = degenerate_kernel_set()

        for name in ('a_x', 'a_y', 'b_x', 'b_y', 'c_x', 'c_y'):
            assert not np.any(getattr(kernels, name))
        np.testing.assert_array_equal(kernels.d_x, SOBEL_X)
        assert kernels.variant == 'zero'

    def test_kernel_set_from_dict(self):
        assert kernel_set_from_dict({'v': 2.0}).v == 2.0
        assert kernel_set_from_dict({'variant': 'zero'}).variant == 'zero'
        with pytest.raises(ValueError):
            kernel_set_from_dict({'variant': 'learned'})

    def test_non_finite_v_rejected(self):
        with pytest.raises(ValueError):
            build_kernel_set(float('nan'))

    def test_family_rejects_unknown_axis(self):
        with pytest.raises(ValueError):
            build_kernel_set().family('z')


class TestConfig:

    def test_weights_range(self):
        SaimWeights(a=0.0, b=2.0, c=1.0, d=0.5)
        with pytest.raises(ValueError):
            SaimWeights(a=2.5)
        with pytest.raises(ValueError):
            SaimWeights(d=-0.1)

    def test_flips_normalized(self):
        config = ScanConfig(flips=('vertical', 'horizontal'))
        assert config.flips == ('horizontal', 'vertical')

    def test_flips_validated(self):
        with pytest.raises(ValueError):
            ScanConfig(flips=('diagonal',))
        with pytest.raises(ValueError):
            ScanConfig(flips=('horizontal', 'horizontal'))

    def test_border_and_fusion_validated(self):
        with pytest.raises(ValueError):
            ScanConfig(border_policy='wrap')
        with pytest.raises(ValueError):
            ScanConfig(fusion='median')

    def test_gradient_field_shapes_must_match(self):
        with pytest.raises(ValueError):
            GradientField(gx=np.zeros((3, 3)), gy=np.zeros((3, 4)))


class TestPrimitives:

    def test_zero_pad_centres(self):
        padded = zero_pad(np.ones((5, 5)), (7, 7))
        assert padded.shape == (7, 7)
        assert padded.sum() == 25
        assert padded[0].sum() == 0 and padded[:, -1].sum() == 0

    def test_zero_pad_rejects_odd_or_shrinking(self):
        with pytest.raises(ValueError):
            zero_pad(np.ones((5, 5)), (6, 7))
        with pytest.raises(ValueError):
            zero_pad(np.ones((5, 5)), (3, 3))

    def test_valid_convolve_matches_loops(self, rng):
        grid = rng.normal(size=(9, 11))
        kernel = rng.normal(size=(3, 3))

        np.testing.assert_allclose(valid_convolve(grid, kernel), naive_correlate(grid, kernel), atol=1e-12)

    def test_valid_convolve_batch(self, rng):
        batch = rng.normal(size=(4, 7, 7))
        out = valid_convolve(batch, SOBEL_X)

        assert out.shape == (4, 5, 5)
        np.testing.assert_allclose(out[2], valid_convolve(batch[2], SOBEL_X))

    def test_valid_convolve_rejects_small_input(self):
        with pytest.raises(ValueError):
            valid_convolve(np.ones((2, 5)), SOBEL_X)

    def test_extract_tile_bounds(self):
        image = np.arange(100.0).reshape(10, 10)
        tile = extract_tile(image, 5, 5)

        assert tile.shape == (7, 7)
        assert tile[3, 3] == image[5, 5]
        with pytest.raises(ValueError):
            extract_tile(image, 10, 0)

    def test_state_operator_matches_step(self, rng):
        a_k = build_kernel_set().a_x
        state = rng.normal(size=(5, 5))

        direct = valid_convolve(zero_pad(state, (7, 7)), a_k)
        via_matrix = (state_operator(a_k) @ state.ravel()).reshape(5, 5)
        np.testing.assert_allclose(via_matrix, direct, atol=1e-12)

    def test_saim_step_shapes(self, rng):
        kernels = build_kernel_set()
        y, state = saim_step(np.zeros((5, 5)), rng.normal(size=(7, 7)), SaimWeights(), kernels, 'x')

        assert isinstance(y, float)
        assert state.shape == (5, 5)
        with pytest.raises(ValueError):
            saim_step(np.zeros((4, 4)), np.zeros((7, 7)), SaimWeights(), kernels, 'x')


class TestStabilityGuard:

    def test_published_weights_are_scaled(self):
        config = ScanConfig()
        weights = effective_weights(config)

        assert weights.a < config.weights.a
        assert (weights.b, weights.c, weights.d) == (1.0, 0.8, 1.0)

        transition = weights.a * weights.c * state_operator(config.kernels.a_x)
        radius = np.max(np.abs(np.linalg.eigvals(transition)))
        assert radius == pytest.approx(0.9, rel=1e-9)

    def test_raw_recurrence_when_disabled(self):
        config = ScanConfig(state_radius=None)
        assert effective_weights(config) == config.weights

    def test_degenerate_kernels_untouched(self):
        config = ScanConfig(kernels=degenerate_kernel_set())
        assert effective_weights(config) == config.weights


class TestScanImage:

    def setup_method(self):
        self.config = ScanConfig()
        self.degenerate = ScanConfig(kernels=degenerate_kernel_set())

    def test_output_shape(self, rng):
        field = scan_image(rng.uniform(0, 255, size=(6, 9)), self.config)
        assert field.shape == (6, 9)

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            scan_image(np.zeros((4, 4, 3)), self.config)

    def test_matches_threaded_steps(self, rng):
        image = rng.uniform(0, 255, size=(7, 8))
        weights = effective_weights(self.config)
        field = scan_image(image, self.config)

        for axis, result in (('x', field.gx), ('y', field.gy)):
            state = np.zeros((5, 5))
            expected = np.zeros(image.shape)
            for r in range(image.shape[0]):
                for c in range(image.shape[1]):
                    tile = extract_tile(image, r, c, self.config.border_policy)
                    expected[r, c], state = saim_step(state, tile, weights, self.config.kernels, axis)

            scale = np.max(np.abs(expected))
            np.testing.assert_allclose(result, expected, atol=1e-9 * scale)

    def test_degenerates_to_sobel(self, rng):
        for _ in range(50):
            image = rng.uniform(0, 255, size=(64, 64))
            field = scan_image(image, self.degenerate)

            windows = sliding_window_view(image, (3, 3))
            sobel_x = np.einsum('ijkl,kl->ij', windows, SOBEL_X)
            sobel_y = np.einsum('ijkl,kl->ij', windows, SOBEL_X.T)

            assert np.max(np.abs(field.gx[1:-1, 1:-1] - sobel_x)) <= 1e-6
            assert np.max(np.abs(field.gy[1:-1, 1:-1] - sobel_y)) <= 1e-6

    def test_linear_and_additive(self, rng):
        for _ in range(20):
            first = rng.uniform(0, 255, size=(10, 10))
            second = rng.uniform(0, 255, size=(10, 10))
            alpha, beta = rng.uniform(-2, 2, size=2)

            combined = scan_image(alpha * first + beta * second, self.config)
            a_field = scan_image(first, self.config)
            b_field = scan_image(second, self.config)

            for got, part_a, part_b in ((combined.gx, a_field.gx, b_field.gx),
                                        (combined.gy, a_field.gy, b_field.gy)):
                expected = alpha * part_a + beta * part_b
                error = np.linalg.norm(got - expected) / np.linalg.norm(expected)
                assert error <= 1e-9

    @pytest.mark.parametrize("level", [0.0, 1.0, 57.0, 128.0, 255.0])
    def test_constant_image_null_response(self, level):
        field = scan_image(np.full((12, 12), level), self.config)

        assert np.max(np.abs(field.gx[3:-3, 3:-3])) <= 1e-9
        assert np.max(np.abs(field.gy[3:-3, 3:-3])) <= 1e-9

    def test_convolver_hook(self, rng):
        image = rng.uniform(0, 255, size=(6, 6))
        calls = []

        def convolver(grid, kernel):
            calls.append(kernel.shape)
            return valid_convolve(grid, kernel)

        hooked = scan_image(image, self.config, convolver=convolver, programmer=lambda k: k)
        plain = scan_image(image, self.config)

        assert len(calls) == 4
        np.testing.assert_allclose(hooked.gx, plain.gx)
        np.testing.assert_allclose(hooked.gy, plain.gy)


class TestFlips:

    def setup_method(self):
        self.config = ScanConfig(kernels=degenerate_kernel_set())

    @pytest.mark.parametrize("flip", ['horizontal', 'vertical'])
    def test_unflip_restores_equivariant_scan(self, rng, flip):
        image = rng.uniform(0, 255, size=(9, 12))
        base = scan_image(image, self.config)
        restored = unflip_field(scan_image(flip_image(image, flip), self.config), flip)

        np.testing.assert_allclose(restored.gx, base.gx, atol=1e-9)
        np.testing.assert_allclose(restored.gy, base.gy, atol=1e-9)

    def test_unknown_flip(self):
        with pytest.raises(ValueError):
            flip_image(np.zeros((3, 3)), 'diagonal')

    def test_max_magnitude_fusion(self):
        base = GradientField(gx=np.array([[1.0, 3.0]]), gy=np.array([[0.0, 0.0]]))
        other = GradientField(gx=np.array([[0.0, -3.0]]), gy=np.array([[2.0, 0.0]]))
        fused = fuse_scans(base, [('horizontal', other)], 'max_magnitude')

        np.testing.assert_array_equal(fused.gx, [[0.0, 3.0]])
        np.testing.assert_array_equal(fused.gy, [[2.0, 0.0]])

    def test_average_fusion(self):
        base = GradientField(gx=np.ones((2, 2)), gy=np.zeros((2, 2)))
        other = GradientField(gx=np.full((2, 2), 3.0), gy=np.full((2, 2), 2.0))
        fused = fuse_scans(base, [('vertical', other)], 'average')

        np.testing.assert_array_equal(fused.gx, np.full((2, 2), 2.0))
        np.testing.assert_array_equal(fused.gy, np.ones((2, 2)))

    def test_fusion_rejects_shape_mismatch(self):
        base = GradientField(gx=np.ones((2, 2)), gy=np.ones((2, 2)))
        other = GradientField(gx=np.ones((3, 2)), gy=np.ones((3, 2)))
        with pytest.raises(ValueError):
            fuse_scans(base, [('vertical', other)])

    def test_without_flips_equals_base_scan(self, rng):
        image = rng.uniform(0, 255, size=(6, 7))
        config = ScanConfig()

        np.testing.assert_array_equal(scan_with_flips(image, config).gx, scan_image(image, config).gx)

    def test_flipped_scans_never_lower_magnitude(self, rng):
        image = rng.uniform(0, 255, size=(6, 7))
        base = scan_image(image, ScanConfig())
        fused = scan_with_flips(image, ScanConfig(flips=('horizontal', 'vertical')))

        assert np.all(np.hypot(fused.gx, fused.gy) >= np.hypot(base.gx, base.gy) - 1e-9)


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
