import numpy as np
import pytest
import torch

from haspn.dataio import generate_phantom
from haspn.frequency import (
    Decomposition,
    decompose,
    gaussian_blur,
    gaussian_kernel,
    laplacian,
    tensor_laplacian,
    usm_sharpen,
)


def reflect_index(i: int, n: int) -> int:
    """Mirror index without repeating the border pixel (matches np.pad 'reflect')."""
    while i < 0 or i >= n:
        if i < 0:
            i = -i
        if i >= n:
            i = 2 * (n - 1) - i
    return i


def blur_oracle(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Nested-loop direct correlation with reflected borders."""
    k = kernel.shape[0]
    half = k // 2
    h, w = image.shape
    out = np.zeros_like(image)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in range(-half, half + 1):
                for dx in range(-half, half + 1):
                    acc += kernel[dy + half, dx + half] * image[
                        reflect_index(y + dy, h), reflect_index(x + dx, w)
                    ]
            out[y, x] = acc
    return out


class TestGaussianKernel:
    def test_normalized(self):
        assert abs(gaussian_kernel(5, 1.5).sum() - 1.0) < 1e-12

    def test_center_weight_matches_formula(self):
        # independent evaluation of the normalized separable Gaussian
        offsets = np.arange(-2, 3, dtype=np.float64)
        profile = np.exp(-(offsets**2) / (2 * 1.5**2))
        profile /= profile.sum()
        expected = profile[2] ** 2
        assert abs(expected - 0.0853) < 1e-4  # sanity on the hand value
        assert gaussian_kernel(5, 1.5)[2, 2] == pytest.approx(expected, abs=1e-15)

    def test_symmetry(self):
        k = gaussian_kernel(7, 2.0)
        c = 3
        assert k[c + 1, c + 2] == k[c + 2, c + 1] == k[c - 1, c - 2]
        assert np.array_equal(k, np.flip(k, axis=0))
        assert np.array_equal(k, np.flip(k, axis=1))

    def test_positive_weights(self):
        assert (gaussian_kernel(5, 1.5) > 0).all()

    @pytest.mark.parametrize("size,sigma", [(4, 1.5), (2, 1.0), (5, 0.0), (5, -1.0)])
    def test_invalid_args(self, size, sigma):
        with pytest.raises(ValueError):
            gaussian_kernel(size, sigma)


class TestGaussianBlur:
    def test_constant_preserved(self):
        img = np.full((12, 9), 0.37)
        assert np.allclose(gaussian_blur(img), 0.37, atol=1e-15)

    def test_impulse_reproduces_kernel(self):
        img = np.zeros((9, 9))
        img[4, 4] = 1.0
        kernel = gaussian_kernel(5, 1.5)
        out = gaussian_blur(img, kernel)
        assert np.allclose(out[2:7, 2:7], kernel, atol=1e-15)
        assert np.allclose(out[0, :], 0.0)

    def test_matches_direct_correlation_oracle(self, rng):
        img = rng.random((16, 16))
        kernel = gaussian_kernel(5, 1.5)
        assert np.abs(gaussian_blur(img, kernel) - blur_oracle(img, kernel)).max() < 1e-6

    def test_range_never_grows(self, rng):
        img = rng.random((20, 16))
        out = gaussian_blur(img)
        assert out.min() >= img.min() - 1e-12
        assert out.max() <= img.max() + 1e-12

    def test_too_small_image(self):
        with pytest.raises(ValueError):
            gaussian_blur(np.zeros((4, 10)))


class TestDecompose:
    def test_constant_residual_zero(self):
        d = decompose(np.full((10, 10), 0.5))
        assert np.allclose(d.residual, 0.0, atol=1e-15)

    def test_reconstruction_within_one_ulp(self, rng):
        for img in (rng.random((17, 23)), generate_phantom(5, 48, 40)):
            d = decompose(img)
            diff = np.abs(d.blurred + d.residual - img)
            tol = np.spacing(np.maximum(np.abs(img), np.abs(d.blurred)))
            assert (diff <= tol).all()

    def test_step_edge_residual_peaks_at_edge(self):
        img = np.zeros((16, 16))
        img[:, 8:] = 1.0
        residual = decompose(img).residual
        oracle = img - blur_oracle(img, gaussian_kernel(5, 1.5))
        assert np.abs(residual - oracle).max() < 1e-12
        magnitude = np.abs(residual).mean(axis=0)
        assert magnitude[[7, 8]].min() > 0.1
        assert magnitude[[0, 1, 14, 15]].max() < 1e-12

    def test_linearity(self, rng):
        x = rng.random((14, 14))
        y = rng.random((14, 14))
        combined = decompose(2.0 * x + 3.0 * y).residual
        parts = 2.0 * decompose(x).residual + 3.0 * decompose(y).residual
        assert np.abs(combined - parts).max() < 1e-10

    def test_returns_decomposition(self):
        d = decompose(np.zeros((8, 8)))
        assert isinstance(d, Decomposition)
        assert d.shape == (8, 8)


class TestUsmSharpen:
    def test_k_zero_is_identity(self, rng):
        img = rng.random((10, 10))
        assert np.array_equal(usm_sharpen(img, 0.0), img)

    def test_k_one_algebra(self, rng):
        img = rng.random((10, 10))
        blurred = decompose(img).blurred
        assert np.allclose(usm_sharpen(img, 1.0), 2.0 * img - blurred, atol=1e-12)

    def test_constant_unchanged(self):
        img = np.full((8, 8), 0.25)
        assert np.allclose(usm_sharpen(img, 5.0), img, atol=1e-13)

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            usm_sharpen(np.zeros((8, 8)), -0.1)


class TestLaplacian:
    def test_affine_interior_zero(self):
        y, x = np.mgrid[0:10, 0:12]
        img = 0.3 * x + 0.7 * y + 0.1
        assert np.abs(laplacian(img)[1:-1, 1:-1]).max() < 1e-12

    def test_second_difference_arithmetic(self):
        # columns [1, 2, 4]: x-term at the center is 1 + 4 - 2*2 = 1,
        # y-term vanishes because rows are identical
        img = np.tile(np.array([1.0, 2.0, 4.0]), (3, 1))
        assert laplacian(img)[1, 1] == pytest.approx(1.0)

    def test_quadratic_interior_constant(self):
        _, x = np.mgrid[0:8, 0:8]
        img = (x**2).astype(np.float64)
        assert np.allclose(laplacian(img)[1:-1, 1:-1], 2.0, atol=1e-12)

    def test_constant_zero_including_borders(self):
        assert np.array_equal(laplacian(np.full((6, 7), 1.3)), np.zeros((6, 7)))

    def test_too_small(self):
        with pytest.raises(ValueError):
            laplacian(np.zeros((2, 5)))

    def test_tensor_variant_matches_numpy(self, rng):
        img = rng.random((9, 13))
        expected = laplacian(img)
        got = tensor_laplacian(torch.from_numpy(img)[None, None]).numpy()[0, 0]
        assert np.abs(got - expected).max() < 1e-12

    def test_tensor_variant_shape_check(self):
        with pytest.raises(ValueError):
            tensor_laplacian(torch.zeros(1, 1, 2, 8))
