import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from lomit.errors import DimensionError, DomainError
from lomit.hadain import (
    EPS,
    AffineParams,
    adain,
    channel_stats,
    downsample_mask,
    hadain,
    split_by_mask,
)

torch.manual_seed(0)


def rand_image(b=2, c=3, h=8, w=8, dtype=torch.float64):
    return torch.rand(b, c, h, w, dtype=dtype) * 2 - 1


def rand_mask(b=2, h=8, w=8, dtype=torch.float64):
    return torch.rand(b, 1, h, w, dtype=dtype)


class TestSplitByMask:
    def test_identity_mask(self):
        x = rand_image()
        fg, bg = split_by_mask(x, torch.ones(2, 1, 8, 8, dtype=torch.float64))
        assert torch.equal(fg, x)
        assert torch.equal(bg, torch.zeros_like(x))

    def test_zero_mask(self):
        x = rand_image()
        fg, bg = split_by_mask(x, torch.zeros(2, 1, 8, 8, dtype=torch.float64))
        assert torch.equal(fg, torch.zeros_like(x))
        assert torch.equal(bg, x)

    def test_elementwise_example(self):
        x = torch.tensor([[2.0, 4.0], [6.0, 8.0]]).reshape(1, 1, 2, 2)
        m = torch.tensor([[1.0, 0.5], [0.0, 1.0]]).reshape(1, 1, 2, 2)
        fg, bg = split_by_mask(x, m)
        assert torch.equal(fg, torch.tensor([[2.0, 2.0], [0.0, 8.0]]).reshape(1, 1, 2, 2))
        assert torch.equal(bg, torch.tensor([[0.0, 2.0], [6.0, 0.0]]).reshape(1, 1, 2, 2))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_reconstruction(self, seed):
        gen = torch.Generator().manual_seed(seed)
        x = torch.rand(2, 3, 6, 6, dtype=torch.float64, generator=gen) * 2 - 1
        m = torch.rand(2, 1, 6, 6, dtype=torch.float64, generator=gen)
        fg, bg = split_by_mask(x, m)
        assert torch.allclose(fg + bg, x, atol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            split_by_mask(rand_image(h=8), rand_mask(h=4))

    def test_mask_out_of_range(self):
        m = rand_mask()
        m[0, 0, 0, 0] = 1.5
        with pytest.raises(DomainError):
            split_by_mask(rand_image(), m)


class TestChannelStats:
    def test_constant_channel(self):
        c = torch.full((1, 2, 4, 4), 5.0, dtype=torch.float64)
        mu, sigma = channel_stats(c)
        assert torch.allclose(mu, torch.full((1, 2), 5.0, dtype=torch.float64))
        assert torch.allclose(sigma, torch.full((1, 2), math.sqrt(EPS), dtype=torch.float64))

    def test_two_values(self):
        # population mean/std oracle by hand: values [1, 3] -> mu 2, var 1
        c = torch.tensor([1.0, 3.0], dtype=torch.float64).reshape(1, 1, 1, 2)
        mu, sigma = channel_stats(c)
        assert mu.item() == pytest.approx(2.0, abs=1e-12)
        assert sigma.item() == pytest.approx(math.sqrt(1.0 + EPS), abs=1e-12)

    def test_permutation_invariance(self):
        c = rand_image(b=1, c=2, h=4, w=4)
        flat = c.flatten(2)
        perm = flat[:, :, torch.randperm(16)]
        mu1, s1 = channel_stats(c)
        mu2, s2 = channel_stats(perm.reshape(1, 2, 4, 4))
        assert torch.allclose(mu1, mu2) and torch.allclose(s1, s2)

    def test_empty_spatial(self):
        with pytest.raises(DimensionError):
            channel_stats(torch.zeros(1, 2, 0, 4, dtype=torch.float64))


def unit_params(c):
    b, ch = c.shape[:2]
    return AffineParams(
        gamma=torch.ones(b, ch, dtype=c.dtype), beta=torch.zeros(b, ch, dtype=c.dtype)
    )


class TestAdain:
    def test_pure_normalization(self):
        c = rand_image(c=4)
        out = adain(c, unit_params(c))
        mu, sigma = out.mean(dim=(2, 3)), out.std(dim=(2, 3), unbiased=False)
        assert mu.abs().max() < 1e-4
        assert (sigma - 1).abs().max() < 1e-3

    def test_identity_params(self):
        c = rand_image(c=4)
        mu, sigma = channel_stats(c)
        out = adain(c, AffineParams(gamma=sigma, beta=mu))
        assert torch.allclose(out, c, atol=1e-4)

    def test_scalar_example(self):
        # AdaIN formula evaluated by hand for channel [1, 3], gamma 2, beta 5
        c = torch.tensor([1.0, 3.0], dtype=torch.float64).reshape(1, 1, 1, 2)
        params = AffineParams(
            gamma=torch.tensor([[2.0]], dtype=torch.float64),
            beta=torch.tensor([[5.0]], dtype=torch.float64),
        )
        out = adain(c, params)
        expected = torch.tensor(
            [2.0 * (1 - 2) / math.sqrt(1 + EPS) + 5, 2.0 * (3 - 2) / math.sqrt(1 + EPS) + 5],
            dtype=torch.float64,
        ).reshape(1, 1, 1, 2)
        assert torch.allclose(out, expected, atol=1e-12)
        assert torch.allclose(out, torch.tensor([[3.0, 7.0]]).reshape(1, 1, 1, 2).double(), atol=1e-4)

    def test_channel_mismatch(self):
        c = rand_image(c=4)
        bad = AffineParams(gamma=torch.ones(2, 3), beta=torch.zeros(2, 3))
        with pytest.raises(DimensionError):
            adain(c, bad)


def rand_affine(b, ch, gen=None, dtype=torch.float64):
    return AffineParams(
        gamma=torch.rand(b, ch, dtype=dtype, generator=gen) * 2 - 1,
        beta=torch.rand(b, ch, dtype=dtype, generator=gen) * 2 - 1,
    )


class TestHadain:
    def test_endpoints(self):
        c = rand_image(c=4)
        fg, bg = rand_affine(2, 4), rand_affine(2, 4)
        ones = torch.ones(2, 1, 8, 8, dtype=torch.float64)
        assert torch.allclose(hadain(ones, c, fg, bg), adain(c, fg), atol=1e-6)
        assert torch.allclose(hadain(0 * ones, c, fg, bg), adain(c, bg), atol=1e-6)

    def test_half_mask_is_mean(self):
        c = rand_image(c=4)
        fg, bg = rand_affine(2, 4), rand_affine(2, 4)
        half = torch.full((2, 1, 8, 8), 0.5, dtype=torch.float64)
        expected = 0.5 * (adain(c, fg) + adain(c, bg))
        assert torch.allclose(hadain(half, c, fg, bg), expected, atol=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_convexity(self, seed):
        gen = torch.Generator().manual_seed(seed)
        c = torch.rand(1, 3, 4, 4, dtype=torch.float64, generator=gen) * 2 - 1
        m = torch.rand(1, 1, 4, 4, dtype=torch.float64, generator=gen)
        fg, bg = rand_affine(1, 3, gen), rand_affine(1, 3, gen)
        a, b = adain(c, fg), adain(c, bg)
        out = hadain(m, c, fg, bg)
        lo = torch.minimum(a, b) - 1e-12
        hi = torch.maximum(a, b) + 1e-12
        assert ((out >= lo) & (out <= hi)).all()

    def test_resolution_mismatch(self):
        c = rand_image(c=4, h=4, w=4)
        with pytest.raises(DimensionError):
            hadain(rand_mask(h=8, w=8), c, rand_affine(2, 4), rand_affine(2, 4))

    def test_gradients_match_finite_differences(self):
        # torch.autograd.gradcheck compares analytic gradients against
        # central finite differences at double precision.
        c = rand_image(b=1, c=2, h=4, w=4).requires_grad_(True)
        m = rand_mask(b=1, h=4, w=4).requires_grad_(True)
        gamma_f = torch.rand(1, 2, dtype=torch.float64, requires_grad=True)
        beta_f = torch.rand(1, 2, dtype=torch.float64, requires_grad=True)
        gamma_b = torch.rand(1, 2, dtype=torch.float64, requires_grad=True)
        beta_b = torch.rand(1, 2, dtype=torch.float64, requires_grad=True)

        def fn(m_, c_, gf, bf, gb, bb):
            return hadain(m_, c_, AffineParams(gf, bf), AffineParams(gb, bb))

        assert torch.autograd.gradcheck(fn, (m, c, gamma_f, beta_f, gamma_b, beta_b), rtol=1e-3)


class TestDownsampleMask:
    def test_constant_masks(self):
        ones = torch.ones(1, 1, 64, 64)
        assert torch.equal(downsample_mask(ones, (16, 16)), torch.ones(1, 1, 16, 16))
        zeros = torch.zeros(1, 1, 64, 64)
        assert torch.equal(downsample_mask(zeros, (16, 16)), torch.zeros(1, 1, 16, 16))

    def test_block_mean(self):
        m = torch.tensor([[1.0, 1.0], [0.0, 0.0]]).reshape(1, 1, 2, 2)
        out = downsample_mask(m, (1, 1))
        assert out.item() == pytest.approx(0.5)

    def test_non_divisible(self):
        with pytest.raises(DimensionError):
            downsample_mask(torch.ones(1, 1, 64, 64), (15, 15))

    def test_range_preserved(self):
        m = rand_mask(h=16, w=16)
        out = downsample_mask(m, (4, 4))
        assert out.min() >= 0 and out.max() <= 1
