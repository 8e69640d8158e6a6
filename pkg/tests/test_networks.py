import pytest
import torch

from lomit.errors import DimensionError, DomainError
from lomit.networks import LOMITModel, NetConfig


@pytest.fixture(scope="module")
def model():
    torch.manual_seed(0)
    return LOMITModel(NetConfig(resolution=64, base_channels=8)).eval()


@pytest.fixture(scope="module")
def images():
    gen = torch.Generator().manual_seed(1)
    return torch.rand(2, 3, 64, 64, generator=gen) * 2 - 1


class TestEncodeContent:
    def test_shape_contract(self, model, images):
        c = model.encode_content(images)
        cfg = model.cfg
        assert c.shape == (2, cfg.content_channels, 16, 16)

    def test_determinism(self, model, images):
        assert torch.equal(model.encode_content(images), model.encode_content(images))

    def test_batch_independence(self, model, images):
        # instance-norm layers make each sample independent of its batch
        batched = model.encode_content(images)
        singles = torch.cat([model.encode_content(images[i : i + 1]) for i in range(2)])
        assert torch.allclose(batched, singles, atol=1e-5)

    def test_indivisible_resolution(self, model):
        with pytest.raises(DimensionError):
            model.encode_content(torch.rand(1, 3, 63, 63))


class TestEncodeStyle:
    def test_length(self, model, images):
        s = model.encode_style(images)
        assert s.shape == (2, model.cfg.style_dim)

    def test_determinism(self, model, images):
        assert torch.equal(model.encode_style(images), model.encode_style(images))

    def test_all_zero_image(self, model):
        s = model.encode_style(torch.zeros(1, 3, 64, 64))
        assert torch.isfinite(s).all()


class TestExtractMask:
    def test_range_and_shape(self, model, images):
        m = model.extract_mask(images)
        assert m.shape == (2, 1, 64, 64)
        assert m.min() >= 0 and m.max() <= 1

    def test_determinism(self, model, images):
        assert torch.equal(model.extract_mask(images), model.extract_mask(images))

    def test_range_many_random_inputs(self, model):
        gen = torch.Generator().manual_seed(3)
        for _ in range(20):
            x = torch.rand(8, 3, 64, 64, generator=gen) * 2 - 1
            m = model.extract_mask(x)
            assert m.min() >= 0 and m.max() <= 1


class TestAffineHeads:
    def test_shapes(self, model):
        s = torch.randn(2, model.cfg.style_dim)
        fg, bg = model.affine_heads(s, s)
        cc = model.cfg.content_channels
        assert fg.gamma.shape == (2, cc) and fg.beta.shape == (2, cc)
        assert bg.gamma.shape == (2, cc) and bg.beta.shape == (2, cc)

    def test_heads_not_weight_tied(self, model):
        fg_ids = {id(p) for p in model.mlp_f.parameters()}
        bg_ids = {id(p) for p in model.mlp_b.parameters()}
        assert fg_ids.isdisjoint(bg_ids)
        s = torch.randn(2, model.cfg.style_dim)
        fg, bg = model.affine_heads(s, s)
        assert not torch.allclose(fg.gamma, bg.gamma)

    def test_parameter_separation(self):
        torch.manual_seed(0)
        m = LOMITModel(NetConfig(base_channels=8)).eval()
        s = torch.randn(1, m.cfg.style_dim)
        fg0, bg0 = m.affine_heads(s, s)
        with torch.no_grad():
            for p in m.mlp_f.parameters():
                p.add_(1.0)
        fg1, bg1 = m.affine_heads(s, s)
        assert not torch.allclose(fg0.gamma, fg1.gamma)
        assert torch.equal(bg0.gamma, bg1.gamma) and torch.equal(bg0.beta, bg1.beta)

    def test_length_mismatch(self, model):
        with pytest.raises(DimensionError):
            model.affine_heads(torch.randn(1, 3), torch.randn(1, 3))


class TestDecode:
    def test_shape_and_range(self, model):
        h = torch.randn(2, model.cfg.content_channels, 16, 16)
        out = model.decode(h)
        assert out.shape == (2, 3, 64, 64)
        assert out.min() >= -1 and out.max() <= 1

    def test_determinism(self, model):
        h = torch.randn(1, model.cfg.content_channels, 16, 16)
        assert torch.equal(model.decode(h), model.decode(h))

    def test_bad_channels(self, model):
        with pytest.raises(DimensionError):
            model.decode(torch.randn(1, 7, 16, 16))


class TestCriticize:
    def test_shapes(self, model, images):
        realness, logits = model.criticize(images)
        assert realness.shape == (2,)
        assert logits.shape == (2, model.cfg.num_attrs)

    def test_determinism(self, model, images):
        r1, l1 = model.criticize(images)
        r2, l2 = model.criticize(images)
        assert torch.equal(r1, r2) and torch.equal(l1, l2)

    def test_boundary_inputs(self, model):
        for fill in (-1.0, 1.0):
            r, l = model.criticize(torch.full((1, 3, 64, 64), fill))
            assert torch.isfinite(r).all() and torch.isfinite(l).all()


class TestTranslate:
    def test_shapes(self, model, images):
        res = model.translate(images, images.flip(0))
        assert res.output.shape == (2, 3, 64, 64)
        assert res.input_mask.shape == (2, 1, 64, 64)
        assert res.exemplar_mask.shape == (2, 1, 64, 64)

    @pytest.mark.parametrize("fill,branch", [(1.0, "adain_fg"), (0.0, "adain_bg")])
    def test_endpoint_propagation(self, model, images, fill, branch):
        override = torch.full((2, 1, 64, 64), fill)
        res = model.translate(images, images.flip(0), m1_override=override)
        assert torch.allclose(res.intermediates["h"], res.intermediates[branch], atol=1e-5)

    def test_override_echoed(self, model, images):
        override = torch.rand(2, 1, 64, 64)
        res = model.translate(images, images.flip(0), m1_override=override, m2_override=override)
        assert torch.equal(res.input_mask, override)
        assert torch.equal(res.exemplar_mask, override)

    def test_resolution_mismatch(self, model, images):
        with pytest.raises(DimensionError):
            model.translate(images, torch.rand(2, 3, 32, 32))

    def test_invalid_override_range(self, model, images):
        bad = torch.full((2, 1, 64, 64), 1.5)
        with pytest.raises(DomainError):
            model.translate(images, images.flip(0), m1_override=bad)

    def test_gradient_flow_to_every_group(self, images):
        torch.manual_seed(0)
        m = LOMITModel(NetConfig(base_channels=8))
        res = m.translate(images, images.flip(0))
        res.output.sum().backward()
        for name, module in [
            ("e_c", m.e_c), ("e_s", m.e_s), ("g_m", m.g_m),
            ("g", m.g), ("mlp_f", m.mlp_f), ("mlp_b", m.mlp_b),
        ]:
            norm = sum(
                p.grad.norm().item() for p in module.parameters() if p.grad is not None
            )
            assert norm > 0, f"no gradient reached parameter group {name}"
