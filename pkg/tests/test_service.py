import base64
import io

import numpy as np
import pytest
import torch
from fastapi.testclient import TestClient
from PIL import Image

from lomit.data import SyntheticConfig
from lomit.service import (
    create_app,
    image_to_tensor,
    mask_to_tensor,
    tensor_to_image,
    tensor_to_mask,
)
from lomit.training import TrainConfig, train

RES = 16


@pytest.fixture(scope="module")
def checkpoint_path(tmp_path_factory):
    cfg = TrainConfig(
        resolution=RES,
        batch_size=2,
        iterations=0,
        base_channels=4,
        seed=5,
        synthetic=SyntheticConfig(count=4, resolution=RES, seed=5),
    )
    out = tmp_path_factory.mktemp("ckpt")
    return train(cfg, out)


@pytest.fixture(scope="module")
def client(checkpoint_path):
    app = create_app({"default": checkpoint_path})
    return TestClient(app)


def png_b64(arr: np.ndarray, mode: str) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def b64_to_array(b64: str, mode: str) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(base64.b64decode(b64))).convert(mode))


def rgb(seed: int, size: int = RES) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)


class TestCodecs:
    def test_image_round_trip(self):
        arr = rgb(0)
        assert np.array_equal(tensor_to_image(image_to_tensor(arr)), arr)

    def test_mask_scaling(self):
        arr = np.array([[0, 128, 255]], dtype=np.uint8)
        t = mask_to_tensor(arr)
        assert t.shape == (1, 1, 1, 3)
        assert t[0, 0, 0, 2] == 1.0 and t[0, 0, 0, 0] == 0.0
        assert np.array_equal(tensor_to_mask(t), arr)

    def test_quantization_bound(self):
        t = torch.rand(1, 1, 8, 8, generator=torch.Generator().manual_seed(1))
        back = mask_to_tensor(tensor_to_mask(t))
        assert (back - t).abs().max() <= 1.0 / 255.0 + 1e-7


class TestMeta:
    def test_health(self, client):
        r = client.get("/api/health")
        assert r.status_code == 200
        assert r.json() == {"status": "ok", "checkpoints": ["default"]}

    def test_meta_matches_config(self, client):
        r = client.get("/api/meta")
        assert r.status_code == 200
        body = r.json()
        assert body["resolution"] == RES
        assert body["attributes"] == ["warm_blob", "cool_blob"]
        assert body["checkpoints"] == ["default"]


class TestMasks:
    def test_default_path_format(self, client):
        r = client.post(
            "/api/masks",
            json={"input_image": png_b64(rgb(1), "RGB"), "exemplar_image": png_b64(rgb(2), "RGB")},
        )
        assert r.status_code == 200
        for key in ("input_mask", "exemplar_mask"):
            arr = b64_to_array(r.json()[key], "L")
            assert arr.shape == (RES, RES) and arr.dtype == np.uint8

    def test_deterministic(self, client):
        body = {"input_image": png_b64(rgb(3), "RGB"), "exemplar_image": png_b64(rgb(4), "RGB")}
        assert client.post("/api/masks", json=body).json() == client.post("/api/masks", json=body).json()


class TestTranslate:
    def _body(self, **extra):
        body = {"input_image": png_b64(rgb(5), "RGB"), "exemplar_image": png_b64(rgb(6), "RGB")}
        body.update(extra)
        return body

    def test_no_override_masks_match_extracted(self, client):
        body = self._body()
        t = client.post("/api/translate", json=body).json()
        m = client.post(
            "/api/masks",
            json={"input_image": body["input_image"], "exemplar_image": body["exemplar_image"]},
        ).json()
        assert t["input_mask"] == m["input_mask"]
        assert t["exemplar_mask"] == m["exemplar_mask"]
        out = b64_to_array(t["output_image"], "RGB")
        assert out.shape == (RES, RES, 3)
        assert t["timing_ms"] > 0

    def test_override_echoed_bit_identical(self, client):
        rng = np.random.default_rng(9)
        override = rng.integers(0, 256, size=(RES, RES), dtype=np.uint8)
        r = client.post("/api/translate", json=self._body(input_mask_override=png_b64(override, "L")))
        assert r.status_code == 200
        assert np.array_equal(b64_to_array(r.json()["input_mask"], "L"), override)

    def test_zero_exemplar_override_is_finite(self, client):
        zero = np.zeros((RES, RES), dtype=np.uint8)
        r = client.post("/api/translate", json=self._body(exemplar_mask_override=png_b64(zero, "L")))
        assert r.status_code == 200
        out = b64_to_array(r.json()["output_image"], "RGB")
        assert out.shape == (RES, RES, 3)

    def test_purity(self, client):
        body = self._body()
        r1 = client.post("/api/translate", json=body).json()
        r2 = client.post("/api/translate", json=body).json()
        assert r1["output_image"] == r2["output_image"]

    def test_oversized_input_resized_with_header(self, client):
        body = {"input_image": png_b64(rgb(7, 32), "RGB"), "exemplar_image": png_b64(rgb(8), "RGB")}
        r = client.post("/api/translate", json=body)
        assert r.status_code == 200
        assert r.headers.get("x-input-resized") == f"{RES}x{RES}"
        assert b64_to_array(r.json()["output_image"], "RGB").shape == (RES, RES, 3)


class TestErrors:
    def test_undecodable_image_400(self, client):
        r = client.post(
            "/api/translate",
            json={"input_image": base64.b64encode(b"not a png").decode(), "exemplar_image": png_b64(rgb(1), "RGB")},
        )
        assert r.status_code == 400

    def test_unknown_checkpoint_404(self, client):
        r = client.post(
            "/api/translate",
            json={
                "input_image": png_b64(rgb(1), "RGB"),
                "exemplar_image": png_b64(rgb(2), "RGB"),
                "checkpoint_id": "nope",
            },
        )
        assert r.status_code == 404

    def test_wrong_size_mask_422(self, client):
        big = np.zeros((32, 32), dtype=np.uint8)
        r = client.post(
            "/api/translate",
            json={
                "input_image": png_b64(rgb(1), "RGB"),
                "exemplar_image": png_b64(rgb(2), "RGB"),
                "input_mask_override": png_b64(big, "L"),
            },
        )
        assert r.status_code == 422
        assert "never resized" in r.json()["detail"]

    def test_missing_field_422(self, client):
        r = client.post("/api/translate", json={"input_image": png_b64(rgb(1), "RGB")})
        assert r.status_code == 422
