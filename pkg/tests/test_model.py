import numpy as np
import pytest
import torch

from nbrestore.attributes import AttributeVector, constant_map
from nbrestore.errors import CheckpointError, InvalidParameterError, ShapeMismatchError
from nbrestore.model import (
    ModelConfig,
    build_model,
    forward,
    layer_shapes,
    load_checkpoint,
    param_count,
    save_checkpoint,
    to_module,
    zero_final_layer,
)

TINY = ModelConfig(layers=3, features=4)


class TestConfig:
    def test_default_shapes(self):
        shapes = layer_shapes(ModelConfig())
        assert len(shapes) == 20
        assert shapes[0][0] == (64, 4, 3, 3)
        assert shapes[1][0] == (64, 64, 3, 3)
        assert shapes[-1][0] == (1, 64, 3, 3)

    def test_param_count_matches_architecture_arithmetic(self):
        # forced by the layer map: (1+3)->64, 18x 64->64, 64->1, all 3x3 + bias
        expected = (4 * 64 * 9 + 64) + 18 * (64 * 64 * 9 + 64) + (64 * 1 * 9 + 1)
        assert expected == 667_649
        assert param_count(ModelConfig()) == expected

    def test_invalid_config(self):
        with pytest.raises(InvalidParameterError):
            ModelConfig(layers=1)
        with pytest.raises(InvalidParameterError):
            ModelConfig(kernel_size=4)


class TestBuild:
    def test_same_seed_identical(self):
        a = build_model(TINY, seed=9)
        b = build_model(TINY, seed=9)
        for name in a.weights:
            assert np.array_equal(a.weights[name], b.weights[name])

    def test_different_seed_differs(self):
        a = build_model(TINY, seed=9)
        b = build_model(TINY, seed=10)
        assert not np.array_equal(a.weights["conv01.weight"],
                                  b.weights["conv01.weight"])

    def test_attribute_slices_scaled_down(self):
        ckpt = build_model(ModelConfig(layers=4, features=16), seed=0)
        w = ckpt.weights["conv01.weight"]
        image_std = w[:, :1].std()
        attr_std = w[:, 1:].std()
        assert attr_std < 0.2 * image_std

    def test_biases_zero(self):
        ckpt = build_model(TINY, seed=1)
        for name, arr in ckpt.weights.items():
            if name.endswith(".bias"):
                assert not arr.any()


class TestForward:
    def test_zero_final_layer_is_identity(self, natural_image):
        ckpt = zero_final_layer(build_model(TINY, seed=4))
        attrs = constant_map(AttributeVector(0.5, 0.1, 0.9), *natural_image.shape)
        restored, residual = forward(ckpt, natural_image, attrs)
        assert not residual.any()
        assert np.array_equal(restored, natural_image)

    @pytest.mark.parametrize("shape", [(3, 3), (50, 50), (61, 47), (481, 321)])
    def test_shape_preserved(self, shape):
        ckpt = build_model(TINY, seed=2)
        img = np.random.default_rng(0).random(shape).astype(np.float32)
        attrs = constant_map(AttributeVector(0.3, 0, 0), *shape)
        restored, residual = forward(ckpt, img, attrs)
        assert restored.shape == shape
        assert residual.shape == shape

    def test_constant_shift_passthrough(self):
        ckpt = zero_final_layer(build_model(TINY, seed=4))
        base = np.full((16, 16), 0.2, dtype=np.float32)
        attrs = constant_map(AttributeVector(), 16, 16)
        restored_a, _ = forward(ckpt, base, attrs)
        restored_b, _ = forward(ckpt, base + 0.3, attrs)
        assert np.allclose(restored_b - restored_a, 0.3, atol=1e-7)

    def test_dimension_mismatch_rejected(self, natural_image):
        ckpt = build_model(TINY, seed=0)
        attrs = constant_map(AttributeVector(), 10, 10)
        with pytest.raises(ShapeMismatchError):
            forward(ckpt, natural_image, attrs)

    def test_output_clipped(self, natural_image):
        ckpt = build_model(TINY, seed=3)
        attrs = constant_map(AttributeVector(1, 1, 1), *natural_image.shape)
        restored, _ = forward(ckpt, natural_image, attrs)
        assert restored.min() >= 0.0 and restored.max() <= 1.0


class TestCheckpointIO:
    def test_round_trip_bit_exact(self, tmp_path):
        ckpt = build_model(TINY, seed=6)
        ckpt.provenance["stage"] = "unit-test"
        path = tmp_path / "model.ckpt"
        save_checkpoint(ckpt, path)
        back = load_checkpoint(path)
        assert back.config == ckpt.config
        assert back.channel_order == ckpt.channel_order
        assert back.provenance == ckpt.provenance
        for name in ckpt.weights:
            assert np.array_equal(back.weights[name], ckpt.weights[name])

    def test_tampering_detected(self, tmp_path):
        ckpt = build_model(TINY, seed=6)
        path = tmp_path / "model.ckpt"
        save_checkpoint(ckpt, path)
        data = bytearray(path.read_bytes())
        data[len(data) // 2] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncation_detected(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_bytes(b"short")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_channel_order_strict_vs_remap(self, tmp_path, natural_image):
        ckpt = build_model(TINY, seed=8)
        path = tmp_path / "model.ckpt"
        save_checkpoint(ckpt, path)
        # rewrite the header with a permuted channel order and fixed checksum
        import hashlib
        import json
        import struct

        data = path.read_bytes()
        body = data[:-32]
        (hlen,) = struct.unpack_from("<I", body, 8)
        header = json.loads(body[12:12 + hlen])
        header["channel_order"] = ["jpeg", "scale", "noise"]
        new_header = json.dumps(header, sort_keys=True).encode()
        new_body = body[:8] + struct.pack("<I", len(new_header)) + new_header \
            + body[12 + hlen:]
        path.write_bytes(new_body + hashlib.sha256(new_body).digest())

        with pytest.raises(CheckpointError):
            load_checkpoint(path, strict_channel_order=True)
        with pytest.warns(UserWarning):
            remapped = load_checkpoint(path, strict_channel_order=False)
        assert remapped.channel_order == ("noise", "scale", "jpeg")
        # remapped attr slices: stored noise slice ends up first again
        orig = ckpt.weights["conv01.weight"]
        re = remapped.weights["conv01.weight"]
        assert np.array_equal(re[:, 1], orig[:, 3])  # noise <- stored plane 2
        assert np.array_equal(re[:, 2], orig[:, 2])
        assert np.array_equal(re[:, 3], orig[:, 1])


class TestGradients:
    def test_analytic_matches_central_differences(self):
        # tiny double-precision model; finite differences as the oracle
        torch.manual_seed(0)
        config = ModelConfig(layers=3, features=4)
        ckpt = build_model(config, seed=12)
        net = to_module(ckpt, dtype=torch.float64)
        net.train()
        for p in net.parameters():
            p.data = p.data.contiguous()
        gen = np.random.default_rng(5)
        x = torch.from_numpy(gen.random((1, 4, 8, 8))).to(torch.float64)
        y = torch.from_numpy(gen.random((1, 1, 8, 8))).to(torch.float64)

        def loss_value() -> float:
            with torch.no_grad():
                residual = net(x)
                restored = x[:, :1] + residual
                return float(((restored - y) ** 2).mean())

        loss = ((x[:, :1] + net(x) - y) ** 2).mean()
        net.zero_grad()
        loss.backward()

        eps = 1e-6
        checked = 0
        good = 0
        for p in net.parameters():
            grad = p.grad.detach().numpy().ravel()
            flat = p.data.view(-1)
            for j in range(flat.numel()):
                orig = float(flat[j])
                flat[j] = orig + eps
                up = loss_value()
                flat[j] = orig - eps
                down = loss_value()
                flat[j] = orig
                fd = (up - down) / (2 * eps)
                denom = max(abs(fd), abs(grad[j]), 1e-8)
                checked += 1
                if abs(fd - grad[j]) / denom < 1e-3:
                    good += 1
        assert checked == param_count(config)
        assert good / checked >= 0.95
