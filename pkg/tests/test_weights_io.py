import numpy as np
import pytest

from fpt_encoders import (
    EncoderParams,
    LinearEncoderParams,
    encode,
    init_encoder,
    load_weights,
    read_tensor_file,
    save_weights,
    write_tensor_file,
)
from fpt_encoders.weights_io import MAGIC
from fpt_utils.errors import FormatError
from fpt_utils.seeding import derive_seed


class TestWeightFiles:
    def test_vit_round_trip(self, tmp_path, tiny_encoder, tiny_images):
        path = tmp_path / "w.fptw"
        save_weights(tiny_encoder, path)
        loaded = load_weights(path)
        assert isinstance(loaded, EncoderParams)
        assert loaded.image_shape == tiny_encoder.image_shape
        np.testing.assert_array_equal(encode(loaded, tiny_images[0]), encode(tiny_encoder, tiny_images[0]))

    def test_64_bit_seed_survives(self, tmp_path):
        seed = (1 << 64) - 3
        assert seed > 2**53
        params = init_encoder((1, 8, 8), 4, 8, 2, 1, 8, seed=seed)
        path = tmp_path / "w.fptw"
        save_weights(params, path)
        assert load_weights(path).seed == seed

    def test_derived_seed_survives(self, tmp_path):
        seed = derive_seed(3, "encoder")
        params = init_encoder((1, 8, 8), 4, 8, 2, 1, 8, seed=seed)
        path = tmp_path / "w.fptw"
        save_weights(params, path)
        assert load_weights(path).seed == seed

    def test_linear_round_trip(self, tmp_path):
        params = LinearEncoderParams.random((1, 4, 4), 5, seed=1)
        path = tmp_path / "linear.fptw"
        save_weights(params, path)
        loaded = load_weights(path)
        assert isinstance(loaded, LinearEncoderParams)
        np.testing.assert_array_equal(loaded.matrix, params.matrix)

    def test_scalar_and_empty_tensors(self, tmp_path):
        path = tmp_path / "t.fptw"
        write_tensor_file(path, {"s": np.float64(2.5), "e": np.zeros((0, 3))})
        tensors = read_tensor_file(path)
        assert tensors["s"].shape == () and tensors["s"] == 2.5
        assert tensors["e"].shape == (0, 3)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.fptw"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 4)
        with pytest.raises(FormatError) as info:
            read_tensor_file(path)
        assert info.value.offset == 0

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "w.fptw"
        write_tensor_file(path, {"a": np.arange(6.0)})
        data = path.read_bytes()
        path.write_bytes(data[:-12])
        with pytest.raises(FormatError) as info:
            read_tensor_file(path)
        assert info.value.offset is not None
        assert "byte offset" in str(info.value)

    def test_trailer_mismatch(self, tmp_path):
        path = tmp_path / "w.fptw"
        write_tensor_file(path, {"a": np.ones(2)})
        data = bytearray(path.read_bytes())
        data[-4:] = (7).to_bytes(4, "little")
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError) as info:
            read_tensor_file(path)
        assert info.value.offset == len(data) - 4

    def test_missing_meta(self, tmp_path):
        path = tmp_path / "w.fptw"
        write_tensor_file(path, {"a": np.ones(2)})
        with pytest.raises(FormatError):
            load_weights(path)

    def test_magic_prefix(self, tmp_path, tiny_encoder):
        path = tmp_path / "w.fptw"
        save_weights(tiny_encoder, path)
        assert path.read_bytes().startswith(MAGIC)
