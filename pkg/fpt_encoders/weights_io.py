"""Binary weight files.

Layout (all integers little-endian u32, all payloads little-endian float64)::

    b"FPTW0001"
    repeated per tensor:  name_len | name (utf-8) | rank | dim_0 .. dim_{rank-1} | payload
    tensor_count

Records run until exactly four bytes remain; those hold the count trailer, which must
equal the number of records parsed.
"""

import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from fpt_utils.errors import FormatError

from .linear import LinearEncoderParams
from .vit import EncoderParams

MAGIC = b"FPTW0001"
U32 = struct.Struct("<I")

Params = Union[EncoderParams, LinearEncoderParams]


def write_tensor_file(path: Union[str, Path], tensors: Mapping[str, np.ndarray]) -> None:
    chunks = [MAGIC]
    for name, value in tensors.items():
        array = np.asarray(value, dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(U32.pack(array.ndim))
        chunks.extend(U32.pack(dim) for dim in array.shape)
        chunks.append(np.ascontiguousarray(array).tobytes())
    chunks.append(U32.pack(len(tensors)))
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset

    def take(self, size: int, what: str) -> bytes:
        if size > self.remaining:
            raise FormatError(
                f"truncated weight file: needed {size} bytes for {what},"
                f" {self.remaining} left",
                self.offset,
            )
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def u32(self, what: str) -> int:
        return U32.unpack(self.take(4, what))[0]


def read_tensor_file(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    reader = _Reader(Path(path).read_bytes())
    magic = reader.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)

    tensors: Dict[str, np.ndarray] = {}
    while reader.remaining > 4:
        record_start = reader.offset
        name_len = reader.u32("name length")
        try:
            name = reader.take(name_len, "tensor name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("tensor name is not valid utf-8", record_start + 4)
        rank = reader.u32(f"rank of '{name}'")
        shape = tuple(reader.u32(f"dim {i} of '{name}'") for i in range(rank))
        count = int(np.prod(shape)) if shape else 1
        payload = reader.take(8 * count, f"payload of '{name}'")
        tensors[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)

    trailer_offset = reader.offset
    declared = reader.u32("tensor count trailer")
    if declared != len(tensors):
        raise FormatError(
            f"trailer declares {declared} tensors but {len(tensors)} were read",
            trailer_offset,
        )
    return tensors


def save_weights(params: Params, path: Union[str, Path]) -> None:
    write_tensor_file(path, params.state_dict())


def load_weights(path: Union[str, Path]) -> Params:
    state = read_tensor_file(path)
    if "linear.A" in state:
        return LinearEncoderParams.from_state_dict(state)
    if "meta" not in state:
        raise FormatError("weight file has neither 'meta' nor 'linear.A'")
    return EncoderParams.from_state_dict(state)
