"""GRNv1 checkpoint files.

Layout (all integers little-endian u64)::

    b"GRNv1" | count | count × (name_len | utf-8 name | rank | dims... | f64 values)
"""

from __future__ import annotations

import pathlib
import struct
from collections.abc import Mapping

import numpy as np

from grnparse.autodiff.tensor import Array, Tensor
from grnparse.errors import FormatError

__all__ = ["MAGIC", "dumps", "loads", "read_checkpoint", "write_checkpoint"]

MAGIC = b"GRNv1"
_U64 = struct.Struct("<Q")


def dumps(params: Mapping[str, Tensor | Array]) -> bytes:
    chunks = [MAGIC, _U64.pack(len(params))]
    for name, value in params.items():
        data = value.data if isinstance(value, Tensor) else np.asarray(value)
        encoded = name.encode("utf-8")
        chunks.append(_U64.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U64.pack(data.ndim))
        chunks.extend(_U64.pack(int(dim)) for dim in data.shape)
        chunks.append(np.ascontiguousarray(data, dtype="<f8").tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, blob: bytes) -> None:
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise FormatError("truncated GRNv1 checkpoint")
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u64(self) -> int:
        return int(_U64.unpack(self.take(8))[0])


def loads(blob: bytes) -> dict[str, Array]:
    reader = _Reader(blob)
    if reader.take(len(MAGIC)) != MAGIC:
        raise FormatError("not a GRNv1 checkpoint (bad magic)")
    params: dict[str, Array] = {}
    for _ in range(reader.u64()):
        raw = reader.take(reader.u64())
        try:
            name = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"parameter name {raw!r} is not UTF-8") from e
        shape = tuple(reader.u64() for _ in range(reader.u64()))
        count = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(reader.take(8 * count), dtype="<f8")
        params[name] = values.astype(np.float64).reshape(shape)
    if reader.pos != len(blob):
        raise FormatError(f"{len(blob) - reader.pos} trailing bytes in checkpoint")
    return params


def write_checkpoint(
    path: str | pathlib.Path, params: Mapping[str, Tensor | Array]
) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(params))
    return path


def read_checkpoint(path: str | pathlib.Path) -> dict[str, Array]:
    return loads(pathlib.Path(path).read_bytes())
