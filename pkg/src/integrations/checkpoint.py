"""
Binary model checkpoints.

Layout (little-endian):
    8 bytes   magic "BENETCKP"
    u32       version (1)
    u32       header length, then UTF-8 JSON header (config + training metadata)
    u32       tensor count, then per tensor:
              u16 name length, name, u8 dtype code (1 = float32),
              u8 ndim, u32 per dim, raw row-major data
"""

import json
import logging
import struct
from collections import OrderedDict
from typing import Any, Dict, Tuple

import numpy as np

from ..errors import ModelFormatError, UnwritablePathError

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"BENETCKP"
CHECKPOINT_VERSION = 1
DTYPE_CODES = {1: np.dtype("<f4")}


def write_checkpoint(path: str, header: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> None:
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<II", CHECKPOINT_VERSION, len(header_bytes)),
        header_bytes,
        struct.pack("<I", len(tensors)),
    ]
    for name, tensor in tensors.items():
        data = np.ascontiguousarray(tensor, dtype="<f4")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack("<BB", 1, data.ndim))
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(data.tobytes())

    try:
        with open(path, "wb") as handle:
            handle.write(b"".join(parts))
    except OSError as e:
        raise UnwritablePathError(f"Cannot write checkpoint {path}: {e}")
    logger.info(f"Checkpoint written to {path} ({len(tensors)} tensors)")


class _Reader:
    def __init__(self, payload: bytes, path: str):
        self.payload = payload
        self.offset = 0
        self.path = path

    def take(self, count: int) -> bytes:
        if self.offset + count > len(self.payload):
            raise ModelFormatError(f"Truncated checkpoint {self.path}")
        chunk = self.payload[self.offset:self.offset + count]
        self.offset += count
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path: str) -> Tuple[Dict[str, Any], "OrderedDict[str, np.ndarray]"]:
    try:
        with open(path, "rb") as handle:
            payload = handle.read()
    except FileNotFoundError:
        raise ModelFormatError(f"Checkpoint not found: {path}")

    reader = _Reader(payload, path)
    if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise ModelFormatError(f"{path} is not a BENET checkpoint")
    version, header_len = reader.unpack("<II")
    if version != CHECKPOINT_VERSION:
        raise ModelFormatError(f"Unsupported checkpoint version {version} in {path}")

    try:
        header = json.loads(reader.take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"Corrupt checkpoint header in {path}: {e}")

    (count,) = reader.unpack("<I")
    tensors = OrderedDict()
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        code, ndim = reader.unpack("<BB")
        if code not in DTYPE_CODES:
            raise ModelFormatError(f"Unknown dtype code {code} for tensor {name}")
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        dtype = DTYPE_CODES[code]
        size = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(reader.take(size * dtype.itemsize), dtype=dtype)
        tensors[name] = data.reshape(shape).astype(np.float32)

    if reader.offset != len(payload):
        raise ModelFormatError(f"Trailing bytes after tensor table in {path}")
    return header, tensors
