"""
Portable float matrices for ILD/IPD images.

Layout (little-endian): magic "BENETMAT", u32 version (1), u32 rows,
u32 cols, u8 dtype code (1 = float32, 2 = float64), row-major payload.
"""

import struct

import numpy as np

from ..errors import AudioFileNotFoundError, ModelFormatError, ShapeMismatchError, UnwritablePathError

MATRIX_MAGIC = b"BENETMAT"
MATRIX_VERSION = 1
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}
HEADER = struct.Struct("<IIIB")


def save_matrix(path: str, matrix: np.ndarray, dtype=np.float32) -> None:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ShapeMismatchError(f"Expected a 2-D matrix, got shape {matrix.shape}")
    code = CODES[np.dtype(dtype)]
    payload = np.ascontiguousarray(matrix, dtype=DTYPES[code]).tobytes()
    try:
        with open(path, "wb") as handle:
            handle.write(MATRIX_MAGIC + HEADER.pack(MATRIX_VERSION, matrix.shape[0], matrix.shape[1], code))
            handle.write(payload)
    except OSError as e:
        raise UnwritablePathError(f"Cannot write matrix {path}: {e}")


def load_matrix(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as handle:
            payload = handle.read()
    except FileNotFoundError:
        raise AudioFileNotFoundError(f"Matrix file not found: {path}")

    start = len(MATRIX_MAGIC) + HEADER.size
    if len(payload) < start or payload[:len(MATRIX_MAGIC)] != MATRIX_MAGIC:
        raise ModelFormatError(f"{path} is not a BENET matrix file")
    version, rows, cols, code = HEADER.unpack(payload[len(MATRIX_MAGIC):start])
    if version != MATRIX_VERSION or code not in DTYPES:
        raise ModelFormatError(f"Unsupported matrix version {version} / dtype {code} in {path}")

    dtype = DTYPES[code]
    expected = rows * cols * dtype.itemsize
    if len(payload) - start != expected:
        raise ModelFormatError(f"Matrix {path} holds {len(payload) - start} bytes, expected {expected}")
    return np.frombuffer(payload[start:], dtype=dtype).reshape(rows, cols).copy()
