"""Binary on-disk formats.

Two containers share the same header discipline (4-byte magic, u32
version, little-endian payload):

* ``AXEB`` -- keyword embedding table: u32 dimension, u32 record count,
  then per record a u32 byte length, the UTF-8 keyword, and ``dim``
  little-endian float32 values.  Round-trips bit-exactly.
* ``AXEM`` -- named matrix blocks (whitener/centroid/feature/coordinate
  payloads): u32 block count, then per block a u32 name length, the
  UTF-8 name, a u32 dtype code, u32 ndim, ndim u32 dims, and the raw
  little-endian array bytes in row-major order.
"""

from __future__ import annotations

import struct

import numpy as np

TABLE_MAGIC = b"AXEB"
MATRIX_MAGIC = b"AXEM"
FORMAT_VERSION = 1

_DTYPE_CODES = {1: "<f4", 2: "<f8", 3: "<i8"}
_DTYPE_BY_STR = {v: k for k, v in _DTYPE_CODES.items()}


class BlockFormatError(ValueError):
    """Malformed or inconsistent binary payload."""


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise BlockFormatError(f"truncated file while reading {what}")
    return buf


def write_embedding_table(path, entries: dict[str, np.ndarray], dimension: int) -> None:
    """Write a keyword -> vector table in the AXEB binary format.

    Vectors are stored as little-endian float32; the caller is
    responsible for keyword ordering (insertion order is preserved).
    """
    with open(path, "wb") as fh:
        fh.write(TABLE_MAGIC)
        fh.write(struct.pack("<III", FORMAT_VERSION, dimension, len(entries)))
        for keyword, vec in entries.items():
            raw = keyword.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            arr = np.asarray(vec, dtype="<f4")
            if arr.shape != (dimension,):
                raise BlockFormatError(
                    f"vector for {keyword!r} has shape {arr.shape}, expected ({dimension},)"
                )
            fh.write(arr.tobytes())


def read_embedding_table(path) -> tuple[dict[str, np.ndarray], int]:
    """Read an AXEB table; returns (entries, dimension).

    Vectors come back as float32 exactly as stored.
    """
    entries: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != TABLE_MAGIC:
            raise BlockFormatError(f"bad magic {magic!r}, expected {TABLE_MAGIC!r}")
        version, dim, count = struct.unpack("<III", _read_exact(fh, 12, "header"))
        if version != FORMAT_VERSION:
            raise BlockFormatError(f"unsupported table version {version}")
        for idx in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, f"record {idx} name length"))
            keyword = _read_exact(fh, name_len, f"record {idx} keyword").decode("utf-8")
            raw = _read_exact(fh, 4 * dim, f"record {idx} vector")
            if keyword in entries:
                raise BlockFormatError(f"duplicate keyword {keyword!r} at record {idx}")
            entries[keyword] = np.frombuffer(raw, dtype="<f4").copy()
        if fh.read(1):
            raise BlockFormatError("trailing bytes after final record")
    return entries, dim


def write_matrix_blocks(path, blocks: dict[str, np.ndarray]) -> None:
    """Write named arrays in the AXEM container (bit-exact round-trip)."""
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blocks)))
        for name, arr in blocks.items():
            arr = np.ascontiguousarray(arr)
            dtype_str = arr.dtype.newbyteorder("<").str
            if dtype_str not in _DTYPE_BY_STR:
                raise BlockFormatError(f"unsupported dtype {arr.dtype} for block {name!r}")
            raw_name = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw_name)))
            fh.write(raw_name)
            fh.write(struct.pack("<II", _DTYPE_BY_STR[dtype_str], arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype(dtype_str, copy=False).tobytes())


def read_matrix_blocks(path) -> dict[str, np.ndarray]:
    """Read an AXEM container into {name: array}."""
    blocks: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MATRIX_MAGIC:
            raise BlockFormatError(f"bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
        version, count = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if version != FORMAT_VERSION:
            raise BlockFormatError(f"unsupported block version {version}")
        for idx in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, f"block {idx} name length"))
            name = _read_exact(fh, name_len, f"block {idx} name").decode("utf-8")
            code, ndim = struct.unpack("<II", _read_exact(fh, 8, f"block {idx} dtype/ndim"))
            if code not in _DTYPE_CODES:
                raise BlockFormatError(f"unknown dtype code {code} in block {name!r}")
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, f"block {idx} shape"))
            dtype = np.dtype(_DTYPE_CODES[code])
            n_bytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if ndim else dtype.itemsize
            raw = _read_exact(fh, n_bytes, f"block {idx} payload")
            blocks[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        if fh.read(1):
            raise BlockFormatError("trailing bytes after final block")
    return blocks
