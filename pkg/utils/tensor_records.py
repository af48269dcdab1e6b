"""
Binary tensor-record codec shared by checkpoints and encoder weight files.

Layout (all integers little-endian):

    magic        8 bytes
    version      uint32
    meta_len     uint32, followed by meta_len bytes of UTF-8 JSON
    n_records    uint32
    n_records x record:
        name_len uint16, name (UTF-8)
        dtype    uint8   (0 = float32, 1 = int64, 2 = uint8)
        ndim     uint8
        shape    ndim x uint32
        payload  row-major array bytes

Files are written to a temporary sibling and renamed into place so a reader
never observes a partially written file.
"""

import json
import os
import struct
import tempfile
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from utils.errors import ArtifactIOError, CheckpointFormatError

DTYPE_CODES = {
    np.dtype("<f4"): 0,
    np.dtype("<i8"): 1,
    np.dtype("u1"): 2,
}
CODE_DTYPES = {code: dtype for dtype, code in DTYPE_CODES.items()}


def encode_records(magic: bytes, version: int, metadata: Mapping[str, Any],
                   records: Mapping[str, np.ndarray]) -> bytes:
    """
    Serializes metadata and named arrays into one byte string.

    Args:
        magic: Exactly 8 bytes identifying the file family.
        version: Format version written after the magic.
        metadata: JSON-serializable mapping.
        records: Ordered mapping of name -> array (float32, int64 or uint8).

    Returns:
        The encoded bytes.
    """
    if len(magic) != 8:
        raise ValueError("magic must be exactly 8 bytes")
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    chunks = [magic, struct.pack("<II", version, len(meta)), meta, struct.pack("<I", len(records))]
    for name, array in records.items():
        array = np.ascontiguousarray(array)
        dtype = array.dtype.newbyteorder("<") if array.dtype.itemsize > 1 else array.dtype
        if dtype not in DTYPE_CODES:
            raise ValueError(f"record {name!r} has unsupported dtype {array.dtype}")
        encoded_name = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded_name)))
        chunks.append(encoded_name)
        chunks.append(struct.pack("<BB", DTYPE_CODES[dtype], array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(array.astype(dtype, copy=False).tobytes(order="C"))
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.offset = 0
        self.source = source

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise CheckpointFormatError(f"{self.source}: truncated at byte {self.offset}")
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_records(data: bytes, magic: bytes, version: int,
                   source: str = "<bytes>") -> Tuple[Dict[str, Any], "OrderedDict[str, np.ndarray]"]:
    """
    Parses bytes produced by encode_records.

    Raises:
        CheckpointFormatError: wrong magic, unsupported version, truncation or
            trailing garbage.
    """
    reader = _Reader(data, source)
    if reader.take(8) != magic:
        raise CheckpointFormatError(f"{source}: bad magic, not a {magic.decode(errors='replace')} file")
    found_version, meta_len = reader.unpack("<II")
    if found_version != version:
        raise CheckpointFormatError(f"{source}: format version {found_version}, expected {version}")
    try:
        metadata = json.loads(reader.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"{source}: corrupt metadata block: {e}")
    (count,) = reader.unpack("<I")
    records: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        code, ndim = reader.unpack("<BB")
        if code not in CODE_DTYPES:
            raise CheckpointFormatError(f"{source}: record {name!r} has unknown dtype code {code}")
        shape = reader.unpack(f"<{ndim}I")
        dtype = CODE_DTYPES[code]
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        payload = reader.take(size)
        records[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
    if reader.offset != len(data):
        raise CheckpointFormatError(f"{source}: {len(data) - reader.offset} trailing bytes")
    return metadata, records


def write_records(path: Union[str, Path], magic: bytes, version: int,
                  metadata: Mapping[str, Any], records: Mapping[str, np.ndarray]) -> Path:
    """Encodes and atomically writes a record file (write temp, then rename)."""
    path = Path(path)
    payload = encode_records(magic, version, metadata, records)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_name, path)
    except OSError as e:
        raise ArtifactIOError(f"failed to write {path}: {e}")
    return path


def read_records(path: Union[str, Path], magic: bytes,
                 version: int) -> Tuple[Dict[str, Any], "OrderedDict[str, np.ndarray]"]:
    """Reads and decodes a record file."""
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise ArtifactIOError(f"failed to read {path}: {e}")
    return decode_records(data, magic, version, source=str(path))
