"""Binary container for keyed tensors, with a JSON manifest sidecar.

One file holds a sequence of records, each an integer key (graph id, or a
position for named parameters) plus an n-dimensional array. The layout is
deliberately dumb: fixed magic, then per record the key, rank, shape, dtype
code, and raw little-endian bytes. Meaning (configs, parameter names) lives
in a JSON manifest written next to the container.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

_MAGIC = b"GT01"

_DTYPE_CODES = {
    np.dtype("float64"): 0,
    np.dtype("float32"): 1,
    np.dtype("int64"): 2,
    np.dtype("int32"): 3,
}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


def write_records(path, records):
    """Write ``records`` — an iterable of ``(key, array)`` — to ``path``."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        for key, array in records:
            array = np.ascontiguousarray(array)
            if array.dtype not in _DTYPE_CODES:
                raise ValueError(f"unsupported tensor dtype {array.dtype}")
            fh.write(struct.pack("<qq", int(key), array.ndim))
            fh.write(struct.pack(f"<{array.ndim}q", *array.shape))
            fh.write(struct.pack("<B", _DTYPE_CODES[array.dtype]))
            fh.write(array.astype(array.dtype.newbyteorder("<")).tobytes())


def read_records(path):
    """Read all ``(key, array)`` records from ``path``."""
    path = Path(path)
    records = []
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a tensor container (bad magic {magic!r})")
        while True:
            head = fh.read(16)
            if not head:
                break
            if len(head) < 16:
                raise ValueError(f"{path}: truncated record header")
            key, ndim = struct.unpack("<qq", head)
            shape = struct.unpack(f"<{ndim}q", fh.read(8 * ndim))
            (code,) = struct.unpack("<B", fh.read(1))
            dtype = _CODE_DTYPES.get(code)
            if dtype is None:
                raise ValueError(f"{path}: unknown dtype code {code}")
            count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            data = fh.read(count * dtype.itemsize)
            if len(data) != count * dtype.itemsize:
                raise ValueError(f"{path}: truncated record payload")
            array = np.frombuffer(data, dtype=dtype.newbyteorder("<")).astype(dtype)
            records.append((key, array.reshape(shape)))
    return records


def manifest_path(container_path):
    container_path = Path(container_path)
    return container_path.with_suffix(container_path.suffix + ".json")


def write_manifest(container_path, manifest: dict):
    """Write the JSON manifest that accompanies a tensor container."""
    with manifest_path(container_path).open("w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(container_path) -> dict:
    with manifest_path(container_path).open() as fh:
        return json.load(fh)
