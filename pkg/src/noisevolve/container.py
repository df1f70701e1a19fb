"""Single-file binary container with a versioned header.

Layout: magic ``NVC1`` | u32 format version | u64 header length | UTF-8 JSON
header | raw array payload. All arrays are stored little-endian; the header
records kind, free-form metadata and the array manifest (name/dtype/shape) in
payload order.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .errors import InvalidInput

MAGIC = b"NVC1"
VERSION = 1

_DTYPES = {"<f8": np.dtype("<f8"), "<i8": np.dtype("<i8"), "|u1": np.dtype("|u1")}


def _canonical_dtype(arr: np.ndarray) -> str:
    if arr.dtype.kind == "f":
        return "<f8"
    if arr.dtype.kind in "iu" and arr.dtype.itemsize == 1:
        return "|u1"
    if arr.dtype.kind in "ib":
        return "<i8"
    raise InvalidInput(f"unsupported array dtype {arr.dtype}")


def write_container(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write atomically (temp file + rename) so crashes never leave a
    truncated container behind."""
    manifest = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        dt = _canonical_dtype(arr)
        data = np.ascontiguousarray(arr, dtype=_DTYPES[dt])
        manifest.append({"name": name, "dtype": dt, "shape": list(arr.shape)})
        blobs.append(data.tobytes())
    header = json.dumps({"kind": kind, "meta": meta, "arrays": manifest}).encode("utf-8")
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read_container(path, expect_kind: str | None = None):
    """Return (kind, meta, arrays) from a container file."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise InvalidInput(f"{path}: not a noisevolve container")
        version, hlen = struct.unpack("<IQ", fh.read(12))
        if version != VERSION:
            raise InvalidInput(f"{path}: unsupported container version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        arrays = {}
        for entry in header["arrays"]:
            dt = _DTYPES[entry["dtype"]]
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            buf = fh.read(count * dt.itemsize)
            arrays[entry["name"]] = np.frombuffer(buf, dtype=dt).reshape(entry["shape"]).copy()
    kind = header["kind"]
    if expect_kind is not None and kind != expect_kind:
        raise InvalidInput(f"{path}: expected {expect_kind} container, found {kind}")
    return kind, header["meta"], arrays
