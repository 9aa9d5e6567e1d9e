"""Deterministic on-disk container: plain-text JSON header + raw arrays.

Layout:

    GQNQIO 1\n
    <decimal header length>\n
    <header JSON, sorted keys>\n
    <array bytes, little-endian, C order, in the order listed in the header>

The header's "arrays" entry records name/dtype/shape for every block, so a
file round-trips byte-for-byte: identical in-memory content always produces
identical files (no timestamps, no compression nondeterminism).
"""

from __future__ import annotations

import json

import numpy as np

MAGIC = b"GQNQIO"
FORMAT_VERSION = 1

_DTYPES = {"<f8": "<f8", "<i8": "<i8", "<c16": "<c16"}


class DataError(Exception):
    """Unreadable, version-mismatched, or structurally invalid file."""


def _canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_blocks(path, header, arrays):
    """Write a header dict plus named arrays; names keep insertion order."""
    manifest = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype == np.float64:
            code = "<f8"
        elif arr.dtype == np.int64:
            code = "<i8"
        elif arr.dtype == np.complex128:
            code = "<c16"
        else:
            raise DataError(f"unsupported dtype {arr.dtype} for block {name!r}")
        manifest.append({"name": name, "dtype": code, "shape": list(arr.shape)})
        blobs.append(arr.astype(code, copy=False).tobytes(order="C"))
    full_header = dict(header)
    full_header["io_version"] = FORMAT_VERSION
    full_header["arrays"] = manifest
    encoded = _canonical_json(full_header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC + b" " + str(FORMAT_VERSION).encode() + b"\n")
        fh.write(str(len(encoded)).encode() + b"\n")
        fh.write(encoded + b"\n")
        for blob in blobs:
            fh.write(blob)


def read_blocks(path):
    """Read a container back into (header, {name: array})."""
    with open(path, "rb") as fh:
        magic_line = fh.readline().strip()
        parts = magic_line.split(b" ")
        if len(parts) != 2 or parts[0] != MAGIC:
            raise DataError(f"{path}: not a gqnq container")
        if int(parts[1]) != FORMAT_VERSION:
            raise DataError(
                f"{path}: container version {parts[1].decode()} unsupported "
                f"(expected {FORMAT_VERSION})"
            )
        try:
            header_len = int(fh.readline().strip())
        except ValueError as exc:
            raise DataError(f"{path}: corrupt header length") from exc
        raw = fh.read(header_len)
        if len(raw) != header_len:
            raise DataError(f"{path}: truncated header")
        try:
            header = json.loads(raw.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: corrupt header JSON") from exc
        fh.readline()  # trailing newline after the header
        arrays = {}
        for entry in header.get("arrays", []):
            dtype = np.dtype(_DTYPES.get(entry["dtype"]))
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            blob = fh.read(count * dtype.itemsize)
            if len(blob) != count * dtype.itemsize:
                raise DataError(f"{path}: truncated block {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(blob, dtype=dtype).reshape(shape).copy()
        trailing = fh.read(1)
        if trailing:
            raise DataError(f"{path}: trailing bytes after last block")
    return header, arrays
