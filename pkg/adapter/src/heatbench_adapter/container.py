"""Reading and writing the tensor container format.

A from-scratch implementation of the layout documented in
docs/container-format.md at the repository root: an 8-digit ASCII byte
count, one line of JSON metadata with sorted keys, then the raw
little-endian float32 payload in row-major order. The adapter deliberately
shares no code with the harness; the two implementations meet only at the
byte level, which is what makes conformance tests between them meaningful.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import AdapterError

PREFIX_DIGITS = 8


def read_tensor(path: str | Path) -> np.ndarray:
    """Load a container as a C-order float32 array; reject anything malformed."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise AdapterError(f"cannot read tensor {path}: {exc}") from exc

    if len(blob) < PREFIX_DIGITS:
        raise AdapterError(f"{path}: too short for a header length prefix")
    prefix = blob[:PREFIX_DIGITS]
    if not prefix.isdigit():
        raise AdapterError(f"{path}: header length prefix is not numeric")
    header_len = int(prefix)
    if header_len <= 0 or len(blob) < PREFIX_DIGITS + header_len:
        raise AdapterError(f"{path}: truncated header")

    try:
        header = json.loads(blob[PREFIX_DIGITS:PREFIX_DIGITS + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise AdapterError(f"{path}: undecodable header: {exc}") from exc
    if not isinstance(header, dict):
        raise AdapterError(f"{path}: header is not a JSON object")
    missing = {"dtype", "shape", "layout", "endian"} - header.keys()
    if missing:
        raise AdapterError(f"{path}: header missing {sorted(missing)}")
    tags = (header["dtype"], header["layout"], header["endian"])
    if tags != ("float32", "C", "LE"):
        raise AdapterError(
            f"{path}: only float32/C/LE containers are supported, got {'/'.join(map(str, tags))}")
    try:
        shape = tuple(int(s) for s in header["shape"])
    except (TypeError, ValueError) as exc:
        raise AdapterError(f"{path}: bad shape {header['shape']!r}") from exc
    if any(s < 0 for s in shape):
        raise AdapterError(f"{path}: negative dimension in shape {list(shape)}")

    payload = blob[PREFIX_DIGITS + header_len:]
    expected = 4 * int(np.prod(shape, dtype=np.int64))
    if len(payload) != expected:
        raise AdapterError(
            f"{path}: expected {expected} payload bytes, found {len(payload)}")
    # astype makes a writable copy; frombuffer alone would be read-only
    arr = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)
    if not np.isfinite(arr).all():
        raise AdapterError(f"{path}: payload contains non-finite values")
    return arr


def write_tensor(path: str | Path, array: np.ndarray) -> Path:
    """Write ``array`` as a float32 container with the canonical header."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    header = json.dumps(
        {"dtype": "float32", "endian": "LE", "layout": "C",
         "shape": [int(s) for s in arr.shape]},
        sort_keys=True, separators=(",", ":")) + "\n"
    raw = header.encode("utf-8")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"{len(raw):0{PREFIX_DIGITS}d}".encode("ascii"))
        fh.write(raw)
        fh.write(arr.astype("<f4", copy=False).tobytes(order="C"))
    return path
