"""Tensor payload format: one JSON header line followed by little-endian f32 data."""
from __future__ import annotations

import json
from typing import BinaryIO

import numpy as np


def write_tensor(fh: BinaryIO, array) -> None:
    arr = np.asarray(array)
    if np.iscomplexobj(arr):
        raise TypeError("complex payloads are stored as separate real/imag tensors")
    header = json.dumps({"shape": list(arr.shape), "dtype": "f32"}, separators=(",", ":"))
    fh.write(header.encode("ascii") + b"\n")
    fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_tensor(fh: BinaryIO) -> np.ndarray:
    line = fh.readline()
    if not line:
        raise EOFError("no tensor header")
    header = json.loads(line)
    if header.get("dtype") != "f32":
        raise ValueError(f"unsupported dtype {header.get('dtype')!r}")
    shape = tuple(header["shape"])
    count = int(np.prod(shape)) if shape else 1
    buf = fh.read(4 * count)
    if len(buf) != 4 * count:
        raise EOFError("truncated tensor payload")
    return np.frombuffer(buf, dtype="<f4").reshape(shape).astype(np.float64)


def save_tensor(path, array) -> None:
    with open(path, "wb") as fh:
        write_tensor(fh, array)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor(fh)
