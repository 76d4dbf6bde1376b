"""Writers and readers for the camcal wire formats.

Implemented independently from the engine so the exporter has no runtime
dependency on it; the byte layouts are the published contract:

* MSK1: magic ``MSK1``, height and width as little-endian uint16, then
  height*width little-endian float32, row-major. Maps carry values in
  [0, 1]; masks restrict them to {0.0, 1.0}.
* TNS1: magic ``TNS1``, one order byte (0 activations, 1..3 derivative
  order), k/u/v as little-endian uint16, then k*u*v little-endian float32.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

_MAX_DIM = 0xFFFF


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _check_dims(*dims: int) -> None:
    for d in dims:
        if not 1 <= d <= _MAX_DIM:
            raise ValueError(f"dimension {d} does not fit the 16-bit header")


def write_msk1(values: np.ndarray, path) -> None:
    """Write a 2-D array of floats in [0, 1] (use 0.0/1.0 for masks)."""
    arr = np.ascontiguousarray(values, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("map values must be finite and lie in [0, 1]")
    h, w = arr.shape
    _check_dims(h, w)
    _atomic_write(path, b"MSK1" + struct.pack("<HH", h, w) + arr.tobytes())


def read_msk1(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if len(buf) < 8 or buf[:4] != b"MSK1":
        raise ValueError(f"{path}: not an MSK1 file")
    h, w = struct.unpack_from("<HH", buf, 4)
    if len(buf) != 8 + 4 * h * w:
        raise ValueError(f"{path}: payload length mismatch")
    return np.frombuffer(buf, dtype="<f4", offset=8).reshape(h, w)


def write_tns1(planes: np.ndarray, order: int, path) -> None:
    """Write a (k, u, v) stack; order 0 for activations, 1..3 for derivatives."""
    arr = np.ascontiguousarray(planes, dtype="<f4")
    if arr.ndim != 3:
        raise ValueError(f"expected a (k, u, v) array, got shape {arr.shape}")
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be 0..3, got {order}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor values must be finite")
    k, u, v = arr.shape
    _check_dims(k, u, v)
    _atomic_write(path, b"TNS1" + struct.pack("<BHHH", order, k, u, v) + arr.tobytes())


def read_tns1(path) -> tuple[int, np.ndarray]:
    buf = Path(path).read_bytes()
    if len(buf) < 11 or buf[:4] != b"TNS1":
        raise ValueError(f"{path}: not a TNS1 file")
    order, k, u, v = struct.unpack_from("<BHHH", buf, 4)
    if len(buf) != 11 + 4 * k * u * v:
        raise ValueError(f"{path}: payload length mismatch")
    return order, np.frombuffer(buf, dtype="<f4", offset=11).reshape(k, u, v)
