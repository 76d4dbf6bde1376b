"""Binary file formats for maps, masks and tensor stacks.

Both formats are deliberately trivial so any exporter language can emit them
without a numerical-library dependency. All integers and floats are little
endian.

MSK1 (single 2-D map or mask)::

    bytes 0..3   magic "MSK1"
    bytes 4..5   height, uint16
    bytes 6..7   width, uint16
    then         height * width float32, row-major

Maps must hold finite values in [0, 1]. Masks reuse the layout with every
value exactly 0.0 or 1.0.

TNS1 (stack of k planes, activations or derivatives)::

    bytes 0..3   magic "TNS1"
    byte  4      order: 0 = activations, 1..3 = derivative order
    bytes 5..10  k, u, v as uint16 each
    then         k * u * v float32, row-major per plane

Tensor values only need to be finite.

Reads validate everything and raise a specific ``FormatError`` subclass per
failure mode; writes refuse dimensions that do not fit the header fields.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ._fsio import atomic_write_bytes
from .gradcam import FeatureStack, GradientStack
from .masks import BinaryMask, LogitMap

MSK1_MAGIC = b"MSK1"
TNS1_MAGIC = b"TNS1"
_MAX_DIM = 0xFFFF


class FormatError(ValueError):
    """Base class for malformed or unwritable files."""


class BadMagicError(FormatError):
    """The file does not start with the expected magic bytes."""


class TruncatedFileError(FormatError):
    """The payload length does not match the header."""


class ValueRangeError(FormatError):
    """A value is non-finite or outside its permitted range."""


class DimensionError(FormatError):
    """A dimension is zero or does not fit the 16-bit header field."""


def _check_dims(path, *dims: int) -> None:
    for d in dims:
        if d < 1:
            raise DimensionError(f"{path}: dimension {d} must be >= 1")
        if d > _MAX_DIM:
            raise DimensionError(f"{path}: dimension {d} overflows the 16-bit header")


def _payload(buf: bytes, path, header_len: int, count: int) -> np.ndarray:
    expected = header_len + 4 * count
    if len(buf) != expected:
        raise TruncatedFileError(
            f"{path}: expected {expected} bytes, found {len(buf)}"
        )
    return np.frombuffer(buf, dtype="<f4", offset=header_len)


def write_map(logit_map: LogitMap, path) -> None:
    _check_dims(path, logit_map.height, logit_map.width)
    header = MSK1_MAGIC + struct.pack("<HH", logit_map.height, logit_map.width)
    payload = np.ascontiguousarray(logit_map.values, dtype="<f4").tobytes()
    atomic_write_bytes(path, header + payload)


def write_mask(mask: BinaryMask, path) -> None:
    _check_dims(path, mask.height, mask.width)
    header = MSK1_MAGIC + struct.pack("<HH", mask.height, mask.width)
    payload = mask.values.astype("<f4").tobytes()
    atomic_write_bytes(path, header + payload)


def _read_msk1(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if len(buf) < 8:
        raise TruncatedFileError(f"{path}: shorter than the 8-byte header")
    if buf[:4] != MSK1_MAGIC:
        raise BadMagicError(f"{path}: bad magic {buf[:4]!r}")
    h, w = struct.unpack_from("<HH", buf, 4)
    _check_dims(path, h, w)
    values = _payload(buf, path, 8, h * w).reshape(h, w)
    if not np.all(np.isfinite(values)):
        raise ValueRangeError(f"{path}: non-finite values")
    return values


def read_map(path) -> LogitMap:
    values = _read_msk1(path)
    if float(values.min()) < 0.0 or float(values.max()) > 1.0:
        raise ValueRangeError(f"{path}: map values outside [0, 1]")
    return LogitMap(values)


def read_mask(path) -> BinaryMask:
    values = _read_msk1(path)
    if not np.all((values == 0.0) | (values == 1.0)):
        raise ValueRangeError(f"{path}: mask values must be exactly 0.0 or 1.0")
    return BinaryMask(values == 1.0)


def write_stack(stack: FeatureStack, path) -> None:
    order = stack.order if isinstance(stack, GradientStack) else 0
    _check_dims(path, stack.k, stack.u, stack.v)
    header = TNS1_MAGIC + struct.pack("<BHHH", order, stack.k, stack.u, stack.v)
    payload = np.ascontiguousarray(stack.planes, dtype="<f4").tobytes()
    atomic_write_bytes(path, header + payload)


def read_stack(path) -> FeatureStack:
    """Read a TNS1 stack; order 0 yields a FeatureStack, 1..3 a GradientStack."""
    buf = Path(path).read_bytes()
    if len(buf) < 11:
        raise TruncatedFileError(f"{path}: shorter than the 11-byte header")
    if buf[:4] != TNS1_MAGIC:
        raise BadMagicError(f"{path}: bad magic {buf[:4]!r}")
    order, k, u, v = struct.unpack_from("<BHHH", buf, 4)
    if order > 3:
        raise ValueRangeError(f"{path}: order byte {order} not in 0..3")
    _check_dims(path, k, u, v)
    values = _payload(buf, path, 11, k * u * v).reshape(k, u, v)
    if not np.all(np.isfinite(values)):
        raise ValueRangeError(f"{path}: non-finite values")
    if order == 0:
        return FeatureStack(values)
    return GradientStack(values, order=order)


def write_pgm(values: np.ndarray, path, comment: str | None = None) -> None:
    """Render values in [0, 1] as a binary portable graymap (P5, maxval 255)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"graymap input must be 2-D, got shape {arr.shape}")
    gray = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    h, w = gray.shape
    head = "P5\n"
    if comment:
        head += "".join(f"# {line}\n" for line in comment.splitlines())
    head += f"{w} {h}\n255\n"
    atomic_write_bytes(path, head.encode("ascii") + gray.tobytes())
