"""Bit-exact tensor interchange on disk.

Feature maps and label masks travel between tools as ``.npy`` files
(format version 1.0: magic ``\\x93NUMPY``, major=1 minor=0, little-endian
u16 header length, an ASCII dict with ``descr``/``fortran_order``/``shape``
space-padded so the payload starts on a 64-byte boundary, newline
terminated). The codec here is deliberately hand-rolled rather than
delegated to numpy's own reader/writer: the writer must emit identical
bytes for identical tensors regardless of library version, and the reader
must reject everything outside the narrow supported profile with a
distinct error class.

Supported profile:

* ``<f4`` row-major, 2-D or 3-D  -> FeatureMap (2-D means channels=1)
* ``|u1`` row-major, 2-D        -> LabelMask

Anything else (other dtypes, fortran order, other ranks, zero-length
axes, NaN/Inf feature payloads, trailing or missing bytes) is an error.
"""

from __future__ import annotations

import ast
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DataError, FormatError, UnsupportedDtypeError

MAGIC = b"\x93NUMPY"
FEATURE_DTYPE = "<f4"
MASK_DTYPE = "|u1"
SUPPORTED_DTYPES = (FEATURE_DTYPE, MASK_DTYPE)
DEFAULT_IGNORE_VALUE = 255

_HEADER_ALIGN = 64
_MAX_HEADER_LEN = 65535  # u16 length field of format version 1.0


@dataclass(frozen=True)
class FeatureMap:
    """Dense per-image features: (height, width, channels) float32."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"FeatureMap data must be 3-D (h, w, c), got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise ValueError(f"FeatureMap axes must all be >= 1, got shape {arr.shape}")
        object.__setattr__(self, "data", np.ascontiguousarray(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LabelMask:
    """Per-pixel class indices: (height, width) uint8, with a sentinel for
    unlabeled pixels."""

    data: np.ndarray
    ignore_value: int = DEFAULT_IGNORE_VALUE

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype != np.uint8:
            raise ValueError(f"LabelMask data must be uint8, got {arr.dtype}")
        if arr.ndim != 2:
            raise ValueError(f"LabelMask data must be 2-D, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise ValueError(f"LabelMask axes must all be >= 1, got shape {arr.shape}")
        if not 0 <= self.ignore_value <= 255:
            raise ValueError(f"ignore_value must fit in uint8, got {self.ignore_value}")
        object.__setattr__(self, "data", np.ascontiguousarray(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


Tensor = Union[FeatureMap, LabelMask]


def _build_header(descr: str, shape: tuple[int, ...]) -> bytes:
    shape_repr = "(" + ", ".join(str(d) for d in shape) + ")"
    text = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (descr, shape_repr)
    raw = text.encode("ascii")
    # magic(6) + version(2) + len(2) + header, padded so payload is 64-aligned
    total = len(MAGIC) + 2 + 2 + len(raw) + 1
    pad = (-total) % _HEADER_ALIGN
    raw = raw + b" " * pad + b"\n"
    return MAGIC + b"\x01\x00" + struct.pack("<H", len(raw)) + raw


def write_tensor(t: Tensor, path: str | Path) -> None:
    """Serialize a FeatureMap or LabelMask; identical input gives identical
    bytes (no timestamps, fixed padding, little-endian payload)."""
    if isinstance(t, FeatureMap):
        descr, arr = FEATURE_DTYPE, t.data
    elif isinstance(t, LabelMask):
        descr, arr = MASK_DTYPE, t.data
    else:
        raise TypeError(f"write_tensor() expects FeatureMap or LabelMask, got {type(t).__name__}")
    payload = np.ascontiguousarray(arr).astype(np.dtype(descr), copy=False)
    try:
        with open(path, "wb") as fh:
            fh.write(_build_header(descr, arr.shape))
            fh.write(payload.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write tensor to {path}: {exc}") from exc


def _parse_header(fh, path) -> tuple[str, bool, tuple[int, ...]]:
    prefix = fh.read(len(MAGIC) + 2)
    if len(prefix) < len(MAGIC) + 2 or prefix[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not an interchange tensor (bad or truncated magic)")
    major, minor = prefix[len(MAGIC)], prefix[len(MAGIC) + 1]
    if (major, minor) != (1, 0):
        raise FormatError(f"{path}: unsupported format version {major}.{minor} (only 1.0)")
    raw_len = fh.read(2)
    if len(raw_len) < 2:
        raise FormatError(f"{path}: truncated header length field")
    (header_len,) = struct.unpack("<H", raw_len)
    header = fh.read(header_len)
    if len(header) < header_len:
        raise FormatError(f"{path}: truncated header ({len(header)} of {header_len} bytes)")
    try:
        meta = ast.literal_eval(header.decode("ascii").strip())
    except (ValueError, SyntaxError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: unparseable header dict: {exc}") from exc
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise FormatError(f"{path}: header must carry exactly descr/fortran_order/shape")
    descr, fortran, shape = meta["descr"], meta["fortran_order"], meta["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(d, int) and d >= 0 for d in shape):
        raise FormatError(f"{path}: malformed shape {shape!r}")
    if not isinstance(fortran, bool):
        raise FormatError(f"{path}: malformed fortran_order {fortran!r}")
    return descr, fortran, shape


def read_tensor(path: str | Path, ignore_value: int = DEFAULT_IGNORE_VALUE) -> Tensor:
    """Load a tensor file, dispatching on dtype.

    ``<f4`` files become FeatureMaps (a 2-D file is treated as a single
    channel); ``|u1`` files become LabelMasks with the given ignore value.
    The reader allocates only what the header declares, and one probe byte
    to detect trailing garbage.
    """
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise OSError(f"cannot read tensor from {path}: {exc}") from exc
    with fh:
        descr, fortran, shape = _parse_header(fh, path)
        if descr not in SUPPORTED_DTYPES:
            raise UnsupportedDtypeError(
                f"{path}: dtype {descr!r} not supported (supported: {', '.join(SUPPORTED_DTYPES)})"
            )
        if fortran:
            raise FormatError(f"{path}: column-major (fortran_order) files are rejected")
        if descr == FEATURE_DTYPE and len(shape) not in (2, 3):
            raise FormatError(f"{path}: feature tensors must be 2-D or 3-D, got {len(shape)}-D")
        if descr == MASK_DTYPE and len(shape) != 2:
            raise FormatError(f"{path}: masks must be 2-D, got {len(shape)}-D")
        if any(d < 1 for d in shape):
            raise FormatError(f"{path}: zero-length axis in shape {shape}")
        dtype = np.dtype(descr)
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
        payload = fh.read(nbytes)
        if len(payload) < nbytes:
            raise FormatError(f"{path}: payload truncated ({len(payload)} of {nbytes} bytes)")
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after declared payload")
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    if descr == MASK_DTYPE:
        return LabelMask(arr.copy(), ignore_value=ignore_value)
    if not np.isfinite(arr).all():
        raise DataError(f"{path}: feature payload contains NaN or Inf")
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    return FeatureMap(arr.copy())
