"""
Reading and writing the tensor interchange files
================================================

Feature maps (float32, height x width x channels) and label masks (uint8,
height x width) travel between tools as plain .npy version 1.0 files with
a strict little-endian, C-order profile. This demo writes both kinds,
inspects the bytes, and shows what the reader refuses to accept.
"""

import tempfile
from pathlib import Path

import numpy as np

from pixelbench import FeatureMap, LabelMask, read_tensor, write_tensor
from pixelbench.errors import FormatError

workdir = Path(tempfile.mkdtemp(prefix="tensor_demo_"))

# A tiny feature map: 4x6 pixels, 3 channels of random activations.
rng = np.random.default_rng(0)
fmap = FeatureMap(rng.normal(size=(4, 6, 3)).astype(np.float32))
fmap_path = workdir / "features.npy"
write_tensor(fmap, fmap_path)

# And a label mask for the same grid, with class ids 0..2 and the 255
# ignore sentinel in one corner.
mask_data = rng.integers(0, 3, size=(4, 6)).astype(np.uint8)
mask_data[0, 0] = 255
mask = LabelMask(mask_data)
mask_path = workdir / "mask.npy"
write_tensor(mask, mask_path)

# Round-tripping is bit-exact; the reader infers the tensor kind from the
# stored dtype and rank.
back = read_tensor(fmap_path)
print("feature map round-trip:",
      type(back).__name__, back.data.shape, back.data.dtype,
      "bit-exact" if back.data.tobytes() == fmap.data.tobytes() else "DIFFERS")
back = read_tensor(mask_path, ignore_value=255)
print("label mask round-trip: ",
      type(back).__name__, back.data.shape, back.data.dtype)

# The header is human-readable: magic, version, and a 64-byte-aligned
# dict literal describing dtype, memory order, and shape.
blob = fmap_path.read_bytes()
print("\nfirst 80 header bytes:", blob[:80])

# Files written by numpy itself load too, as long as they respect the
# profile (little-endian float32/uint8, C order, 2-D or 3-D).
np.save(workdir / "numpy_native.npy", fmap.data)
print("\nnp.save output loads: ",
      read_tensor(workdir / "numpy_native.npy").data.shape)

# Everything outside the profile is rejected with FormatError rather than
# silently coerced: wrong dtypes, Fortran order, truncations, and even a
# single trailing byte.
corrupt = workdir / "corrupt.npy"
np.save(corrupt, fmap.data.astype(np.float64))
try:
    read_tensor(corrupt)
except FormatError as exc:
    print("\nfloat64 rejected:     ", exc)

corrupt.write_bytes(blob + b"\x00")
try:
    read_tensor(corrupt)
except FormatError as exc:
    print("trailing byte rejected:", exc)

corrupt.write_bytes(blob[: len(blob) - 4])
try:
    read_tensor(corrupt)
except FormatError as exc:
    print("truncation rejected:   ", exc)
