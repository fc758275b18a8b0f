"""Pixel-level feature assembly.

Feature maps arrive at whatever spatial size a backbone produced; masks
define the working resolution. This module upsamples maps to the mask
grid, stacks channels across models, and draws a stratified per-class
pixel sample to form the training matrix.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ShapeError
from .rng import Xoshiro256StarStar, derive_stream_seed
from .tensorio import FeatureMap, LabelMask


def upsample_bilinear(fmap: FeatureMap, out_h: int, out_w: int) -> FeatureMap:
    """Resize to (out_h, out_w) with half-pixel-center sampling.

    Output pixel (i, j) reads source coordinate
    ((i + 0.5) * H / out_h - 0.5, (j + 0.5) * W / out_w - 0.5),
    clamped to the source grid, and blends the four neighbors per channel.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be positive, got {out_h}x{out_w}")
    src = fmap.data.astype(np.float64)
    h, w = fmap.height, fmap.width

    sy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    sx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[:, None, None]
    fx = (sx - x0)[None, :, None]

    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return FeatureMap(out.astype(np.float32))


def concat_models(maps: list[FeatureMap], out_h: int, out_w: int) -> FeatureMap:
    """Upsample every map to (out_h, out_w) and stack channels in list order."""
    if not maps:
        raise ValueError("concat_models needs at least one feature map")
    resized = [upsample_bilinear(m, out_h, out_w).data for m in maps]
    return FeatureMap(np.concatenate(resized, axis=2))


@dataclass(frozen=True)
class SamplingPolicy:
    max_pixels_per_class_per_image: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.max_pixels_per_class_per_image < 1:
            raise ValueError("max_pixels_per_class_per_image must be >= 1")


@dataclass(frozen=True)
class PixelTable:
    """Sampled training rows: values[i] is the feature vector of the pixel
    described by provenance[i] = (entry id, y, x), labels[i] its class."""

    values: np.ndarray  # (num_rows, num_features) float32
    labels: np.ndarray  # (num_rows,) int64
    provenance: tuple[tuple[str, int, int], ...]

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.dtype != np.float32:
            raise ShapeError("values must be a 2-D float32 array")
        if self.labels.shape != (self.values.shape[0],):
            raise ShapeError("labels must align with rows")
        if len(self.provenance) != self.values.shape[0]:
            raise ShapeError("provenance must align with rows")

    @property
    def num_rows(self) -> int:
        return self.values.shape[0]

    @property
    def num_features(self) -> int:
        return self.values.shape[1]

    @staticmethod
    def from_arrays(values: np.ndarray, labels: np.ndarray,
                    entry_id: str = "rows") -> "PixelTable":
        """Wrap bare arrays, synthesizing provenance (entry_id, 0, row)."""
        values = np.ascontiguousarray(values, dtype=np.float32)
        labels = np.ascontiguousarray(labels, dtype=np.int64)
        prov = tuple((entry_id, 0, i) for i in range(values.shape[0]))
        return PixelTable(values=values, labels=labels, provenance=prov)


def _reservoir_sample(flat_indices: np.ndarray, cap: int, seed: int) -> np.ndarray:
    """Algorithm R over a candidate index stream, in stream order."""
    n = flat_indices.shape[0]
    if n <= cap:
        return flat_indices
    rng = Xoshiro256StarStar(seed)
    reservoir = flat_indices[:cap].copy()
    for i in range(cap, n):
        j = rng.randbelow(i + 1)
        if j < cap:
            reservoir[j] = flat_indices[i]
    return reservoir


def _sample_entry(entry, source, model_ids, policy, ignore_value):
    mask = source.load_mask(entry)
    fmaps = source.load_features(entry, model_ids)
    stacked = concat_models(fmaps, mask.height, mask.width)
    flat_feats = stacked.data.reshape(-1, stacked.channels)
    flat_mask = mask.data.reshape(-1)

    classes = np.unique(flat_mask)
    rows, labels, prov = [], [], []
    for cls in classes:
        if cls == ignore_value:
            continue
        candidates = np.flatnonzero(flat_mask == cls)
        seed = derive_stream_seed(policy.seed, entry.id, int(cls))
        chosen = _reservoir_sample(candidates, policy.max_pixels_per_class_per_image, seed)
        rows.append(flat_feats[chosen])
        labels.append(np.full(chosen.shape[0], cls, dtype=np.int64))
        for idx in chosen:
            prov.append((entry.id, int(idx) // mask.width, int(idx) % mask.width))
    if not rows:
        return (np.empty((0, stacked.channels), dtype=np.float32),
                np.empty(0, dtype=np.int64), [])
    return np.concatenate(rows), np.concatenate(labels), prov


def build_pixel_table(entries, model_ids: list[str], source, policy: SamplingPolicy,
                      ignore_value: int = 255, workers: int | None = None) -> PixelTable:
    """Assemble the training matrix from a list of patch entries.

    ``source`` provides ``load_mask(entry)`` and ``load_features(entry,
    model_ids)`` (a DatasetManifest qualifies). Per entry, feature maps are
    upsampled to mask resolution and concatenated; per class present, up to
    policy.max pixels are kept via reservoir sampling seeded by (policy
    seed, entry id, class). Rows land in entry order, then class order,
    then reservoir slot order, so output is identical for any worker count.
    """
    entries = list(entries)
    if workers is not None and workers > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda e: _sample_entry(e, source, model_ids, policy, ignore_value), entries))
    else:
        parts = [_sample_entry(e, source, model_ids, policy, ignore_value) for e in entries]

    widths = {p[0].shape[1] for p in parts}
    if len(widths) > 1:
        raise DataError(f"entries disagree on feature width: {sorted(widths)}")
    values = np.concatenate([p[0] for p in parts]) if parts else np.empty((0, 0), np.float32)
    labels = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, np.int64)
    prov = tuple(t for p in parts for t in p[2])
    return PixelTable(values=values, labels=labels, provenance=prov)


def predict_mask(model, fmap: FeatureMap) -> LabelMask:
    """Classify every pixel of an already-resized feature map.

    Ties in the predicted class probabilities resolve to the lowest class
    index, so a zero-round model labels everything class 0.
    """
    if fmap.channels != model.num_features:
        raise ShapeError(
            f"feature map has {fmap.channels} channels, model expects {model.num_features}")
    flat = fmap.data.reshape(-1, fmap.channels)
    proba = model.predict_proba(flat)
    pred = np.argmax(proba, axis=1).astype(np.uint8)
    return LabelMask(pred.reshape(fmap.height, fmap.width))
