"""Seeded synthetic scenes: blob label masks plus feature maps whose
channels are class indicators corrupted by Gaussian noise.

The full pipeline is testable with these stand-ins because the signal is
known exactly: with zero noise and every class informative, per-pixel
argmax over the indicator channels reproduces the mask. The complementary
mode splits the informative classes between two feature sets so that
concatenating them is measurably better than either alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Xoshiro256StarStar
from .tensorio import FeatureMap, LabelMask


@dataclass(frozen=True)
class SynthSpec:
    height: int = 64
    width: int = 64
    num_classes: int = 4
    blob_count: int = 12
    noise_sigma: float = 0.1
    informative_classes: tuple[int, ...] | None = None  # None = all classes
    channels_per_class: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("scene dims must be positive")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.blob_count < 0:
            raise ValueError("blob_count must be >= 0")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        if self.channels_per_class < 1:
            raise ValueError("channels_per_class must be >= 1")
        if self.informative_classes is not None:
            bad = [c for c in self.informative_classes
                   if not 0 <= c < self.num_classes]
            if bad:
                raise ValueError(f"informative_classes out of range: {bad}")

    def informative(self) -> tuple[int, ...]:
        if self.informative_classes is None:
            return tuple(range(self.num_classes))
        return tuple(sorted(set(self.informative_classes)))

    @property
    def num_channels(self) -> int:
        return len(self.informative()) * self.channels_per_class


def _draw_mask(rng: Xoshiro256StarStar, spec: SynthSpec) -> np.ndarray:
    """Class-0 background overpainted by random axis-aligned rectangles;
    later rectangles overwrite earlier ones. Per blob the draw order is
    class, height, width, y, x."""
    mask = np.zeros((spec.height, spec.width), dtype=np.uint8)
    for _ in range(spec.blob_count):
        cls = rng.randbelow(spec.num_classes)
        bh = 1 + rng.randbelow(max(1, spec.height // 2))
        bw = 1 + rng.randbelow(max(1, spec.width // 2))
        y0 = rng.randbelow(spec.height - bh + 1)
        x0 = rng.randbelow(spec.width - bw + 1)
        mask[y0:y0 + bh, x0:x0 + bw] = cls
    return mask


def _draw_features(rng: Xoshiro256StarStar, spec: SynthSpec,
                   mask: np.ndarray, classes: tuple[int, ...]) -> FeatureMap:
    """channels_per_class indicator channels per informative class, in
    ascending class order, plus sigma-scaled Gaussian noise drawn as one
    flat row-major block."""
    h, w = mask.shape
    n_channels = len(classes) * spec.channels_per_class
    signal = np.zeros((h, w, n_channels), dtype=np.float64)
    for i, cls in enumerate(classes):
        indicator = (mask == cls).astype(np.float64)
        for j in range(spec.channels_per_class):
            signal[:, :, i * spec.channels_per_class + j] = indicator
    if spec.noise_sigma > 0.0:
        noise = rng.gaussians(h * w * n_channels).reshape(h, w, n_channels)
        signal += spec.noise_sigma * noise
    return FeatureMap(signal.astype(np.float32))


def generate_scene(spec: SynthSpec) -> tuple[LabelMask, FeatureMap]:
    """One mask and one feature map, fully determined by spec.seed; the
    mask is drawn first, then the noise, from a single PRNG stream."""
    rng = Xoshiro256StarStar(spec.seed)
    mask = _draw_mask(rng, spec)
    fmap = _draw_features(rng, spec, mask, spec.informative())
    return LabelMask(mask), fmap


def generate_complementary_pair(spec: SynthSpec) -> tuple[LabelMask, FeatureMap, FeatureMap]:
    """One mask with two feature sets: A informative only for the first
    ceil(K/2) classes, B only for the rest. Drawn from a single stream in
    the order mask, A, B."""
    if spec.num_classes < 4:
        raise ValueError("complementary pairs need num_classes >= 4")
    split = (spec.num_classes + 1) // 2
    first = tuple(range(split))
    second = tuple(range(split, spec.num_classes))
    rng = Xoshiro256StarStar(spec.seed)
    mask = _draw_mask(rng, spec)
    fmap_a = _draw_features(rng, spec, mask, first)
    fmap_b = _draw_features(rng, spec, mask, second)
    return LabelMask(mask), fmap_a, fmap_b
