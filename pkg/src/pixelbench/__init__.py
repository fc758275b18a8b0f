"""Decoder-free benchmarking of dense feature maps for semantic
segmentation: per-pixel boosted-tree classification, Dice scoring, and
cross-dataset model ranking, with a deterministic synthetic data path."""

from .datasets import (MODEL_REGISTRY, DatasetManifest, ModelRegistryEntry,
                       PatchEntry, load_manifest, materialize_split)
from .errors import (ConfigError, DataError, FormatError, ManifestError,
                     PixelbenchError, ShapeError, SplitError,
                     UnsupportedDtypeError)
from .evaluation import (DiceReport, RankRow, RankTable, dice_per_class,
                         emit_report, rank_models)
from .features import (PixelTable, SamplingPolicy, build_pixel_table,
                       concat_models, predict_mask, upsample_bilinear)
from .gbdt import (BinningScheme, BoostedEnsemble, Hyperparams,
                   RegressionTree, build_bins, load_model, predict_proba,
                   save_model, train)
from .rng import SplitMix64, Xoshiro256StarStar, derive_stream_seed, fnv1a64
from .synth import SynthSpec, generate_complementary_pair, generate_scene
from .tensorio import FeatureMap, LabelMask, read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "MODEL_REGISTRY", "DatasetManifest", "ModelRegistryEntry", "PatchEntry",
    "load_manifest", "materialize_split",
    "PixelbenchError", "FormatError", "UnsupportedDtypeError", "DataError",
    "ShapeError", "ManifestError", "SplitError", "ConfigError",
    "DiceReport", "RankRow", "RankTable", "dice_per_class", "emit_report",
    "rank_models",
    "PixelTable", "SamplingPolicy", "build_pixel_table", "concat_models",
    "predict_mask", "upsample_bilinear",
    "BinningScheme", "BoostedEnsemble", "Hyperparams", "RegressionTree",
    "build_bins", "load_model", "predict_proba", "save_model", "train",
    "SplitMix64", "Xoshiro256StarStar", "derive_stream_seed", "fnv1a64",
    "SynthSpec", "generate_complementary_pair", "generate_scene",
    "FeatureMap", "LabelMask", "read_tensor", "write_tensor",
    "__version__",
]
