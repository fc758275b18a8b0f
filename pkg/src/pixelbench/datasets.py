"""Dataset manifests, reproducible train/test splits, and the static model
registry.

A manifest is a JSON file describing one dataset: its classes, an ignore
sentinel, and one entry per patch pointing at a mask file plus one feature
file per model id (paths relative to the manifest's directory). Feature
files for the same patch may differ in spatial size across models, since
each model extracts at its own native input resolution.

Schema (all keys required unless noted)::

    {
      "name": "glas",
      "num_classes": 2,
      "class_names": ["background", "gland"],
      "ignore_value": 255,
      "magnification": "20x",
      "patch_shape": [776, 524],
      "split_policy": "author_given" | "random",
      "entries": [
        {"id": "img_001",
         "mask": "masks/img_001.npy",
         "features": {"conch": "features/img_001.conch.npy"},
         "split": "train"}          // optional for random policy
      ]
    }
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError, ManifestError, SplitError
from .rng import Xoshiro256StarStar
from .tensorio import FeatureMap, LabelMask, read_tensor

SPLIT_TRAIN = "train"
SPLIT_TEST = "test"
SPLIT_UNASSIGNED = "unassigned"
_SPLITS = (SPLIT_TRAIN, SPLIT_TEST, SPLIT_UNASSIGNED)

POLICY_AUTHOR = "author_given"
POLICY_RANDOM = "random"


@dataclass(frozen=True)
class ModelRegistryEntry:
    model_id: str
    display_name: str
    backbone: str
    native_input: tuple[int, int]
    feature_kind: str  # "cls_attention_heads" | "dense_embedding"


# Static metadata for the ten benchmarked backbones. Native inputs are each
# model's published default; they are informational only.
MODEL_REGISTRY: dict[str, ModelRegistryEntry] = {
    e.model_id: e
    for e in [
        ModelRegistryEntry("virchow", "Virchow", "ViT-H", (224, 224), "cls_attention_heads"),
        ModelRegistryEntry("phikon", "Phikon", "ViT-B", (224, 224), "cls_attention_heads"),
        ModelRegistryEntry("uni", "UNI", "ViT-L", (224, 224), "cls_attention_heads"),
        ModelRegistryEntry("hipt", "HIPT", "ViT-S", (256, 256), "cls_attention_heads"),
        ModelRegistryEntry("lunit_dino", "Lunit DINO", "ViT-S", (224, 224), "cls_attention_heads"),
        ModelRegistryEntry("pathdino", "PathDino", "ViT custom", (512, 512), "cls_attention_heads"),
        ModelRegistryEntry("cellvit", "CellViT", "ViT-S", (256, 256), "dense_embedding"),
        ModelRegistryEntry("phikon_v2", "Phikon-v2", "ViT-L", (224, 224), "cls_attention_heads"),
        ModelRegistryEntry("virchow2", "Virchow2", "ViT-H", (224, 224), "cls_attention_heads"),
        ModelRegistryEntry("conch", "CONCH", "ViT-B", (448, 448), "cls_attention_heads"),
    ]
}


@dataclass(frozen=True)
class PatchEntry:
    id: str
    mask_path: Path
    feature_paths: dict[str, Path]
    split: str = SPLIT_UNASSIGNED


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    num_classes: int
    class_names: tuple[str, ...]
    ignore_value: int
    magnification: str
    patch_shape: tuple[int, int]
    split_policy: str
    entries: tuple[PatchEntry, ...]

    def train_entries(self) -> list[PatchEntry]:
        return [e for e in self.entries if e.split == SPLIT_TRAIN]

    def test_entries(self) -> list[PatchEntry]:
        return [e for e in self.entries if e.split == SPLIT_TEST]

    def load_mask(self, entry: PatchEntry) -> LabelMask:
        mask = read_tensor(entry.mask_path, ignore_value=self.ignore_value)
        if not isinstance(mask, LabelMask):
            raise DataError(f"entry {entry.id}: mask file {entry.mask_path} is not a label mask")
        bad = mask.data[(mask.data != self.ignore_value) & (mask.data >= self.num_classes)]
        if bad.size:
            raise DataError(
                f"entry {entry.id}: mask contains class {int(bad[0])} >= num_classes={self.num_classes}"
            )
        return mask

    def load_features(self, entry: PatchEntry, model_ids: list[str]) -> list[FeatureMap]:
        maps = []
        for mid in model_ids:
            if mid not in entry.feature_paths:
                raise DataError(f"entry {entry.id}: no feature file for model {mid!r}")
            fmap = read_tensor(entry.feature_paths[mid])
            if not isinstance(fmap, FeatureMap):
                raise DataError(
                    f"entry {entry.id}: feature file for model {mid!r} is not a feature map"
                )
            maps.append(fmap)
        return maps

    def validate_files(self, model_ids: list[str] | None = None) -> None:
        """Eagerly load every referenced file (the --strict path)."""
        for entry in self.entries:
            self.load_mask(entry)
            self.load_features(entry, model_ids if model_ids is not None else sorted(entry.feature_paths))


def _require(cond: bool, where: str, problem: str):
    if not cond:
        raise ManifestError(f"{where}: {problem}")


def load_manifest(path: str | Path, strict: bool = False) -> DatasetManifest:
    """Parse and validate a manifest file.

    All schema invariants are checked eagerly; the existence and
    readability of referenced mask/feature files is only checked when
    ``strict`` is set (otherwise it surfaces lazily at first load).
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ManifestError(f"{path}: cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from exc

    _require(isinstance(doc, dict), str(path), "top level must be an object")
    for key, typ in [
        ("name", str), ("num_classes", int), ("class_names", list), ("ignore_value", int),
        ("magnification", str), ("patch_shape", list), ("split_policy", str), ("entries", list),
    ]:
        _require(key in doc, str(path), f"missing key {key!r}")
        _require(isinstance(doc[key], typ) and not isinstance(doc[key], bool),
                 key, f"expected {typ.__name__}")

    num_classes = doc["num_classes"]
    _require(num_classes >= 1, "num_classes", "must be >= 1")
    names = doc["class_names"]
    _require(all(isinstance(n, str) for n in names), "class_names", "entries must be strings")
    _require(
        len(names) == num_classes,
        "class_names",
        f"has {len(names)} names but num_classes={num_classes}",
    )
    ignore = doc["ignore_value"]
    _require(0 <= ignore <= 255, "ignore_value", "must fit in uint8")
    _require(ignore >= num_classes, "ignore_value", "collides with a class index")
    shape = doc["patch_shape"]
    _require(
        len(shape) == 2 and all(isinstance(d, int) and d >= 1 for d in shape),
        "patch_shape", "must be [height, width] of positive ints",
    )
    policy = doc["split_policy"]
    _require(policy in (POLICY_AUTHOR, POLICY_RANDOM), "split_policy",
             f"must be {POLICY_AUTHOR!r} or {POLICY_RANDOM!r}")

    base = path.parent
    entries: list[PatchEntry] = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(doc["entries"]):
        where = f"entries[{i}]"
        _require(isinstance(raw, dict), where, "must be an object")
        for key, typ in [("id", str), ("mask", str), ("features", dict)]:
            _require(key in raw, where, f"missing key {key!r}")
            _require(isinstance(raw[key], typ), f"{where}.{key}", f"expected {typ.__name__}")
        eid = raw["id"]
        _require(eid not in seen_ids, f"{where}.id", f"duplicate entry id {eid!r}")
        seen_ids.add(eid)
        feats = {}
        for mid, rel in raw["features"].items():
            _require(isinstance(rel, str), f"{where}.features[{mid!r}]", "expected path string")
            feats[mid] = base / rel
        split = raw.get("split", SPLIT_UNASSIGNED)
        _require(split in _SPLITS, f"{where}.split", f"must be one of {_SPLITS}")
        if policy == POLICY_AUTHOR:
            _require(split != SPLIT_UNASSIGNED, f"{where}.split",
                     "author_given manifests need an explicit train/test tag")
        entries.append(PatchEntry(id=eid, mask_path=base / raw["mask"], feature_paths=feats, split=split))

    manifest = DatasetManifest(
        name=doc["name"],
        num_classes=num_classes,
        class_names=tuple(names),
        ignore_value=ignore,
        magnification=doc["magnification"],
        patch_shape=(shape[0], shape[1]),
        split_policy=policy,
        entries=tuple(entries),
    )
    if strict:
        manifest.validate_files()
    return manifest


def materialize_split(manifest: DatasetManifest, seed: int, test_fraction: float = 0.2) -> DatasetManifest:
    """Assign train/test tags to a random-policy manifest, deterministically.

    Entry positions are Fisher-Yates shuffled with xoshiro256**(seed); the
    first ceil((1 - test_fraction) * N) shuffled entries become train, the
    rest test. Entry *order* in the returned manifest is unchanged. A fully
    tagged author_given manifest is returned as-is.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if manifest.split_policy == POLICY_AUTHOR:
        if any(e.split == SPLIT_UNASSIGNED for e in manifest.entries):
            raise SplitError(f"{manifest.name}: author_given manifest has unassigned entries")
        return manifest
    if any(e.split != SPLIT_UNASSIGNED for e in manifest.entries):
        raise SplitError(f"{manifest.name}: random-policy entries already carry split tags")

    n = len(manifest.entries)
    order = list(range(n))
    Xoshiro256StarStar(seed).shuffle(order)
    # floor(tf*n + eps) == the exact rational value at representable
    # boundaries like 0.2 * 400; train count is then ceil((1 - tf) * n).
    test_count = int(math.floor(test_fraction * n + 1e-9))
    train_positions = set(order[: n - test_count])
    entries = tuple(
        dataclasses.replace(e, split=SPLIT_TRAIN if i in train_positions else SPLIT_TEST)
        for i, e in enumerate(manifest.entries)
    )
    return dataclasses.replace(manifest, entries=entries)
