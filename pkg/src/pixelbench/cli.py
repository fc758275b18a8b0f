"""Command-line entry point.

Subcommands mirror the pipeline stages::

    pixelbench synth     --out data/ --classes 4 --complementary
    pixelbench train     --manifest data/manifest.json --models synthA --out run/
    pixelbench predict   --manifest data/manifest.json --models synthA \
                         --model run/model.bin --out run/preds/
    pixelbench evaluate  --manifest data/manifest.json --models synthA \
                         --model run/model.bin --out run/
    pixelbench benchmark --manifests d1.json,d2.json \
                         --model-sets synthA,synthB,synthA+synthB --out run/
    pixelbench rank      --scores scores.csv --out run/

Any flag may instead come from a JSON file via --config (keys named after
the flag, dashes as underscores); explicit flags win. Multi-model feature
concatenation is just a model set with more than one id. Exit codes:
0 success, 2 configuration or validation problem, 3 data problem,
4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
import traceback
from pathlib import Path
from types import SimpleNamespace

from . import datasets, evaluation, features, gbdt, synth
from .errors import (ConfigError, DataError, FormatError, ManifestError,
                     PixelbenchError, ShapeError, SplitError)
from .rng import derive_stream_seed
from .tensorio import write_tensor

_CONFIG_EXIT = 2
_DATA_EXIT = 3
_INTERNAL_EXIT = 4

_HYPER_DEFAULTS = {
    "rounds": 100, "learning_rate": 0.3, "max_depth": 6, "lambda_": 1.0,
    "gamma": 0.0, "min_child_weight": 1.0, "max_bins": 256, "hessian_floor": 1e-16,
}
_COMMON_DEFAULTS = {
    "seed": 0, "out": None, "strict": False, "deterministic": True, "threads": None,
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return doc


def _merge(args: argparse.Namespace, defaults: dict) -> SimpleNamespace:
    """Flag value if given, else config-file value, else default."""
    config = _load_config(getattr(args, "config", None))
    unknown = set(config) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = {}
    for key, default in defaults.items():
        v = getattr(args, key, None)
        if v is None:
            v = config.get(key, default)
        merged[key] = v
    return SimpleNamespace(**merged)


def _parse_id_list(raw) -> list[str]:
    if isinstance(raw, (list, tuple)):
        items = [str(x) for x in raw]
    else:
        items = [s.strip() for s in str(raw).split(",")]
    items = [s for s in items if s]
    if not items:
        raise ConfigError("expected a non-empty comma-separated list")
    return items


def _require_out(cfg) -> Path:
    if cfg.out is None:
        raise ConfigError("--out is required")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _hyper_from(cfg) -> gbdt.Hyperparams:
    return gbdt.Hyperparams(**{k: getattr(cfg, k) for k in _HYPER_DEFAULTS})


def _prepared_manifest(cfg) -> datasets.DatasetManifest:
    if cfg.manifest is None:
        raise ConfigError("--manifest is required")
    manifest = datasets.load_manifest(cfg.manifest, strict=cfg.strict)
    if all(e.split != datasets.SPLIT_UNASSIGNED for e in manifest.entries):
        return manifest
    return datasets.materialize_split(
        manifest, derive_stream_seed(cfg.seed, "split", manifest.name),
        test_fraction=cfg.test_fraction)


def _entries_for(manifest, split: str):
    if split == "train":
        return manifest.train_entries()
    if split == "test":
        return manifest.test_entries()
    if split == "all":
        return list(manifest.entries)
    raise ConfigError(f"--split must be train, test, or all, not {split!r}")


def _train_on(manifest, model_ids, cfg, sample_seed):
    entries = manifest.train_entries()
    if not entries:
        raise ConfigError(f"{manifest.name}: train split is empty")
    policy = features.SamplingPolicy(
        max_pixels_per_class_per_image=cfg.max_pixels_per_class, seed=sample_seed)
    table = features.build_pixel_table(
        entries, model_ids, manifest, policy,
        ignore_value=manifest.ignore_value, workers=cfg.threads)
    return gbdt.train(table, manifest.num_classes, _hyper_from(cfg),
                      seed=cfg.seed, workers=cfg.threads), table


def _evaluate_on(manifest, model_ids, ensemble, split="test"):
    entries = _entries_for(manifest, split)
    if not entries:
        raise ConfigError(f"{manifest.name}: {split} split is empty")
    preds, truths = [], []
    for entry in entries:
        truth = manifest.load_mask(entry)
        fmaps = manifest.load_features(entry, model_ids)
        stacked = features.concat_models(fmaps, truth.height, truth.width)
        try:
            preds.append(features.predict_mask(ensemble, stacked))
        except ShapeError as exc:
            raise ShapeError(f"entry {entry.id}: {exc}") from exc
        truths.append(truth)
    return evaluation.dice_per_class(
        preds, truths, manifest.num_classes, manifest.ignore_value,
        dataset=manifest.name, model_set=tuple(model_ids))


def _read_scores_csv(path: str) -> dict[str, dict[str, float]]:
    scores: dict[str, dict[str, float]] = {}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or \
                    [f.strip() for f in reader.fieldnames] != ["dataset", "model", "score"]:
                raise ConfigError(
                    f"{path}: scores CSV must have header dataset,model,score")
            for i, row in enumerate(reader):
                try:
                    score = float(row["score"])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{path}: bad score on data row {i + 1}") from exc
                scores.setdefault(row["dataset"], {})[row["model"]] = score
    except OSError as exc:
        raise ConfigError(f"cannot read scores {path}: {exc}") from exc
    if not scores:
        raise ConfigError(f"{path}: scores CSV has no data rows")
    return scores


def cmd_synth(args) -> int:
    cfg = _merge(args, {
        **_COMMON_DEFAULTS,
        "entries": 12, "height": 64, "width": 64, "classes": 4, "blobs": 12,
        "noise_sigma": 0.1, "channels_per_class": 2, "informative": None,
        "complementary": False,
    })
    out = _require_out(cfg)
    informative = None
    if cfg.informative is not None:
        informative = tuple(int(c) for c in _parse_id_list(cfg.informative))
    base = synth.SynthSpec(
        height=cfg.height, width=cfg.width, num_classes=cfg.classes,
        blob_count=cfg.blobs, noise_sigma=cfg.noise_sigma,
        informative_classes=informative, channels_per_class=cfg.channels_per_class,
        seed=cfg.seed)

    (out / "masks").mkdir(exist_ok=True)
    (out / "features").mkdir(exist_ok=True)
    model_ids = ["synthA", "synthB"] if cfg.complementary else ["synth"]
    entries = []
    for i in range(cfg.entries):
        eid = f"scene_{i:04d}"
        spec = dataclasses.replace(base, seed=derive_stream_seed(cfg.seed, "scene", i))
        if cfg.complementary:
            mask, fmap_a, fmap_b = synth.generate_complementary_pair(spec)
            maps = [fmap_a, fmap_b]
        else:
            mask, fmap = synth.generate_scene(spec)
            maps = [fmap]
        write_tensor(mask, out / "masks" / f"{eid}.npy")
        feats = {}
        for mid, fmap in zip(model_ids, maps):
            rel = f"features/{eid}.{mid}.npy"
            write_tensor(fmap, out / rel)
            feats[mid] = rel
        entries.append({"id": eid, "mask": f"masks/{eid}.npy", "features": feats})

    manifest = {
        "name": "synthetic",
        "num_classes": cfg.classes,
        "class_names": [f"class_{k}" for k in range(cfg.classes)],
        "ignore_value": 255,
        "magnification": "synthetic",
        "patch_shape": [cfg.height, cfg.width],
        "split_policy": "random",
        "entries": entries,
    }
    with open(out / "manifest.json", "w", encoding="utf-8", newline="") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {cfg.entries} scenes ({', '.join(model_ids)}) to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _merge(args, {
        **_COMMON_DEFAULTS, **_HYPER_DEFAULTS,
        "manifest": None, "models": None, "max_pixels_per_class": 2000,
        "test_fraction": 0.2,
    })
    if cfg.models is None:
        raise ConfigError("--models is required")
    model_ids = _parse_id_list(cfg.models)
    out = _require_out(cfg)
    started = time.perf_counter()
    manifest = _prepared_manifest(cfg)
    ensemble, table = _train_on(
        manifest, model_ids, cfg, derive_stream_seed(cfg.seed, "sample"))

    model_path = out / "model.bin"
    gbdt.save_model(ensemble, model_path)
    with open(out / "train_log.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "train_loss"])
        for r, loss in enumerate(ensemble.train_losses, start=1):
            w.writerow([r, f"{loss:.6f}"])
    print(f"trained {ensemble.rounds} rounds x {ensemble.num_classes} classes "
          f"on {table.num_rows} pixels ({table.num_features} features); "
          f"model -> {model_path}")
    if not cfg.deterministic:
        print(f"elapsed {time.perf_counter() - started:.2f}s")
    return 0


def cmd_predict(args) -> int:
    cfg = _merge(args, {
        **_COMMON_DEFAULTS,
        "manifest": None, "models": None, "model": None, "split": "test",
        "test_fraction": 0.2,
    })
    if cfg.models is None:
        raise ConfigError("--models is required")
    if cfg.model is None:
        raise ConfigError("--model is required")
    model_ids = _parse_id_list(cfg.models)
    out = _require_out(cfg)
    manifest = _prepared_manifest(cfg)
    ensemble = gbdt.load_model(cfg.model)
    entries = _entries_for(manifest, cfg.split)
    for entry in entries:
        mask = manifest.load_mask(entry)
        fmaps = manifest.load_features(entry, model_ids)
        stacked = features.concat_models(fmaps, mask.height, mask.width)
        try:
            pred = features.predict_mask(ensemble, stacked)
        except ShapeError as exc:
            raise ShapeError(f"entry {entry.id}: {exc}") from exc
        write_tensor(pred, out / f"{entry.id}.npy")
    print(f"wrote {len(entries)} predicted masks to {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _merge(args, {
        **_COMMON_DEFAULTS,
        "manifest": None, "models": None, "model": None, "split": "test",
        "test_fraction": 0.2,
    })
    if cfg.models is None:
        raise ConfigError("--models is required")
    if cfg.model is None:
        raise ConfigError("--model is required")
    model_ids = _parse_id_list(cfg.models)
    out = _require_out(cfg)
    manifest = _prepared_manifest(cfg)
    ensemble = gbdt.load_model(cfg.model)
    report = _evaluate_on(manifest, model_ids, ensemble, split=cfg.split)
    evaluation.emit_report([report], None, out / "report.csv")
    for c, d in enumerate(report.per_class_dice):
        flag = " (vacuous)" if report.vacuous[c] else ""
        print(f"{manifest.name} class {c}: dice {d:.4f}{flag}")
    print(f"{manifest.name} mean dice: {report.mean_dice:.4f}")
    return 0


def cmd_benchmark(args) -> int:
    cfg = _merge(args, {
        **_COMMON_DEFAULTS, **_HYPER_DEFAULTS,
        "manifests": None, "model_sets": None, "scores": None,
        "max_pixels_per_class": 2000, "test_fraction": 0.2,
    })
    out = _require_out(cfg)
    reports: list[evaluation.DiceReport] = []
    if cfg.scores is not None:
        scores = _read_scores_csv(cfg.scores)
    else:
        if cfg.manifests is None or cfg.model_sets is None:
            raise ConfigError("benchmark needs --scores, or --manifests with --model-sets")
        manifest_paths = _parse_id_list(cfg.manifests)
        model_sets = [_parse_id_list(s.replace("+", ","))
                      for s in _parse_id_list(cfg.model_sets)]
        scores = {}
        for mpath in manifest_paths:
            manifest = _prepared_manifest(SimpleNamespace(
                manifest=mpath, strict=cfg.strict, seed=cfg.seed,
                test_fraction=cfg.test_fraction))
            for model_ids in model_sets:
                set_id = "+".join(model_ids)
                ensemble, _ = _train_on(
                    manifest, model_ids, cfg,
                    derive_stream_seed(cfg.seed, "sample", manifest.name, set_id))
                report = _evaluate_on(manifest, model_ids, ensemble)
                reports.append(report)
                scores.setdefault(manifest.name, {})[set_id] = report.mean_dice
                print(f"{manifest.name} {set_id}: mean dice {report.mean_dice:.4f}")

    try:
        table = evaluation.rank_models(scores)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    evaluation.emit_report(reports, table, out / "benchmark.csv")
    for pos, m in enumerate(table.ordering, start=1):
        row = table.rows[m]
        flag = " [tied]" if row.tied else ""
        print(f"{pos}. {m} (mean rank {row.mean_rank:.2f}){flag}")
    return 0


def cmd_rank(args) -> int:
    cfg = _merge(args, {**_COMMON_DEFAULTS, "scores": None})
    if cfg.scores is None:
        raise ConfigError("--scores is required")
    out = _require_out(cfg)
    scores = _read_scores_csv(cfg.scores)
    try:
        table = evaluation.rank_models(scores)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    evaluation.emit_report([], table, out / "rank.csv")
    for pos, m in enumerate(table.ordering, start=1):
        row = table.rows[m]
        flag = " [tied]" if row.tied else ""
        print(f"{pos}. {m} (mean rank {row.mean_rank:.2f}){flag}")
    return 0


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file supplying any flag; flags override")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--strict", action="store_true", default=None,
                   help="validate every referenced tensor file up front")
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction,
                   default=None, help="suppress wall-clock output (default on)")
    p.add_argument("--threads", type=int, help="worker threads (default serial)")


def _add_hyper(p: argparse.ArgumentParser):
    p.add_argument("--rounds", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--max-depth", type=int, dest="max_depth")
    p.add_argument("--lambda", type=float, dest="lambda_", help="L2 leaf regularizer")
    p.add_argument("--gamma", type=float, help="minimum split gain")
    p.add_argument("--min-child-weight", type=float, dest="min_child_weight")
    p.add_argument("--max-bins", type=int, dest="max_bins")
    p.add_argument("--hessian-floor", type=float, dest="hessian_floor")


def _add_sampling(p: argparse.ArgumentParser):
    p.add_argument("--max-pixels-per-class", type=int, dest="max_pixels_per_class",
                   help="per-class per-image sampling cap (default 2000)")
    p.add_argument("--test-fraction", type=float, dest="test_fraction",
                   help="held-out fraction for random splits (default 0.2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pixelbench",
        description="Decoder-free segmentation benchmarking on dense feature maps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    _add_common(p)
    p.add_argument("--entries", type=int, help="number of scenes (default 12)")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--blobs", type=int)
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--channels-per-class", type=int, dest="channels_per_class")
    p.add_argument("--informative", help="comma-separated informative class ids")
    p.add_argument("--complementary", action="store_true", default=None,
                   help="emit synthA/synthB complementary feature sets")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit the boosted-tree classifier")
    _add_common(p)
    _add_hyper(p)
    _add_sampling(p)
    p.add_argument("--manifest")
    p.add_argument("--models", help="ordered comma-separated model ids; >1 concatenates")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write predicted masks for a split")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--models")
    p.add_argument("--model", help="trained model file")
    p.add_argument("--split", choices=["train", "test", "all"])
    p.add_argument("--test-fraction", type=float, dest="test_fraction")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="Dice report for a trained model")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--models")
    p.add_argument("--model", help="trained model file")
    p.add_argument("--split", choices=["train", "test", "all"])
    p.add_argument("--test-fraction", type=float, dest="test_fraction")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark",
                       help="score dataset x model-set cells and rank them")
    _add_common(p)
    _add_hyper(p)
    _add_sampling(p)
    p.add_argument("--manifests", help="comma-separated manifest paths")
    p.add_argument("--model-sets", dest="model_sets",
                   help="comma-separated sets; join ids with + inside a set")
    p.add_argument("--scores", help="precomputed dataset,model,score CSV")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("rank", help="rank models from a precomputed scores CSV")
    _add_common(p)
    p.add_argument("--scores")
    p.set_defaults(func=cmd_rank)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ManifestError, SplitError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _CONFIG_EXIT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _CONFIG_EXIT
    except (FormatError, DataError, ShapeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _DATA_EXIT
    except PixelbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _INTERNAL_EXIT
    except Exception:
        traceback.print_exc()
        return _INTERNAL_EXIT


if __name__ == "__main__":
    sys.exit(main())
