"""Dice scoring, cross-dataset mean-rank ordering, and report files.

Dice is micro-aggregated: intersection/prediction/truth pixel tallies are
summed over the whole test set before the ratio is taken, so patches that
lack a class still contribute cleanly. Classes absent from both prediction
and truth score 1.0 and are flagged vacuous rather than dropped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError
from .tensorio import LabelMask


@dataclass(frozen=True)
class DiceReport:
    dataset: str
    model_set: tuple[str, ...]
    per_class_dice: tuple[float, ...]
    mean_dice: float
    vacuous: tuple[bool, ...]
    pixel_counts: tuple[tuple[int, int, int], ...]  # per class: (inter, pred, truth)

    @property
    def num_classes(self) -> int:
        return len(self.per_class_dice)

    @property
    def model_set_id(self) -> str:
        return "+".join(self.model_set)


@dataclass(frozen=True)
class RankRow:
    model: str
    scores: dict[str, float]  # dataset -> score
    ranks: dict[str, float]   # dataset -> rank (ties share averages)
    mean_rank: float
    mean_score: float
    tied: bool


@dataclass(frozen=True)
class RankTable:
    datasets: tuple[str, ...]
    rows: dict[str, RankRow]
    ordering: tuple[str, ...]  # ascending mean rank, ties lexicographic


def dice_per_class(preds: list[LabelMask], truths: list[LabelMask], num_classes: int,
                   ignore_value: int = 255, dataset: str = "",
                   model_set: tuple[str, ...] = ()) -> DiceReport:
    """Micro-aggregated per-class Dice over aligned prediction/truth pairs.

    Pixels whose truth equals ignore_value are excluded from every tally.
    """
    if num_classes < 1:
        raise ValueError("num_classes must be >= 1")
    if len(preds) != len(truths):
        raise ShapeError(f"{len(preds)} predictions vs {len(truths)} truths")
    inter = np.zeros(num_classes, dtype=np.int64)
    pred_count = np.zeros(num_classes, dtype=np.int64)
    truth_count = np.zeros(num_classes, dtype=np.int64)
    for i, (pred, truth) in enumerate(zip(preds, truths)):
        if pred.data.shape != truth.data.shape:
            raise ShapeError(
                f"pair {i}: prediction {pred.data.shape} vs truth {truth.data.shape}")
        keep = truth.data != ignore_value
        p = pred.data[keep].astype(np.int64)
        t = truth.data[keep].astype(np.int64)
        if p.size and p.max() >= num_classes:
            raise DataError(f"pair {i}: predicted class {int(p.max())} out of range")
        if t.size and t.max() >= num_classes:
            raise DataError(f"pair {i}: truth class {int(t.max())} out of range")
        inter += np.bincount(t[p == t], minlength=num_classes)
        pred_count += np.bincount(p, minlength=num_classes)
        truth_count += np.bincount(t, minlength=num_classes)

    denom = pred_count + truth_count
    vacuous = denom == 0
    dice = np.ones(num_classes)
    np.divide(2.0 * inter, denom, out=dice, where=~vacuous)
    return DiceReport(
        dataset=dataset,
        model_set=tuple(model_set),
        per_class_dice=tuple(float(d) for d in dice),
        mean_dice=float(dice.mean()),
        vacuous=tuple(bool(v) for v in vacuous),
        pixel_counts=tuple(
            (int(inter[c]), int(pred_count[c]), int(truth_count[c]))
            for c in range(num_classes)),
    )


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Descending ranks 1..N; equal values share the mean of their positions."""
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(values.shape[0])
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def rank_models(scores: dict[str, dict[str, float]]) -> RankTable:
    """Order models by mean rank across datasets.

    ``scores[dataset][model]`` must form a complete matrix. Per dataset,
    models are ranked descending by score with average-rank ties; the
    cross-dataset mean rank orders the result ascending, exact mean-rank
    ties sorting lexicographically and carrying a ``tied`` flag.
    """
    if not scores:
        raise ValueError("scores matrix is empty")
    datasets = tuple(scores.keys())
    models = sorted(scores[datasets[0]].keys())
    if not models:
        raise ValueError("scores matrix has no models")
    for d in datasets:
        if sorted(scores[d].keys()) != models:
            missing = set(models).symmetric_difference(scores[d].keys())
            raise ValueError(f"dataset {d!r}: incomplete score matrix ({sorted(missing)})")

    per_dataset_ranks = {
        d: _average_ranks(np.array([scores[d][m] for m in models])) for d in datasets}
    mean_ranks = {
        m: float(np.mean([per_dataset_ranks[d][i] for d in datasets]))
        for i, m in enumerate(models)}
    ordering = tuple(sorted(models, key=lambda m: (mean_ranks[m], m)))
    rank_values = list(mean_ranks.values())
    rows = {}
    for i, m in enumerate(models):
        rows[m] = RankRow(
            model=m,
            scores={d: float(scores[d][m]) for d in datasets},
            ranks={d: float(per_dataset_ranks[d][i]) for d in datasets},
            mean_rank=mean_ranks[m],
            mean_score=float(np.mean([scores[d][m] for d in datasets])),
            tied=rank_values.count(mean_ranks[m]) > 1,
        )
    return RankTable(datasets=datasets, rows=rows, ordering=ordering)


def _format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(headers), sep] + [line(r) for r in rows]) + "\n"


def _dice_text_table(reports: list[DiceReport]) -> str:
    """Model sets as rows, datasets as columns; datasets with more than two
    classes expand to one column per class plus the mean."""
    datasets: list[str] = []
    sets: list[str] = []
    cells: dict[tuple[str, str], DiceReport] = {}
    for rep in reports:
        if rep.dataset not in datasets:
            datasets.append(rep.dataset)
        if rep.model_set_id not in sets:
            sets.append(rep.model_set_id)
        cells[(rep.model_set_id, rep.dataset)] = rep

    columns: list[tuple[str, str, int]] = []  # header, dataset, class (-1 = mean)
    for d in datasets:
        k = max(cells[key].num_classes for key in cells if key[1] == d)
        if k > 2:
            columns.extend((f"{d}/c{c}", d, c) for c in range(k))
        columns.append((f"{d}/mean" if k > 2 else d, d, -1))

    rows = []
    for s in sets:
        row = [s]
        for _, d, c in columns:
            rep = cells.get((s, d))
            if rep is None:
                row.append("-")
            elif c < 0:
                row.append(f"{rep.mean_dice:.4f}")
            elif c < rep.num_classes:
                row.append(f"{rep.per_class_dice[c]:.4f}")
            else:
                row.append("-")
        rows.append(row)
    return _format_table(["model_set"] + [h for h, _, _ in columns], rows)


def _ranks_text_table(ranks: RankTable) -> str:
    headers = ["model", "mean_rank", "tied"]
    for d in ranks.datasets:
        headers.extend([f"rank:{d}", f"score:{d}"])
    rows = []
    for m in ranks.ordering:
        row = ranks.rows[m]
        cells = [m, f"{row.mean_rank:.2f}", "yes" if row.tied else "no"]
        for d in ranks.datasets:
            cells.extend([f"{row.ranks[d]:.2f}", f"{row.scores[d]:.4f}"])
        rows.append(cells)
    return _format_table(headers, rows)


def emit_report(reports: list[DiceReport], ranks: RankTable | None,
                path: str | Path) -> None:
    """Write `<path>` as CSV plus an aligned-text sibling `<stem>.txt`; a
    rank table additionally lands in `<stem>_ranks.csv` and the text file.

    Output bytes depend only on the inputs.
    """
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dataset", "model_set", "class", "dice", "vacuous"])
            for rep in reports:
                for c in range(rep.num_classes):
                    w.writerow([rep.dataset, rep.model_set_id, str(c),
                                f"{rep.per_class_dice[c]:.4f}",
                                "true" if rep.vacuous[c] else "false"])
                w.writerow([rep.dataset, rep.model_set_id, "mean",
                            f"{rep.mean_dice:.4f}", ""])

        text_parts = []
        if reports:
            text_parts.append(_dice_text_table(reports))
        if ranks is not None:
            text_parts.append(_ranks_text_table(ranks))
        with open(path.with_suffix(".txt"), "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(text_parts) if text_parts else "")

        if ranks is not None:
            rank_path = path.with_name(path.stem + "_ranks.csv")
            with open(rank_path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                header = ["model", "mean_rank", "mean_score", "tied"]
                for d in ranks.datasets:
                    header.extend([f"rank:{d}", f"score:{d}"])
                w.writerow(header)
                for m in ranks.ordering:
                    row = ranks.rows[m]
                    cells = [m, f"{row.mean_rank:.2f}", f"{row.mean_score:.4f}",
                             "true" if row.tied else "false"]
                    for d in ranks.datasets:
                        cells.extend([f"{row.ranks[d]:.2f}", f"{row.scores[d]:.4f}"])
                    w.writerow(cells)
    except OSError as exc:
        raise OSError(f"cannot write report near {path}: {exc}") from exc
