"""Multiclass gradient-boosted trees with histogram split finding.

Written from scratch on numpy. Feature values are quantile-binned once up
front; trees split on bin indices ("value <= boundary goes left"), one tree
per class per round against a softmax objective. Training is deterministic:
bit-identical ensembles for any worker count.
"""

from __future__ import annotations

import struct
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ShapeError

MODEL_MAGIC = b"ATSGBDT1"
MODEL_VERSION = 1

_LEAF = -1


@dataclass(frozen=True)
class Hyperparams:
    rounds: int = 100
    learning_rate: float = 0.3
    max_depth: int = 6
    lambda_: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    max_bins: int = 256
    hessian_floor: float = 1e-16

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.lambda_ < 0.0 or self.gamma < 0.0 or self.min_child_weight < 0.0:
            raise ValueError("lambda_, gamma, min_child_weight must be >= 0")
        if not 2 <= self.max_bins <= 256:
            raise ValueError("max_bins must be in [2, 256]")
        if self.hessian_floor <= 0.0:
            raise ValueError("hessian_floor must be positive")


@dataclass(frozen=True)
class BinningScheme:
    """Per-feature ascending bin boundaries; bin index of value v is the
    count of boundaries strictly below v, with v == boundary landing in
    the lower bin (boundaries are inclusive upper edges)."""

    boundaries: tuple[np.ndarray, ...]

    @property
    def num_features(self) -> int:
        return len(self.boundaries)

    @property
    def bins_per_feature(self) -> np.ndarray:
        return np.array([b.shape[0] + 1 for b in self.boundaries], dtype=np.int64)

    def bin_values(self, values: np.ndarray) -> np.ndarray:
        if values.ndim != 2 or values.shape[1] != self.num_features:
            raise ShapeError(
                f"expected (rows, {self.num_features}) values, got {values.shape}")
        out = np.empty(values.shape, dtype=np.int32)
        for f, edges in enumerate(self.boundaries):
            out[:, f] = np.searchsorted(edges, values[:, f], side="left")
        return out


@dataclass(frozen=True)
class RegressionTree:
    """Flat node arrays; feature == -1 marks a leaf. Internal nodes route
    rows with bin_index <= threshold left."""

    feature: np.ndarray    # (n,) int32
    threshold: np.ndarray  # (n,) int32, bin index
    left: np.ndarray       # (n,) int32
    right: np.ndarray      # (n,) int32
    value: np.ndarray      # (n,) float64, leaf weight (unscaled)

    def __post_init__(self):
        n = self.feature.shape[0]
        for arr in (self.threshold, self.left, self.right, self.value):
            if arr.shape != (n,):
                raise ShapeError("tree arrays must agree in length")

    @property
    def num_nodes(self) -> int:
        return self.feature.shape[0]

    def leaf_values(self, binned: np.ndarray) -> np.ndarray:
        n = binned.shape[0]
        idx = np.zeros(n, dtype=np.int32)
        rows = np.arange(n)
        while True:
            feat = self.feature[idx]
            internal = feat >= 0
            if not internal.any():
                return self.value[idx]
            fb = binned[rows, np.where(internal, feat, 0)]
            nxt = np.where(fb <= self.threshold[idx], self.left[idx], self.right[idx])
            idx = np.where(internal, nxt, idx)


@dataclass(frozen=True)
class BoostedEnsemble:
    num_classes: int
    num_features: int
    rounds: int
    trees: tuple[RegressionTree, ...]  # round-major, class minor
    binning: BinningScheme
    hyper: Hyperparams
    train_losses: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.trees) != self.rounds * self.num_classes:
            raise ShapeError("ensemble must hold rounds * num_classes trees")

    def predict_proba(self, rows: np.ndarray) -> np.ndarray:
        return predict_proba(self, rows)


def build_bins(table, max_bins: int) -> BinningScheme:
    """Quantile binning of every feature column.

    Features with fewer than max_bins distinct values get one boundary per
    midpoint between consecutive distinct values; denser features get the
    k/max_bins quantiles (k = 1..max_bins-1), deduplicated.
    """
    values = table.values
    if values.shape[0] == 0:
        raise ValueError("cannot bin an empty table")
    qs = np.arange(1, max_bins) / max_bins
    boundaries = []
    for f in range(values.shape[1]):
        col = values[:, f].astype(np.float64)
        distinct = np.unique(col)
        if distinct.shape[0] < max_bins:
            edges = (distinct[:-1] + distinct[1:]) / 2.0
        else:
            edges = np.unique(np.quantile(col, qs))
        boundaries.append(edges)
    return BinningScheme(boundaries=tuple(boundaries))


def _histograms(binned, rows, g, h, width):
    """Per-feature (sum g, sum h) histograms over a row subset, float64."""
    sub = binned[rows]
    gw, hw = g[rows], h[rows]
    hg = np.empty((sub.shape[1], width))
    hh = np.empty((sub.shape[1], width))
    for f in range(sub.shape[1]):
        hg[f] = np.bincount(sub[:, f], weights=gw, minlength=width)
        hh[f] = np.bincount(sub[:, f], weights=hw, minlength=width)
    return hg, hh


def _best_split(hg, hh, bins_per_feature, hyper):
    """Max-gain (feature, bin) over inclusive-left prefix splits.

    Returns (feature, bin, G_left, H_left) or None when no candidate has
    positive gain. Ties resolve to the lowest feature, then lowest bin,
    via first-occurrence argmax over the C-ordered gain matrix.
    """
    gl = np.cumsum(hg, axis=1)
    hl = np.cumsum(hh, axis=1)
    g_tot = gl[:, -1:]
    h_tot = hl[:, -1:]
    gr = g_tot - gl
    hr = h_tot - hl
    lam = hyper.lambda_
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 0.5 * (gl ** 2 / (hl + lam) + gr ** 2 / (hr + lam)
                      - g_tot ** 2 / (h_tot + lam)) - hyper.gamma
    cols = np.arange(hg.shape[1])
    valid = (hl >= hyper.min_child_weight) & (hr >= hyper.min_child_weight)
    valid &= (hl > 0.0) & (hr > 0.0)
    # bin b = last real bin routes everything left; padding bins likewise
    valid &= cols[None, :] < (bins_per_feature[:, None] - 1)
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))
    f, b = divmod(flat, gain.shape[1])
    if not gain[f, b] > 0.0:
        return None
    return f, b, gl[f, b], hl[f, b]


class _Node:
    __slots__ = ("nid", "rows", "g_sum", "h_sum", "depth", "hist")

    def __init__(self, nid, rows, g_sum, h_sum, depth, hist):
        self.nid = nid
        self.rows = rows
        self.g_sum = g_sum
        self.h_sum = h_sum
        self.depth = depth
        self.hist = hist


def _grow_tree(binned, bins_per_feature, g, h, hyper, row_values):
    """Level-order growth of one regression tree; fills row_values with the
    leaf weight assigned to every training row."""
    width = int(bins_per_feature.max())
    feature, threshold, left, right, value = [_LEAF], [_LEAF], [_LEAF], [_LEAF], [0.0]
    all_rows = np.arange(binned.shape[0])
    queue = deque([_Node(0, all_rows, float(g.sum()), float(h.sum()), 0, None)])
    while queue:
        node = queue.popleft()
        split = None
        if node.depth < hyper.max_depth:
            if node.hist is None:
                node.hist = _histograms(binned, node.rows, g, h, width)
            split = _best_split(node.hist[0], node.hist[1], bins_per_feature, hyper)
        if split is None:
            w = -node.g_sum / (node.h_sum + hyper.lambda_)
            value[node.nid] = w
            row_values[node.rows] = w
            continue
        f, b, g_left, h_left = split
        go_left = binned[node.rows, f] <= b
        rows_l = node.rows[go_left]
        rows_r = node.rows[~go_left]
        # smaller child is counted directly; sibling = parent - smaller
        if rows_l.shape[0] <= rows_r.shape[0]:
            hist_l = _histograms(binned, rows_l, g, h, width)
            hist_r = (node.hist[0] - hist_l[0], node.hist[1] - hist_l[1])
        else:
            hist_r = _histograms(binned, rows_r, g, h, width)
            hist_l = (node.hist[0] - hist_r[0], node.hist[1] - hist_r[1])
        node.hist = None
        lid, rid = len(feature), len(feature) + 1
        feature[node.nid] = f
        threshold[node.nid] = b
        left[node.nid] = lid
        right[node.nid] = rid
        for _ in range(2):
            feature.append(_LEAF)
            threshold.append(_LEAF)
            left.append(_LEAF)
            right.append(_LEAF)
            value.append(0.0)
        queue.append(_Node(lid, rows_l, g_left, h_left, node.depth + 1, hist_l))
        queue.append(_Node(rid, rows_r, node.g_sum - g_left, node.h_sum - h_left,
                           node.depth + 1, hist_r))
    return RegressionTree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.int32),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        value=np.array(value, dtype=np.float64),
    )


def softmax_rows(margins: np.ndarray) -> np.ndarray:
    shifted = margins - margins.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_loss(margins: np.ndarray, labels: np.ndarray) -> float:
    m = margins.max(axis=1)
    lse = np.log(np.exp(margins - m[:, None]).sum(axis=1)) + m
    return float(np.mean(lse - margins[np.arange(labels.shape[0]), labels]))


def train(table, num_classes: int, hyper: Hyperparams = Hyperparams(),
          seed: int = 0, workers: int | None = None) -> BoostedEnsemble:
    """Boost `hyper.rounds` rounds of one-tree-per-class against softmax
    cross-entropy.

    Per round: p = softmax(margins); per class k the tree fits gradients
    g = p_k - [y == k] and hessians h = max(2 p_k (1 - p_k), floor), and
    its leaf weights -G/(H+lambda) are added to the margins scaled by the
    learning rate. `seed` is reserved (no stochastic subsampling yet);
    `workers` only distributes the per-class tree growth and never changes
    the result.
    """
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    values, labels = table.values, np.asarray(table.labels)
    if values.shape[0] == 0:
        raise ValueError("cannot train on an empty table")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise DataError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{int(labels.min())}, {int(labels.max())}]")

    binning = build_bins(table, hyper.max_bins)
    binned = binning.bin_values(values)
    bins_per_feature = binning.bins_per_feature
    n = values.shape[0]
    margins = np.zeros((n, num_classes))
    one_hot_rows = np.arange(n)

    def fit_class(k, g_all, h_all):
        row_values = np.empty(n)
        tree = _grow_tree(binned, bins_per_feature, g_all[:, k], h_all[:, k],
                          hyper, row_values)
        return tree, row_values

    trees: list[RegressionTree] = []
    losses: list[float] = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers and workers > 1 else None
    try:
        for _ in range(hyper.rounds):
            p = softmax_rows(margins)
            g_all = p.copy()
            g_all[one_hot_rows, labels] -= 1.0
            h_all = np.maximum(2.0 * p * (1.0 - p), hyper.hessian_floor)
            if pool is not None:
                grown = list(pool.map(lambda k: fit_class(k, g_all, h_all),
                                      range(num_classes)))
            else:
                grown = [fit_class(k, g_all, h_all) for k in range(num_classes)]
            for k, (tree, row_values) in enumerate(grown):
                trees.append(tree)
                margins[:, k] += hyper.learning_rate * row_values
            losses.append(_log_loss(margins, labels))
    finally:
        if pool is not None:
            pool.shutdown()

    return BoostedEnsemble(
        num_classes=num_classes,
        num_features=values.shape[1],
        rounds=hyper.rounds,
        trees=tuple(trees),
        binning=binning,
        hyper=hyper,
        train_losses=tuple(losses),
    )


def predict_proba(model: BoostedEnsemble, rows) -> np.ndarray:
    """Per-row class probabilities; rows sharing every bin share outputs."""
    values = rows.values if hasattr(rows, "values") else np.asarray(rows)
    if values.ndim != 2 or values.shape[1] != model.num_features:
        raise ShapeError(
            f"expected (rows, {model.num_features}) features, got {values.shape}")
    binned = model.binning.bin_values(values)
    margins = np.zeros((values.shape[0], model.num_classes))
    for t, tree in enumerate(model.trees):
        margins[:, t % model.num_classes] += model.hyper.learning_rate * tree.leaf_values(binned)
    return softmax_rows(margins)


def _pack_array(arr, dtype) -> bytes:
    return np.ascontiguousarray(arr, dtype=dtype).tobytes()


def save_model(model: BoostedEnsemble, path: str | Path) -> None:
    """Write the versioned little-endian binary model format."""
    h = model.hyper
    out = [MODEL_MAGIC,
           struct.pack("<6I", MODEL_VERSION, model.num_classes, model.num_features,
                       model.rounds, h.max_depth, h.max_bins),
           struct.pack("<5d", h.learning_rate, h.lambda_, h.gamma,
                       h.min_child_weight, h.hessian_floor)]
    for edges in model.binning.boundaries:
        out.append(struct.pack("<I", edges.shape[0]))
        out.append(_pack_array(edges, "<f8"))
    for tree in model.trees:
        out.append(struct.pack("<I", tree.num_nodes))
        out.append(_pack_array(tree.feature, "<i4"))
        out.append(_pack_array(tree.threshold, "<i4"))
        out.append(_pack_array(tree.left, "<i4"))
        out.append(_pack_array(tree.right, "<i4"))
        out.append(_pack_array(tree.value, "<f8"))
    try:
        with open(path, "wb") as fh:
            fh.write(b"".join(out))
    except OSError as exc:
        raise OSError(f"cannot write model to {path}: {exc}") from exc


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.blob):
            raise FormatError(f"{self.path}: truncated model file")
        chunk = self.blob[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).copy()


def load_model(path: str | Path) -> BoostedEnsemble:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read model from {path}: {exc}") from exc
    r = _Reader(blob, path)
    if r.take(len(MODEL_MAGIC)) != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model file (bad magic)")
    version, num_classes, num_features, rounds, max_depth, max_bins = struct.unpack(
        "<6I", r.take(24))
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model format version {version}")
    learning_rate, lambda_, gamma, min_child_weight, hessian_floor = struct.unpack(
        "<5d", r.take(40))
    try:
        hyper = Hyperparams(rounds=rounds, learning_rate=learning_rate,
                            max_depth=max_depth, lambda_=lambda_, gamma=gamma,
                            min_child_weight=min_child_weight, max_bins=max_bins,
                            hessian_floor=hessian_floor)
    except ValueError as exc:
        raise FormatError(f"{path}: invalid hyperparameters: {exc}") from exc

    boundaries = []
    for _ in range(num_features):
        (count,) = struct.unpack("<I", r.take(4))
        edges = r.array("<f8", count)
        if count and not np.all(np.diff(edges) > 0):
            raise FormatError(f"{path}: bin boundaries not strictly increasing")
        boundaries.append(edges)

    trees = []
    for _ in range(rounds * num_classes):
        (n_nodes,) = struct.unpack("<I", r.take(4))
        if n_nodes < 1:
            raise FormatError(f"{path}: tree with no nodes")
        tree = RegressionTree(
            feature=r.array("<i4", n_nodes),
            threshold=r.array("<i4", n_nodes),
            left=r.array("<i4", n_nodes),
            right=r.array("<i4", n_nodes),
            value=r.array("<f8", n_nodes),
        )
        bad = (tree.feature >= 0) & ((tree.left < 0) | (tree.right < 0))
        if bad.any() or not np.isfinite(tree.value).all():
            raise FormatError(f"{path}: malformed tree nodes")
        trees.append(tree)
    if r.pos != len(blob):
        raise FormatError(f"{path}: {len(blob) - r.pos} trailing bytes after model")

    return BoostedEnsemble(
        num_classes=num_classes,
        num_features=num_features,
        rounds=rounds,
        trees=tuple(trees),
        binning=BinningScheme(boundaries=tuple(boundaries)),
        hyper=hyper,
    )
