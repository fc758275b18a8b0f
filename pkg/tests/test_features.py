"""Bilinear upsampling against a scalar oracle, channel concatenation, the
stratified pixel sampler, and mask prediction."""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixelbench.datasets import PatchEntry
from pixelbench.errors import ShapeError
from pixelbench.features import (PixelTable, SamplingPolicy, build_pixel_table,
                                 concat_models, predict_mask, upsample_bilinear)
from pixelbench.gbdt import Hyperparams, train
from pixelbench.tensorio import FeatureMap, LabelMask

from oracles import bilinear_oracle


def fmap_from(rows, channels=1):
    arr = np.asarray(rows, dtype=np.float32)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], channels, axis=2)
    return FeatureMap(arr)


class TestUpsampleBilinear:
    def test_identity_is_bit_exact(self):
        rng = np.random.default_rng(1)
        data = rng.normal(size=(5, 7, 3)).astype(np.float32)
        out = upsample_bilinear(FeatureMap(data), 5, 7)
        assert np.array_equal(out.data, data)

    def test_constant_stays_constant(self):
        out = upsample_bilinear(fmap_from(np.full((3, 3), 2.5)), 10, 17)
        assert np.all(out.data == np.float32(2.5))

    def test_2x2_to_4x4_matches_oracle(self):
        src = fmap_from([[0.0, 1.0], [2.0, 3.0]])
        out = upsample_bilinear(src, 4, 4)
        want = bilinear_oracle(src.data.astype(np.float64), 4, 4)
        assert out.data[0, 0, 0] == 0.0  # corner clamps to source (0, 0)
        np.testing.assert_allclose(out.data, want, atol=1e-6)

    def test_random_cases_match_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            h, w, c = rng.integers(1, 9, 3)
            oh, ow = rng.integers(1, 17, 2)
            src = rng.normal(size=(h, w, c)).astype(np.float32)
            out = upsample_bilinear(FeatureMap(src), int(oh), int(ow))
            want = bilinear_oracle(src.astype(np.float64), int(oh), int(ow))
            np.testing.assert_allclose(out.data, want, atol=1e-5)

    def test_range_preserved(self):
        rng = np.random.default_rng(3)
        src = rng.normal(size=(4, 6, 2)).astype(np.float32)
        out = upsample_bilinear(FeatureMap(src), 13, 3)
        for c in range(2):
            assert out.data[:, :, c].min() >= src[:, :, c].min()
            assert out.data[:, :, c].max() <= src[:, :, c].max()

    @given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
    @settings(max_examples=30, deadline=None)
    def test_linearity(self, seed, a, b):
        rng = np.random.default_rng(seed)
        f = rng.normal(size=(3, 4, 2)).astype(np.float32)
        g = rng.normal(size=(3, 4, 2)).astype(np.float32)
        lhs = upsample_bilinear(FeatureMap(
            (a * f + b * g).astype(np.float32)), 7, 9).data
        rhs = (a * upsample_bilinear(FeatureMap(f), 7, 9).data
               + b * upsample_bilinear(FeatureMap(g), 7, 9).data)
        np.testing.assert_allclose(lhs, rhs, atol=1e-5)

    def test_downscale_also_works(self):
        src = fmap_from(np.arange(64, dtype=np.float32).reshape(8, 8))
        out = upsample_bilinear(src, 2, 2)
        want = bilinear_oracle(src.data.astype(np.float64), 2, 2)
        np.testing.assert_allclose(out.data, want, atol=1e-5)

    def test_bad_dims_rejected(self):
        with pytest.raises(ValueError):
            upsample_bilinear(fmap_from([[1.0]]), 0, 4)


class TestConcatModels:
    def test_singleton_equals_upsample(self):
        src = fmap_from([[0.0, 1.0], [2.0, 3.0]], channels=2)
        assert np.array_equal(concat_models([src], 5, 5).data,
                              upsample_bilinear(src, 5, 5).data)

    def test_channel_arithmetic(self):
        rng = np.random.default_rng(0)
        maps = [FeatureMap(rng.random((3, 3, c)).astype(np.float32))
                for c in (12, 5, 64)]
        assert concat_models(maps, 6, 6).channels == 81

    def test_blocks_recoverable(self):
        rng = np.random.default_rng(5)
        a = FeatureMap(rng.random((4, 4, 2)).astype(np.float32))
        b = FeatureMap(rng.random((4, 4, 3)).astype(np.float32))
        out = concat_models([a, b], 4, 4)
        assert np.array_equal(out.data[:, :, :2], a.data)
        assert np.array_equal(out.data[:, :, 2:], b.data)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            concat_models([], 4, 4)


class ArraySource:
    """In-memory stand-in for a DatasetManifest."""

    def __init__(self, masks, feats):
        self.masks = masks
        self.feats = feats

    def load_mask(self, entry):
        return self.masks[entry.id]

    def load_features(self, entry, model_ids):
        return [self.feats[entry.id][m] for m in model_ids]


def entry(eid):
    return PatchEntry(id=eid, mask_path=Path("unused"), feature_paths={})


def checkerboard_source(seed=0):
    rng = np.random.default_rng(seed)
    masks, feats = {}, {}
    for eid in ("a", "b"):
        mask = rng.integers(0, 3, (10, 10)).astype(np.uint8)
        masks[eid] = LabelMask(mask)
        feats[eid] = {"m": FeatureMap(rng.random((10, 10, 4)).astype(np.float32))}
    return ArraySource(masks, feats)


class TestBuildPixelTable:
    def test_cap_semantics(self):
        mask = np.zeros((10, 10), np.uint8)
        mask.flat[60:] = 1  # 60 pixels class 0, 40 class 1
        src = ArraySource({"a": LabelMask(mask)},
                          {"a": {"m": FeatureMap(np.ones((10, 10, 2), np.float32))}})
        table = build_pixel_table([entry("a")], ["m"], src,
                                  SamplingPolicy(max_pixels_per_class_per_image=50, seed=0))
        assert table.num_rows == 50 + 40
        assert np.sum(table.labels == 0) == 50
        assert np.sum(table.labels == 1) == 40

    def test_all_ignore_contributes_nothing(self):
        mask = np.full((6, 6), 255, np.uint8)
        src = ArraySource({"a": LabelMask(mask)},
                          {"a": {"m": FeatureMap(np.ones((6, 6, 2), np.float32))}})
        table = build_pixel_table([entry("a")], ["m"], src, SamplingPolicy(seed=0))
        assert table.num_rows == 0

    def test_under_cap_keeps_row_major_order(self):
        mask = np.zeros((3, 3), np.uint8)
        mask[1, 1] = 1
        feat = np.arange(9, dtype=np.float32).reshape(3, 3, 1)
        src = ArraySource({"a": LabelMask(mask)}, {"a": {"m": FeatureMap(feat)}})
        table = build_pixel_table([entry("a")], ["m"], src, SamplingPolicy(seed=0))
        class0 = table.values[table.labels == 0, 0]
        assert class0.tolist() == [0, 1, 2, 3, 5, 6, 7, 8]
        assert table.provenance[0] == ("a", 0, 0)
        assert ("a", 1, 1) in table.provenance

    def test_worker_count_invariance(self):
        src = checkerboard_source()
        entries = [entry("a"), entry("b")]
        policy = SamplingPolicy(max_pixels_per_class_per_image=20, seed=9)
        serial = build_pixel_table(entries, ["m"], src, policy)
        threaded = build_pixel_table(entries, ["m"], src, policy, workers=4)
        assert np.array_equal(serial.values, threaded.values)
        assert np.array_equal(serial.labels, threaded.labels)
        assert serial.provenance == threaded.provenance

    def test_rows_follow_entry_then_class_order(self):
        src = checkerboard_source()
        table = build_pixel_table([entry("a"), entry("b")], ["m"], src,
                                  SamplingPolicy(seed=1))
        ids = [p[0] for p in table.provenance]
        assert ids == sorted(ids)  # "a" rows before "b" rows
        labels_a = table.labels[:ids.count("a")]
        assert np.all(np.diff(labels_a) >= 0)

    def test_values_match_source_pixels(self):
        src = checkerboard_source()
        table = build_pixel_table([entry("a")], ["m"], src, SamplingPolicy(seed=2))
        fmap = src.feats["a"]["m"].data
        for row, (eid, y, x) in zip(table.values, table.provenance):
            assert np.array_equal(row, fmap[y, x])

    def test_reservoir_respects_seed(self):
        mask = np.zeros((10, 10), np.uint8)
        src = ArraySource({"a": LabelMask(mask)},
                          {"a": {"m": FeatureMap(
                              np.arange(100, dtype=np.float32).reshape(10, 10, 1))}})
        policy5 = SamplingPolicy(max_pixels_per_class_per_image=5, seed=5)
        policy6 = SamplingPolicy(max_pixels_per_class_per_image=5, seed=6)
        t5 = build_pixel_table([entry("a")], ["m"], src, policy5)
        t5b = build_pixel_table([entry("a")], ["m"], src, policy5)
        t6 = build_pixel_table([entry("a")], ["m"], src, policy6)
        assert np.array_equal(t5.values, t5b.values)
        assert not np.array_equal(t5.values, t6.values)
        assert t5.num_rows == t6.num_rows == 5

    def test_policy_validates_cap(self):
        with pytest.raises(ValueError):
            SamplingPolicy(max_pixels_per_class_per_image=0)


class TestPredictMask:
    def make_model(self, rounds, num_classes=3, num_features=2):
        rng = np.random.default_rng(0)
        values = rng.random((30, num_features)).astype(np.float32)
        labels = rng.integers(0, num_classes, 30)
        table = PixelTable.from_arrays(values, labels)
        return train(table, num_classes, Hyperparams(rounds=rounds))

    def test_zero_round_model_is_all_class_zero(self):
        model = self.make_model(rounds=0)
        fmap = FeatureMap(np.random.default_rng(1).random((4, 5, 2)).astype(np.float32))
        pred = predict_mask(model, fmap)
        assert pred.data.shape == (4, 5)
        assert np.all(pred.data == 0)

    def test_channel_mismatch_rejected(self):
        model = self.make_model(rounds=1, num_features=2)
        fmap = FeatureMap(np.zeros((4, 4, 3), np.float32))
        with pytest.raises(ShapeError):
            predict_mask(model, fmap)

    def test_1x1_map(self):
        model = self.make_model(rounds=1)
        pred = predict_mask(model, FeatureMap(np.zeros((1, 1, 2), np.float32)))
        assert pred.data.shape == (1, 1)

    def test_separable_features_reproduce_mask(self):
        rng = np.random.default_rng(4)
        mask = rng.integers(0, 3, (16, 16)).astype(np.uint8)
        fmap = np.stack([(mask == c).astype(np.float32) for c in range(3)], axis=2)
        src = ArraySource({"a": LabelMask(mask)}, {"a": {"m": FeatureMap(fmap)}})
        table = build_pixel_table([entry("a")], ["m"], src, SamplingPolicy(seed=0))
        model = train(table, 3, Hyperparams(rounds=15))
        pred = predict_mask(model, FeatureMap(fmap))
        assert np.mean(pred.data == mask) >= 0.99
