"""Synthetic scene generation: determinism, signal structure, noise."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixelbench.synth import SynthSpec, generate_complementary_pair, generate_scene


class TestSpecValidation:
    def test_defaults(self):
        spec = SynthSpec()
        assert (spec.height, spec.width) == (64, 64)
        assert spec.num_classes == 4
        assert spec.num_channels == 8

    @pytest.mark.parametrize("kwargs", [
        {"height": 0},
        {"width": -1},
        {"num_classes": 1},
        {"blob_count": -1},
        {"noise_sigma": -0.1},
        {"channels_per_class": 0},
        {"informative_classes": (0, 4), "num_classes": 4},
        {"informative_classes": (-1,)},
    ])
    def test_invalid_specs(self, kwargs):
        with pytest.raises(ValueError):
            SynthSpec(**kwargs)

    def test_informative_defaults_to_all(self):
        assert SynthSpec(num_classes=3).informative() == (0, 1, 2)

    def test_informative_sorted_deduped(self):
        spec = SynthSpec(informative_classes=(3, 1, 1))
        assert spec.informative() == (1, 3)
        assert spec.num_channels == 4


class TestGenerateScene:
    def test_shapes(self):
        spec = SynthSpec(height=32, width=48, seed=3)
        mask, fmap = generate_scene(spec)
        assert mask.data.shape == (32, 48)
        assert fmap.data.shape == (32, 48, spec.num_channels)
        assert fmap.data.dtype == np.float32

    def test_deterministic(self):
        spec = SynthSpec(seed=11)
        mask_a, fmap_a = generate_scene(spec)
        mask_b, fmap_b = generate_scene(spec)
        assert np.array_equal(mask_a.data, mask_b.data)
        assert np.array_equal(fmap_a.data, fmap_b.data)

    def test_seed_changes_output(self):
        mask_a, _ = generate_scene(SynthSpec(seed=1, blob_count=20))
        mask_b, _ = generate_scene(SynthSpec(seed=2, blob_count=20))
        assert not np.array_equal(mask_a.data, mask_b.data)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 6))
    @settings(max_examples=30, deadline=None)
    def test_mask_values_in_range(self, seed, num_classes):
        spec = SynthSpec(height=16, width=16, num_classes=num_classes,
                         seed=seed, blob_count=8)
        mask, _ = generate_scene(spec)
        assert mask.data.max() < num_classes

    def test_zero_blobs_is_background(self):
        mask, _ = generate_scene(SynthSpec(blob_count=0, seed=4))
        assert not mask.data.any()

    def test_noiseless_argmax_recovers_mask(self):
        spec = SynthSpec(noise_sigma=0.0, seed=9, channels_per_class=1)
        mask, fmap = generate_scene(spec)
        recovered = np.argmax(fmap.data, axis=2)
        # ties broken toward the lowest channel match indicator semantics
        assert np.array_equal(recovered, mask.data)

    def test_indicator_channels_repeat_per_class(self):
        spec = SynthSpec(noise_sigma=0.0, seed=9, channels_per_class=3)
        mask, fmap = generate_scene(spec)
        for cls in range(spec.num_classes):
            block = fmap.data[:, :, cls * 3:(cls + 1) * 3]
            indicator = (mask.data == cls).astype(np.float32)
            for j in range(3):
                assert np.array_equal(block[:, :, j], indicator)

    def test_noninformative_classes_get_no_channels(self):
        spec = SynthSpec(noise_sigma=0.0, seed=5, informative_classes=(0, 2),
                         channels_per_class=1)
        mask, fmap = generate_scene(spec)
        assert fmap.data.shape[2] == 2
        assert np.array_equal(fmap.data[:, :, 0], (mask.data == 0).astype(np.float32))
        assert np.array_equal(fmap.data[:, :, 1], (mask.data == 2).astype(np.float32))

    def test_noise_is_additive_on_signal(self):
        clean_spec = SynthSpec(noise_sigma=0.0, seed=21)
        noisy_spec = SynthSpec(noise_sigma=0.5, seed=21)
        mask_c, clean = generate_scene(clean_spec)
        mask_n, noisy = generate_scene(noisy_spec)
        assert np.array_equal(mask_c.data, mask_n.data)
        residual = noisy.data.astype(np.float64) - clean.data.astype(np.float64)
        assert abs(residual.mean()) < 0.02
        assert residual.std() == pytest.approx(0.5, abs=0.02)

    def test_sigma_scales_noise(self):
        _, clean = generate_scene(SynthSpec(noise_sigma=0.0, seed=33, blob_count=0))
        _, small = generate_scene(SynthSpec(noise_sigma=0.1, seed=33, blob_count=0))
        _, large = generate_scene(SynthSpec(noise_sigma=0.2, seed=33, blob_count=0))
        # same stream, same draws, doubled scale
        noise_small = small.data.astype(np.float64) - clean.data
        noise_large = large.data.astype(np.float64) - clean.data
        assert np.allclose(noise_large, 2.0 * noise_small, atol=1e-6)


class TestComplementaryPair:
    def test_requires_four_classes(self):
        with pytest.raises(ValueError):
            generate_complementary_pair(SynthSpec(num_classes=3))

    def test_split_rule_four_classes(self):
        spec = SynthSpec(noise_sigma=0.0, seed=2, channels_per_class=1)
        mask, fmap_a, fmap_b = generate_complementary_pair(spec)
        assert fmap_a.data.shape[2] == 2
        assert fmap_b.data.shape[2] == 2
        assert np.array_equal(fmap_a.data[:, :, 0], (mask.data == 0).astype(np.float32))
        assert np.array_equal(fmap_a.data[:, :, 1], (mask.data == 1).astype(np.float32))
        assert np.array_equal(fmap_b.data[:, :, 0], (mask.data == 2).astype(np.float32))
        assert np.array_equal(fmap_b.data[:, :, 1], (mask.data == 3).astype(np.float32))

    def test_split_rule_five_classes(self):
        spec = SynthSpec(num_classes=5, noise_sigma=0.0, seed=2,
                         channels_per_class=1)
        _, fmap_a, fmap_b = generate_complementary_pair(spec)
        # ceil(5/2) = 3 classes in A, 2 in B
        assert fmap_a.data.shape[2] == 3
        assert fmap_b.data.shape[2] == 2

    def test_shares_mask_with_generate_scene(self):
        spec = SynthSpec(seed=13)
        mask_pair, _, _ = generate_complementary_pair(spec)
        mask_single, _ = generate_scene(spec)
        assert np.array_equal(mask_pair.data, mask_single.data)

    def test_deterministic(self):
        spec = SynthSpec(seed=8)
        _, a1, b1 = generate_complementary_pair(spec)
        _, a2, b2 = generate_complementary_pair(spec)
        assert np.array_equal(a1.data, a2.data)
        assert np.array_equal(b1.data, b2.data)

    def test_noise_streams_differ_between_sets(self):
        spec = SynthSpec(seed=8, blob_count=0)
        _, fmap_a, fmap_b = generate_complementary_pair(spec)
        assert not np.array_equal(fmap_a.data, fmap_b.data)
