import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from mssicnn.dsp import align_to_length
from mssicnn.features import (
    FeatureConfig,
    MssiTransformer,
    Segment,
    Signal,
    build_mssi,
    featurize_dataset,
    multiscale_spectra,
    segment_signal,
    upscale_nearest,
)

CFG = FeatureConfig()


def random_segment(seed, n=2048):
    return Segment(np.random.default_rng(seed).normal(size=n))


class TestSegmentSignal:
    def test_cwru_normal_record_count(self):
        sig = Signal(np.zeros(243938), 12000.0)
        assert len(segment_signal(sig, 2048)) == 119

    def test_exact_multiple(self, rng):
        segs = segment_signal(Signal(rng.normal(size=4096) + 3.0, 12000.0, label="IR"), 2048)
        assert len(segs) == 2
        for s in segs:
            assert s.samples.shape == (2048,)
            assert s.label == "IR"
            assert abs(s.samples.mean()) <= 1e-12 * np.max(np.abs(s.samples))

    def test_too_short(self):
        with pytest.raises(ValueError, match="signal too short"):
            segment_signal(Signal(np.ones(2047), 12000.0), 2048)

    def test_segments_are_consecutive_slices(self, rng):
        x = rng.normal(size=5000)
        segs = segment_signal(Signal(x, 1.0), 1024)
        assert len(segs) == 4
        np.testing.assert_allclose(segs[2].samples, x[2048:3072] - x[2048:3072].mean())


class TestMultiscaleSpectra:
    def test_row_lengths(self):
        rows = multiscale_spectra(random_segment(0), CFG)
        assert [len(r) for r in rows] == [4, 8, 16, 32, 64, 128, 256]

    def test_constant_segment(self):
        (seg,) = segment_signal(Signal(np.full(2048, 2.0), 1.0), 2048)
        rows = multiscale_spectra(seg, CFG)
        assert all(np.all(r == 0) for r in rows)

    def test_tone_at_first_bin_of_shortest_window(self):
        x = np.cos(2 * np.pi * np.arange(512) / 8)
        rows = multiscale_spectra(Segment(x), CFG)
        np.testing.assert_allclose(rows[0], [0, 1, 0, 0], atol=1e-12)

    def test_segment_too_short(self):
        with pytest.raises(ValueError):
            multiscale_spectra(Segment(np.ones(256)), CFG)


class TestBuildMssi:
    def test_shape_and_range(self):
        img = build_mssi(random_segment(1), CFG)
        assert img.shape == (32, 56)
        assert img.min() == 0.0 and img.max() == 1.0

    def test_flatten_is_aligned_rows(self):
        seg = random_segment(2)
        rows = [align_to_length(r, 256) for r in multiscale_spectra(seg, CFG)]
        np.testing.assert_array_equal(build_mssi(seg, CFG).ravel(), np.concatenate(rows))

    def test_constant_segment_is_zero(self):
        (seg,) = segment_signal(Signal(np.full(2048, -7.5), 1.0), 2048)
        assert np.all(build_mssi(seg, CFG) == 0)

    def test_incompatible_geometry(self):
        with pytest.raises(ValueError, match="incompatible MSSI geometry"):
            build_mssi(random_segment(3), FeatureConfig(m_min=4, m_max=9))

    def test_deterministic(self):
        seg = random_segment(4)
        assert build_mssi(seg, CFG).tobytes() == build_mssi(Segment(seg.samples.copy()), CFG).tobytes()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 3.0, 1000.0]))
    def test_amplitude_invariance(self, seed, k):
        seg = random_segment(seed)
        np.testing.assert_allclose(build_mssi(Segment(k * seg.samples), CFG), build_mssi(seg, CFG), rtol=0, atol=1e-9)

    def test_low_tone_resolves_only_in_long_windows(self):
        # 5 cycles per 512 samples: under one cycle for m <= 6, several for m >= 8
        x = np.cos(2 * np.pi * 5 * np.arange(2048) / 512 + 0.3)
        rows = build_mssi(Segment(x), CFG).reshape(7, 256)
        peak_bins = [np.argmax(r) * 2 ** (m - 1) // 256 for m, r in zip(range(3, 10), rows)]
        assert peak_bins[0] == peak_bins[1] == 0  # m = 3, 4
        assert peak_bins[5] != 0 and peak_bins[6] == 5  # m = 8, 9


class TestUpscale:
    def test_zero(self):
        out = upscale_nearest(np.zeros((32, 56)))
        assert out.shape == (128, 128) and not out.any()

    def test_single_corner_pixel(self):
        img = np.zeros((32, 56))
        img[0, 0] = 1
        out = upscale_nearest(img)
        r, c = np.meshgrid(np.arange(128), np.arange(128), indexing="ij")
        expected = (r // 4 == 0) & ((c * 56) // 128 == 0)
        np.testing.assert_array_equal(out == 1, expected)
        assert expected.sum() == 4 * 3

    def test_value_multiset(self, rng):
        img = rng.random((32, 56))
        out = upscale_nearest(img)
        rows = (np.arange(128) * 32) // 128
        cols = (np.arange(128) * 56) // 128
        counts = np.outer(np.bincount(rows, minlength=32), np.bincount(cols, minlength=56))
        np.testing.assert_array_equal(np.sort(out.ravel()), np.sort(np.repeat(img.ravel(), counts.ravel())))

    def test_subsample_recovers_original(self, rng):
        img = rng.random((32, 56))
        out = upscale_nearest(img)
        r_rep = [next(r for r in range(128) if (r * 32) // 128 == i) for i in range(32)]
        c_rep = [next(c for c in range(128) if (c * 56) // 128 == j) for j in range(56)]
        np.testing.assert_array_equal(out[np.ix_(r_rep, c_rep)], img)

    def test_wrong_shape(self):
        with pytest.raises(ValueError):
            upscale_nearest(np.zeros((30, 56)))


class TestFeaturizeDataset:
    def test_counts_and_labels(self, rng):
        sig = Signal(rng.normal(size=3 * 2048), 12000.0, label="OR", source_id="s1")
        images = featurize_dataset([sig], CFG)
        assert len(images) == 3
        assert all(im.label == "OR" and im.pixels.shape == (32, 56) for im in images)

    def test_empty(self):
        assert featurize_dataset([], CFG) == []

    def test_order(self, rng):
        a = Signal(rng.normal(size=4096), 1.0, "A", "a")
        b = Signal(rng.normal(size=2048), 1.0, "B", "b")
        images = featurize_dataset([a, b], CFG)
        assert [im.label for im in images] == ["A", "A", "B"]
        np.testing.assert_array_equal(images[1].pixels, build_mssi(segment_signal(a, 2048)[1], CFG))

    def test_error_names_source(self):
        with pytest.raises(ValueError, match="short-one"):
            featurize_dataset([Signal(np.ones(100), 1.0, "A", "short-one")], CFG)


class TestSignalValidation:
    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            Signal(np.array([1.0, np.nan]), 1.0)
        with pytest.raises(ValueError):
            Signal(np.ones(4), 0.0)
        with pytest.raises(ValueError):
            Signal(np.array([]), 1.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FeatureConfig(m_min=5, m_max=4)
        with pytest.raises(ValueError):
            FeatureConfig(seg_len=256)
        assert FeatureConfig().rows * FeatureConfig().row_len == 1792


class TestMssiTransformer:
    def test_transform_matches_build_mssi(self, rng):
        X = rng.normal(size=(3, 1024)) + 5.0
        out = MssiTransformer().fit_transform(X)
        assert out.shape == (3, 1792)
        np.testing.assert_allclose(out[1], build_mssi(Segment(X[1] - X[1].mean())).ravel())

    def test_params_and_clone(self):
        t = MssiTransformer(m_min=3, m_max=9)
        assert t.get_params() == {"m_min": 3, "m_max": 9}
        assert clone(t).get_params() == t.get_params()

    def test_not_fitted(self, rng):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            MssiTransformer().transform(rng.normal(size=(1, 512)))

    def test_rejects_bad_geometry(self, rng):
        with pytest.raises(ValueError):
            MssiTransformer(m_min=4).fit(rng.normal(size=(2, 512)))
