from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from lfqmli.entropy import EntropyPair
from lfqmli.errors import EmptySequence, TooFewValues, TooSmallImage
from lfqmli.features import (
    FEATURE_NAMES,
    FeatureConfig,
    FeatureVector,
    extract_feature_vector,
    ged_features,
    mean_skew,
    parse_subset,
    percentile_pool,
    select_features,
    spatial_quality_features,
    ulbp_features,
)
from lfqmli.lightfield import LightField
from synth import gradient_field, shuffle_mlis

finite = st.floats(-1e6, 1e6, allow_nan=False)


class TestPercentilePool:
    def test_drops_two_per_tail(self):
        np.testing.assert_array_equal(percentile_pool(range(1, 11), 0.6), [3, 4, 5, 6, 7, 8])

    def test_keep_all_is_sorted_copy(self):
        np.testing.assert_array_equal(percentile_pool([3, 1, 2], 1.0), [1, 2, 3])

    def test_matches_sort_slice_oracle(self):
        rng = np.random.default_rng(31)
        vals = rng.normal(size=1000)
        np.testing.assert_array_equal(percentile_pool(vals, 0.6), oracles.sort_slice(vals, 0.6))

    @given(st.lists(finite, min_size=1, max_size=200))
    def test_contiguous_sorted_run(self, vals):
        out = percentile_pool(vals, 0.6)
        n = len(vals)
        assert out.size == n - 2 * int(np.floor(n * 0.2 + 1e-9))
        s = sorted(vals)
        start = (n - out.size) // 2
        np.testing.assert_array_equal(out, s[start : start + out.size])

    def test_empty(self):
        with pytest.raises(EmptySequence):
            percentile_pool([], 0.6)


class TestMeanSkew:
    def test_symmetric(self):
        assert mean_skew([-1, 0, 1]) == (0.0, 0.0)

    def test_constant(self):
        assert mean_skew([5, 5, 5]) == (5.0, 0.0)

    def test_hand_computed(self):
        # m2 = 0.1875, m3 = 0.09375
        mean, skew = mean_skew([0, 0, 0, 1])
        assert mean == 0.25
        assert skew == pytest.approx(0.09375 / 0.1875**1.5, abs=1e-12)
        assert skew == pytest.approx(1.1547005383792515, abs=1e-12)

    def test_matches_moment_oracle(self):
        rng = np.random.default_rng(32)
        for _ in range(100):
            vals = rng.exponential(size=rng.integers(3, 50))
            m, s = mean_skew(vals)
            om, os_ = oracles.moments(vals)
            assert abs(m - om) < 1e-12 and abs(s - os_) < 1e-12

    def test_too_few(self):
        with pytest.raises(TooFewValues):
            mean_skew([1.0, 2.0])


class TestGed:
    def test_all_constant(self):
        pairs = [EntropyPair(0.0, 0.0)] * 20
        np.testing.assert_array_equal(ged_features(pairs), [0, 0, 0, 0])

    def test_constant_sequences(self):
        pairs = [EntropyPair(2.5, 1.25)] * 20
        np.testing.assert_allclose(ged_features(pairs), [2.5, 0, 1.25, 0], atol=1e-15)

    def test_matches_composed_oracle(self):
        rng = np.random.default_rng(33)
        pairs = [EntropyPair(*p) for p in rng.uniform(0, 6, (500, 2))]
        ie = [p.image_entropy for p in pairs]
        fe = [p.frequency_entropy for p in pairs]
        expected = [*oracles.moments(oracles.sort_slice(ie, 0.6)), *oracles.moments(oracles.sort_slice(fe, 0.6))]
        np.testing.assert_allclose(ged_features(pairs), expected, atol=1e-12)

    def test_empty(self):
        with pytest.raises(EmptySequence):
            ged_features([])


class TestUlbpFeatures:
    def test_fallback_when_all_flat(self):
        hists = np.tile([0, 0, 0, 0, 1.0, 0], (10, 1))
        vals, fallback = ulbp_features(hists, np.zeros(10), 20)
        np.testing.assert_array_equal(vals, [0, 0, 0, 0, 1, 0])
        assert fallback

    def test_selector_keeps_high_range(self):
        h1 = np.array([0.1, 0.2, 0.3, 0.1, 0.2, 0.1])
        h2 = np.array([0, 0, 0, 0, 1.0, 0])
        vals, fallback = ulbp_features([h1, h2], [255, 0], 20)
        np.testing.assert_array_equal(vals, h1)
        assert not fallback

    def test_threshold_is_strict(self):
        h1 = np.array([1.0, 0, 0, 0, 0, 0])
        h2 = np.array([0, 1.0, 0, 0, 0, 0])
        vals, _ = ulbp_features([h1, h2], [21, 20], 20)
        np.testing.assert_array_equal(vals, h1)

    def test_matches_masked_mean(self):
        rng = np.random.default_rng(34)
        hists = rng.dirichlet(np.ones(6), size=300)
        ranges = rng.integers(0, 60, 300)
        vals, fallback = ulbp_features(hists, ranges, 20)
        rows = [h for h, r in zip(hists, ranges) if r > 20]
        expected = [sum(h[k] for h in rows) / len(rows) for k in range(6)]
        np.testing.assert_allclose(vals, expected, atol=1e-12)
        assert not fallback

    def test_empty(self):
        with pytest.raises(EmptySequence):
            ulbp_features(np.zeros((0, 6)), [], 20)


class TestSpatialQuality:
    def test_constant(self):
        np.testing.assert_array_equal(spatial_quality_features(np.full((32, 32), 90)), [0, 0, 0, 0])

    def test_piecewise_constant_blocks(self):
        sai = np.zeros((16, 16), dtype=np.uint8)
        sai[:8, 8:], sai[8:, :8], sai[8:, 8:] = 60, 120, 240
        np.testing.assert_array_equal(spatial_quality_features(sai), [0, 0, 0, 0])

    def test_partial_edge_blocks_discarded(self):
        rng = np.random.default_rng(35)
        sai = rng.integers(0, 256, (36, 43)).astype(np.uint8)
        np.testing.assert_array_equal(spatial_quality_features(sai), spatial_quality_features(sai[:32, :40]))

    def test_matches_block_loop_oracle(self):
        rng = np.random.default_rng(36)
        sai = rng.integers(0, 256, (64, 64))
        sie, sfe = [], []
        for r in range(0, 64, 8):
            for c in range(0, 64, 8):
                block = sai[r : r + 8, c : c + 8]
                sie.append(oracles.histogram_entropy(block))
                sfe.append(oracles.spectral_entropy(block))
        expected = [*oracles.moments(oracles.sort_slice(sie, 0.6)), *oracles.moments(oracles.sort_slice(sfe, 0.6))]
        np.testing.assert_allclose(spatial_quality_features(sai), expected, atol=1e-9)

    def test_too_small(self):
        with pytest.raises(TooSmallImage):
            spatial_quality_features(np.zeros((7, 20)))
        with pytest.raises(TooSmallImage):
            spatial_quality_features(np.zeros((8, 16)))


class TestFeatureVector:
    def test_constant_field(self):
        fv = extract_feature_vector(LightField(np.full((5, 5, 16, 16), 128)))
        np.testing.assert_array_equal(fv.values, [0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0])
        assert fv.ulbp_fallback

    def test_shape_and_ulbp_simplex(self):
        rng = np.random.default_rng(37)
        fv = extract_feature_vector(LightField(rng.integers(0, 256, (3, 4, 16, 24))))
        assert fv.values.shape == (14,) == (len(FEATURE_NAMES),)
        assert np.all(np.isfinite(fv.values))
        assert abs(fv.ulbp.sum() - 1) < 1e-9
        assert np.all((fv.ulbp >= 0) & (fv.ulbp <= 1))

    def test_ged_matches_per_mli_composition(self):
        from lfqmli.entropy import mli_global_entropy
        from lfqmli.lightfield import iter_mlis
        from lfqmli.texture import mli_range, ulbp_histogram

        lf = LightField(np.random.default_rng(38).integers(0, 256, (5, 5, 24, 16)))
        pairs, hists, ranges = [], [], []
        for _, mli in iter_mlis(lf):
            pairs.append(mli_global_entropy(mli))
            hists.append(ulbp_histogram(mli))
            ranges.append(mli_range(mli))
        fv = extract_feature_vector(lf)
        np.testing.assert_allclose(fv.ged, ged_features(pairs), atol=1e-12)
        np.testing.assert_allclose(fv.ulbp, ulbp_features(hists, ranges, 20)[0], atol=1e-12)
        np.testing.assert_allclose(fv.sq, spatial_quality_features(lf.data[2, 2]), atol=1e-12)

    def test_shuffle_raises_mean_fe_keeps_mean_ie(self):
        data = gradient_field(seed=2)
        smooth = extract_feature_vector(LightField(data))
        shuffled = extract_feature_vector(LightField(shuffle_mlis(data)))
        assert shuffled.values[0] == pytest.approx(smooth.values[0], abs=1e-12)
        assert shuffled.values[2] > smooth.values[2]

    def test_offset_invariance(self):
        data = gradient_field(seed=3).astype(np.int64)
        assert data.min() - 25 >= 0
        a = extract_feature_vector(LightField(data))
        b = extract_feature_vector(LightField(data - 25))
        fe_idx = [2, 3, 12, 13]
        np.testing.assert_allclose(a.values[fe_idx], b.values[fe_idx], atol=1e-9)
        np.testing.assert_array_equal(a.ulbp, b.ulbp)

    def test_all_sai_mode_averages_views(self):
        lf = LightField(np.random.default_rng(39).integers(0, 256, (3, 3, 16, 16)))
        fv = extract_feature_vector(lf, FeatureConfig(sai="all"))
        expected = np.mean([spatial_quality_features(lf.data[u, v]) for u in range(3) for v in range(3)], axis=0)
        np.testing.assert_allclose(fv.sq, expected, atol=1e-12)

    def test_deterministic_across_threads(self):
        lf = LightField(np.random.default_rng(40).integers(0, 256, (5, 5, 24, 24)))
        ref = extract_feature_vector(lf).values
        with ThreadPoolExecutor(4) as pool:
            outs = list(pool.map(lambda _: extract_feature_vector(lf).values, range(8)))
        for out in outs:
            assert out.tobytes() == ref.tobytes()

    def test_feature_vector_validation(self):
        with pytest.raises(ValueError):
            FeatureVector(np.zeros(13))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FeatureConfig(keep=0)
        with pytest.raises(ValueError):
            FeatureConfig(sai="left")


def test_subset_selection():
    M = np.arange(28.0).reshape(2, 14)
    np.testing.assert_array_equal(select_features(M, "sq"), M[:, 10:])
    np.testing.assert_array_equal(select_features(M, "sq,ged"), np.hstack([M[:, :4], M[:, 10:]]))
    assert parse_subset(None) == ("ged", "ulbp", "sq")
    with pytest.raises(ValueError):
        parse_subset("ged,foo")
