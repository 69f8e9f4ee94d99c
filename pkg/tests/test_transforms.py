import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bm3dm.matching import Group3D
from bm3dm.transforms import (bior15_2d, bior15_matrices, dct_2d, dct_matrix, inverse_transform_group,
                              inverse_transform_patches, transform_group, transform_patches, wht_1d,
                              wht_matrix)

from oracles import bior15_pyramid

# 4x4 ramp p[i, j] = 4 i + j, coefficients frozen from the filter-bank oracle
RAMP_COEFFS = np.array([
    [30.0, -4.0, -1.0, -1.0],
    [-16.0, 0.0, -1.0, -1.0],
    [-4.0, -4.0, 0.0, 0.0],
    [-4.0, -4.0, 0.0, 0.0],
])


def materialize(fn, n):
    return np.stack([fn(np.eye(n)[i]) for i in range(n)], axis=1)


class TestWHT:
    def test_constant_maps_to_dc(self):
        np.testing.assert_allclose(wht_1d([1.0, 1.0]), [np.sqrt(2), 0.0], atol=1e-12)

    def test_impulse(self):
        np.testing.assert_allclose(wht_1d([1.0, 0, 0, 0]), [0.5] * 4, atol=1e-12)

    def test_round_trip_and_parseval(self):
        v = np.random.default_rng(0).normal(size=8)
        out = wht_1d(v)
        np.testing.assert_allclose(wht_1d(out, "inverse"), v, atol=1e-6)
        assert abs(np.linalg.norm(out) - np.linalg.norm(v)) < 1e-6

    @pytest.mark.parametrize("K", [3, 6, 12])
    def test_non_power_of_two(self, K):
        with pytest.raises(ValueError):
            wht_1d(np.ones(K))

    @pytest.mark.parametrize("K", [1, 2, 4, 8, 16, 32, 64])
    def test_orthonormal(self, K):
        T = materialize(wht_1d, K)
        assert np.abs(T.T @ T - np.eye(K)).max() < 1e-6
        np.testing.assert_array_equal(T, wht_matrix(K))


class TestDCT:
    def test_constant_patch(self):
        c = dct_2d(np.full((8, 8), 3.5))
        assert c[0, 0] == pytest.approx(8 * 3.5, abs=1e-9)
        c[0, 0] = 0
        assert np.abs(c).max() < 1e-9

    def test_two_point(self):
        a, b = 3.0, -1.25
        out = dct_matrix(2) @ np.array([a, b])
        np.testing.assert_allclose(out, [(a + b) / np.sqrt(2), (a - b) / np.sqrt(2)], atol=1e-12)

    @pytest.mark.parametrize("k", [2, 3, 4, 5, 8, 12, 16])
    def test_orthonormal(self, k):
        T = materialize(lambda v: dct_2d(v.reshape(k, k)).ravel(), k * k)
        assert np.abs(T.T @ T - np.eye(k * k)).max() < 1e-6

    def test_round_trip_parseval(self):
        p = np.random.default_rng(1).normal(size=(8, 8)) * 50
        c = dct_2d(p)
        np.testing.assert_allclose(dct_2d(c, "inverse"), p, atol=1e-6)
        assert abs(np.linalg.norm(c) - np.linalg.norm(p)) < 1e-6


class TestBior15:
    def test_constant_patch_single_approximation(self):
        c = bior15_2d(np.full((8, 8), 7.0))
        assert abs(c[0, 0]) > 1
        c[0, 0] = 0
        assert np.abs(c).max() < 1e-6

    def test_round_trip(self):
        p = np.random.default_rng(2).normal(size=(8, 8))
        np.testing.assert_allclose(bior15_2d(bior15_2d(p), "inverse"), p, atol=1e-5)

    def test_ramp_matches_filter_bank_oracle(self):
        p = np.arange(16.0).reshape(4, 4)
        np.testing.assert_allclose(bior15_pyramid(p), RAMP_COEFFS, atol=1e-9)
        np.testing.assert_allclose(bior15_2d(p), RAMP_COEFFS, atol=1e-9)

    @pytest.mark.parametrize("k", [2, 4, 8, 16])
    def test_random_patches_match_oracle(self, k):
        p = np.random.default_rng(k).normal(size=(k, k))
        np.testing.assert_allclose(bior15_2d(p), bior15_pyramid(p), atol=1e-9)

    @pytest.mark.parametrize("k", [4, 8, 16])
    def test_matches_pywavelets(self, k):
        pywt = pytest.importorskip("pywt")
        p = np.random.default_rng(10 + k).normal(size=(k, k))
        with pytest.warns(UserWarning):
            coeffs = pywt.wavedec2(p, "bior1.5", mode="periodization", level=int(np.log2(k)))
        arr, _ = pywt.coeffs_to_array(coeffs)
        np.testing.assert_allclose(bior15_2d(p), arr, atol=1e-9)

    def test_binary_corner_cases(self):
        rng = np.random.default_rng(3)
        fwd, inv = bior15_matrices(4)
        X = rng.integers(0, 2, size=(1000, 16)) * 255.0
        back = (X @ fwd.T) @ inv.T
        assert np.abs(back - X).max() < 1e-5

    @pytest.mark.parametrize("k", [3, 6, 1])
    def test_invalid_size(self, k):
        with pytest.raises(ValueError):
            bior15_2d(np.zeros((k, k)))


patches_strategy = arrays(np.float64, (8, 8), elements=st.floats(-300, 300, allow_nan=False))


@settings(max_examples=40, deadline=None)
@given(patches_strategy, patches_strategy, st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(x, y, a, b):
    for fn in (bior15_2d, dct_2d):
        lhs = fn(a * x + b * y)
        rhs = a * fn(x) + b * fn(y)
        assert np.abs(lhs - rhs).max() < 1e-6
    v, w = x.ravel(), y.ravel()
    assert np.abs(wht_1d(a * v + b * w) - (a * wht_1d(v) + b * wht_1d(w))).max() < 1e-6


class TestGroupTransform:
    def _group(self, patches):
        K = len(patches)
        return Group3D(np.zeros((K, 3), dtype=int), patches)

    @pytest.mark.parametrize("spatial", ["bior15", "dct"])
    def test_single_patch_is_spatial_only(self, spatial):
        p = np.random.default_rng(4).normal(size=(1, 8, 8))
        tg = transform_group(self._group(p), spatial)
        fn = bior15_2d if spatial == "bior15" else dct_2d
        np.testing.assert_allclose(tg.coeffs[0], fn(p[0]), atol=1e-12)

    @pytest.mark.parametrize("spatial", ["bior15", "dct"])
    def test_identical_patches(self, spatial):
        p = np.random.default_rng(5).normal(size=(8, 8))
        tg = transform_group(self._group(np.repeat(p[None], 8, axis=0)), spatial)
        assert np.abs(tg.coeffs[1:]).max() < 1e-6

    @pytest.mark.parametrize("spatial", ["bior15", "dct"])
    def test_round_trip(self, spatial):
        rng = np.random.default_rng(6)
        for _ in range(200):
            K = int(rng.choice([1, 2, 4, 8, 16]))
            k = int(rng.choice([4, 8, 16]))
            p = rng.normal(size=(K, k, k)) * 100
            g = self._group(p)
            back = inverse_transform_group(transform_group(g, spatial), g.refs)
            assert np.abs(back.patches - p).max() < 1e-5

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            transform_patches(np.zeros((4, 8, 4)), "dct")
        with pytest.raises(ValueError):
            inverse_transform_patches(np.zeros((3, 8, 8)), "dct")
        with pytest.raises(ValueError):
            transform_patches(np.zeros((2, 8, 8)), "haar")
