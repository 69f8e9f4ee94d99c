import numpy as np
import pytest

from bm3dm.image import FrameStack, make_dataset
from bm3dm.metrics import mse
from bm3dm.pipelines import (Bm3dParams, StepParams, basic_estimate, bm3d_1, bm3d_2, bm3d_3, bm3d_m,
                             bm3d_single, run_method)

SMALL = Bm3dParams(step1=StepParams(window=15), step2=StepParams(K_max=32, window=15))


def textured(n=40, seed=0):
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[:n, :n]
    return 128 + 60 * np.sin(x / 3.0) * np.cos(y / 5.0) + rng.uniform(-5, 5, (n, n))


@pytest.fixture(scope="module")
def stack3():
    return make_dataset(textured(), 40.0, 3, 5, "tex")


def test_single_shape_and_gain():
    clean = textured(48)
    st = make_dataset(clean, 40.0, 1, 3)
    out = bm3d_single(st.frames[0], SMALL, sigma=40.0)
    assert out.shape == clean.shape
    assert mse(out, clean) < 0.25 * mse(st.frames[0], clean)


def test_single_rejects_small_and_bad_sigma():
    with pytest.raises(ValueError):
        bm3d_single(np.zeros((6, 6)), sigma=10.0)
    with pytest.raises(ValueError):
        bm3d_single(np.zeros((16, 16)))
    with pytest.raises(ValueError):
        bm3d_single(np.zeros((2, 16, 16)), sigma=1.0)


def test_reduction_family():
    st = make_dataset(textured(32), 40.0, 1, 9)
    ref = bm3d_single(st.frames[0], SMALL, sigma=40.0)
    for fn in (bm3d_1, bm3d_2, bm3d_m):
        assert np.abs(fn(st, SMALL) - ref).max() < 1e-6
    assert np.abs(bm3d_3(st, 0, SMALL) - ref).max() < 1e-6


@pytest.mark.parametrize("sigma", [80.0, 120.0])
def test_flat_image_constant_output(sigma):
    st = FrameStack(np.full((2, 24, 24), 97.0), sigma)
    for method in ("BM3D-1", "BM3D-2", "BM3D-3", "BM3D-M"):
        out, _ = run_method(method, st, SMALL)
        assert out.max() - out.min() < 1e-4


def test_flat_basic_estimate_is_exact():
    basic = basic_estimate(np.full((24, 24), 97.0), SMALL, sigma=80.0)
    np.testing.assert_allclose(basic, 97.0, atol=1e-9)


def test_bm3d1_effective_noise():
    clean = np.full((256, 256), 100.0)
    st = make_dataset(clean, 80.0, 4, 17)
    assert abs(st.frames.mean(axis=0).std() - 40.0) < 2.0


def test_identical_frames():
    f = make_dataset(textured(32), 30.0, 1, 1).frames[0]
    st = FrameStack(np.stack([f, f]), 30.0)
    np.testing.assert_allclose(bm3d_2(st, SMALL), bm3d_single(f, SMALL, sigma=30.0), atol=1e-9)


def test_bm3d3_bad_reference(stack3):
    with pytest.raises(ValueError):
        bm3d_3(stack3, 3, SMALL)


@pytest.mark.parametrize("fn", [bm3d_1, bm3d_2, bm3d_m])
def test_permutation_equivariance(stack3, fn):
    a = fn(stack3, SMALL)
    b = fn(stack3.permuted([2, 0, 1]), SMALL)
    assert np.abs(a - b).max() < 1e-6


def test_thread_count_does_not_change_output(stack3):
    a = bm3d_m(stack3, SMALL, threads=1)
    b = bm3d_m(stack3, SMALL, threads=4)
    np.testing.assert_array_equal(a, b)


def test_multi_frame_gain(stack3):
    out = bm3d_m(stack3, SMALL)
    assert mse(out, stack3.clean) < 40.0**2 / 3


def test_run_method_dispatch(stack3):
    with pytest.warns(UserWarning, match="frame 0"):
        out, meta = run_method("BM3D", stack3, SMALL)
    assert meta["warnings"] and meta["wall_time"] > 0
    np.testing.assert_array_equal(out, bm3d_single(stack3.frames[0], SMALL, sigma=stack3.sigma))
    out, meta = run_method("BM3D-3", stack3, SMALL)
    assert len(meta["ref_mse"]) == 3
    assert meta["ref_mse"][meta["ref_index"]] == min(meta["ref_mse"])
    np.testing.assert_array_equal(out, bm3d_3(stack3, meta["ref_index"], SMALL))
    with pytest.raises(ValueError):
        run_method("BM4D", stack3)


def test_bm3d3_without_clean_uses_first_frame(stack3):
    st = FrameStack(stack3.frames, stack3.sigma)
    _, meta = run_method("BM3D-3", st, SMALL)
    assert meta["ref_index"] == 0 and "ref_mse" not in meta


def test_param_overrides():
    p = Bm3dParams().with_overrides({"step1.lambda3d": "2.8", "step2.K_max": "16", "sigma": "50"})
    assert p.step1.lambda3d == 2.8 and p.step2.K_max == 16 and p.sigma == 50.0
    for bad in ("step3.k", "step1.nope", "lambda3d"):
        with pytest.raises(ValueError):
            Bm3dParams().with_overrides({bad: "1"})
    with pytest.raises(ValueError):
        bm3d_single(np.zeros((16, 16)), Bm3dParams(step1=StepParams(k=6)), sigma=1.0)
