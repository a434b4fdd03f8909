import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bugsight.metrics import DEFAULT_SSIM, LossWeights, SsimConfig, combined_loss, mse, ssim, ssim_grad, window_1d


def _pair(seed, shape=(2, 3, 16, 18), noise=0.1):
    rng = np.random.default_rng(seed)
    x = rng.random(shape)
    y = np.clip(x + noise * rng.standard_normal(shape), 0, 1)
    return x, y


def test_ssim_of_identical_images_is_one():
    x, _ = _pair(0)
    assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)
    assert ssim(np.zeros_like(x), np.zeros_like(x)) == pytest.approx(1.0)


def test_window_and_constants():
    w = window_1d()
    assert w.sum() == pytest.approx(1.0)
    assert len(w) == 11 and np.argmax(w) == 5
    np.testing.assert_allclose(w, w[::-1])
    assert DEFAULT_SSIM.c1 > 0 and DEFAULT_SSIM.c2 > 0
    assert window_1d(SsimConfig(gaussian=False)).sum() == pytest.approx(1.0)


def test_ssim_matches_reference_implementation():
    skm = pytest.importorskip("skimage.metrics")
    for seed in range(4):
        x, y = _pair(seed, shape=(3, 30, 27), noise=0.05 * (seed + 1))
        want = skm.structural_similarity(x, y, channel_axis=0, gaussian_weights=True, sigma=1.5,
                                         use_sample_covariance=False, data_range=1.0)
        assert ssim(x, y) == pytest.approx(want, abs=1e-10)


def test_ssim_symmetric_and_bounded():
    x, y = _pair(3)
    assert ssim(x, y) == pytest.approx(ssim(y, x))
    assert -1.0 <= ssim(x, y) < 1.0


def test_too_small_for_window():
    with pytest.raises(ValueError, match="window"):
        ssim(np.zeros((1, 3, 8, 8)), np.zeros((1, 3, 8, 8)))
    with pytest.raises(ValueError, match="shape"):
        ssim(np.zeros((1, 3, 12, 12)), np.zeros((1, 3, 12, 13)))


def _central_diff(f, x, idx, h=1e-6):
    xp, xm = x.copy(), x.copy()
    xp[idx] += h
    xm[idx] -= h
    return (f(xp) - f(xm)) / (2 * h)


def test_ssim_gradient_matches_finite_differences():
    x, y = _pair(5, shape=(2, 2, 13, 14))
    _, g = ssim_grad(x, y)
    rng = np.random.default_rng(1)
    for _ in range(25):
        idx = tuple(int(rng.integers(n)) for n in x.shape)
        num = _central_diff(lambda v: ssim(v, y), x, idx)
        assert g[idx] == pytest.approx(num, rel=1e-5, abs=1e-9)


def test_combined_loss_gradient():
    x, y = _pair(6, shape=(2, 3, 12, 12))
    w = LossWeights(0.9, 0.1)
    loss, g, s, m = combined_loss(x, y, w)
    assert loss == pytest.approx(0.9 * (1 - s) + 0.1 * m)
    assert m == pytest.approx(mse(x, y))
    rng = np.random.default_rng(2)
    for _ in range(25):
        idx = tuple(int(rng.integers(n)) for n in x.shape)
        num = _central_diff(lambda v: combined_loss(v, y, w)[0], x, idx)
        assert g[idx] == pytest.approx(num, rel=1e-5, abs=1e-9)


def test_loss_zero_at_identity():
    x, _ = _pair(7)
    loss, g, s, m = combined_loss(x, x)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.abs(g).max() < 1e-10


@pytest.mark.parametrize("ws, wm", [(0.5, 0.4), (-0.1, 1.1), (1.2, -0.2)])
def test_loss_weight_validation(ws, wm):
    with pytest.raises(ValueError):
        LossWeights(ws, wm)


def test_float32_gradient_dtype():
    x, y = _pair(8, shape=(1, 3, 12, 12))
    _, g, _, _ = combined_loss(x.astype(np.float32), y.astype(np.float32))
    assert g.dtype == np.float32


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 0.5))
def test_loss_non_negative(seed, noise):
    x, y = _pair(seed, shape=(1, 3, 12, 12), noise=noise)
    loss, _, s, _ = combined_loss(x, y)
    assert loss >= -1e-12
    assert s <= 1.0 + 1e-12
