"""SSIM, MSE and the weighted reconstruction objective, with exact gradients.

Images are batches ``(N, C, H, W)`` with values in ``[0, 1]``.  Local
statistics use a Gaussian window in valid mode, computed as ``G @ X @ G.T``
with a banded matrix ``G`` (one row per output position).
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0
    gaussian: bool = True  # False: uniform window

    @property
    def c1(self):
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self):
        return (self.k2 * self.data_range) ** 2


DEFAULT_SSIM = SsimConfig()


def window_1d(cfg: SsimConfig = DEFAULT_SSIM) -> np.ndarray:
    if not cfg.gaussian:
        return np.full(cfg.window, 1.0 / cfg.window)
    r = np.arange(cfg.window) - (cfg.window - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * cfg.sigma * cfg.sigma))
    return g / g.sum()


@lru_cache(maxsize=16)
def _band(n: int, cfg: SsimConfig, dtype: str) -> np.ndarray:
    w = window_1d(cfg)
    m = n - cfg.window + 1
    if m < 1:
        raise ValueError(f"image side {n} is smaller than the SSIM window {cfg.window}")
    g = np.zeros((m, n))
    for i in range(m):
        g[i, i:i + cfg.window] = w
    g = g.astype(dtype)
    g.setflags(write=False)
    return g


def _filt(x, gh, gw):
    return gh @ x @ gw.T


def _filt_t(g, gh, gw):
    return gh.T @ g @ gw


def _check(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim == 3:
        x, y = x[None], y[None]
    if x.ndim != 4:
        raise ValueError("expected (C, H, W) or (N, C, H, W) images")
    return x, y


def _stats(x, y, cfg):
    dt = np.result_type(x.dtype, np.float32).name
    gh = _band(x.shape[-2], cfg, dt)
    gw = _band(x.shape[-1], cfg, dt)
    mx, my = _filt(x, gh, gw), _filt(y, gh, gw)
    exx, eyy, exy = _filt(x * x, gh, gw), _filt(y * y, gh, gw), _filt(x * y, gh, gw)
    a1 = 2 * mx * my + cfg.c1
    a2 = 2 * (exy - mx * my) + cfg.c2
    b1 = mx * mx + my * my + cfg.c1
    b2 = (exx - mx * mx) + (eyy - my * my) + cfg.c2
    return gh, gw, mx, my, a1, a2, b1, b2


def ssim_per_image(x, y, cfg: SsimConfig = DEFAULT_SSIM) -> np.ndarray:
    """Mean SSIM of each image in a batch (averaged over channels and positions)."""
    x, y = _check(x, y)
    _, _, _, _, a1, a2, b1, b2 = _stats(x, y, cfg)
    s = (a1 * a2) / (b1 * b2)
    return s.reshape(len(x), -1).mean(axis=1)


def ssim(x, y, cfg: SsimConfig = DEFAULT_SSIM) -> float:
    return float(ssim_per_image(x, y, cfg).mean())


def mse(x, y) -> float:
    x, y = _check(x, y)
    return float(np.mean((x - y) ** 2))


def ssim_grad(x, y, cfg: SsimConfig = DEFAULT_SSIM):
    """``(mean ssim over the batch, d mean_ssim / dx)``."""
    x, y = _check(x, y)
    gh, gw, mx, my, a1, a2, b1, b2 = _stats(x, y, cfg)
    s = (a1 * a2) / (b1 * b2)
    scale = 1.0 / s.size
    d_mx = s * (2 * my / a1 - 2 * my / a2 - 2 * mx / b1 + 2 * mx / b2) * scale
    d_exx = -s / b2 * scale
    d_exy = 2 * s / a2 * scale
    grad = _filt_t(d_mx, gh, gw) + 2 * x * _filt_t(d_exx, gh, gw) + y * _filt_t(d_exy, gh, gw)
    return float(s.mean()), grad


@dataclass(frozen=True)
class LossWeights:
    ssim: float = 0.9
    mse: float = 0.1

    def __post_init__(self):
        if abs(self.ssim + self.mse - 1.0) > 1e-12 or self.ssim < 0 or self.mse < 0:
            raise ValueError("loss weights must be non-negative and sum to 1")


def combined_loss(recon, target, weights: LossWeights = LossWeights(), cfg: SsimConfig = DEFAULT_SSIM):
    """``w_s * (1 - ssim) + w_m * mse`` averaged over the batch.

    Returns ``(loss, grad_wrt_recon, ssim, mse)``.
    """
    x, y = _check(recon, target)
    s, gs = ssim_grad(x, y, cfg)
    d = x - y
    m = float(np.mean(d * d))
    loss = weights.ssim * (1.0 - s) + weights.mse * m
    grad = -weights.ssim * gs + weights.mse * (2.0 / d.size) * d
    grad = grad.reshape(np.shape(recon)).astype(np.result_type(x.dtype, np.float32), copy=False)
    return loss, grad, s, m
