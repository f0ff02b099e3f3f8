"""Fidelity metrics.

Image/video metrics work on the 0-255 scale: normalized values are mapped
back with ``(v + 1) * 127.5`` and clamped, without rounding. Inputs are
either :class:`MediaTensor` objects or arrays of normalized values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .media import MediaTensor, VIDEO

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
PEAK = 255.0


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    apd: float
    rmse: float

    def lines(self) -> list[str]:
        return [f"psnr={self.psnr_db:.6f}", f"ssim={self.ssim:.6f}",
                f"apd={self.apd:.6f}", f"rmse={self.rmse:.6f}"]


@dataclass
class AudioMseReport:
    mse_mean: float
    mse_std: float

    def lines(self) -> list[str]:
        return [f"mse_mean={self.mse_mean:.6e}", f"mse_std={self.mse_std:.6e}"]


def _normalized(x) -> np.ndarray:
    if isinstance(x, MediaTensor):
        return x.as_array()
    return np.asarray(x, dtype=np.float64)


def to_255(x) -> np.ndarray:
    return np.clip((_normalized(x) + 1.0) * 127.5, 0.0, PEAK)


def _pair(a, b):
    a, b = to_255(a), to_255(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """PSNR in dB; ``inf`` for identical inputs."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK**2 / mse)


def apd(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def rmse(a, b) -> float:
    a, b = _pair(a, b)
    return math.sqrt(float(np.mean((a - b) ** 2)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def _filter_valid(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    return np.einsum("ijkl,kl->ij", sliding_window_view(img, window.shape), window)


def _ssim_plane(x: np.ndarray, y: np.ndarray, window: np.ndarray) -> float:
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    mx, my = _filter_valid(x, window), _filter_valid(y, window)
    sxx = _filter_valid(x * x, window) - mx * mx
    syy = _filter_valid(y * y, window) - my * my
    sxy = _filter_valid(x * y, window) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(a, b) -> float:
    """Single-scale SSIM, Gaussian 11x11 window, averaged over channels (and frames)."""
    video = isinstance(a, MediaTensor) and a.modality == VIDEO
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if not video and a.ndim == 3:
        a, b = a[None], b[None]
    if a.ndim != 4:
        raise ValueError(f"ssim needs image or video arrays, got shape {a.shape}")
    if min(a.shape[1:3]) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape[1:3]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    window = gaussian_window()
    vals = [_ssim_plane(a[f, :, :, c], b[f, :, :, c], window)
            for f in range(a.shape[0]) for c in range(a.shape[3])]
    return float(np.mean(vals))


def image_metrics(a, b) -> MetricReport:
    return MetricReport(psnr(a, b), ssim(a, b), apd(a, b), rmse(a, b))


def audio_mse_stats(a, b) -> AudioMseReport:
    """Mean and population std of the per-sample squared error (normalized units)."""
    a, b = _normalized(a).ravel(), _normalized(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch {a.size} vs {b.size}")
    err = (a - b) ** 2
    return AudioMseReport(float(err.mean()), float(err.std()))
