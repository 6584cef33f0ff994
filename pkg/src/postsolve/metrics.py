"""Background-preservation metrics: MSE, PSNR and box-window SSIM."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak: float = 1.0) -> float:
    """10 log10(peak² / mse); ``math.inf`` for identical inputs."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / err)


def ssim(a, b, window: int = 7, peak: float = 1.0) -> float:
    """Mean SSIM over all fully contained ``window``×``window`` box windows.

    Local statistics use population (1/n) moments; C1 = (0.01 peak)²,
    C2 = (0.03 peak)².
    """
    a, b = _pair(a, b)
    if a.ndim != 2:
        raise ValueError("ssim needs 2D inputs")
    if window < 1 or window % 2 == 0 or window > min(a.shape):
        raise ValueError(f"window must be odd and <= {min(a.shape)}, got {window}")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    wa = sliding_window_view(a, (window, window))
    wb = sliding_window_view(b, (window, window))
    axes = (-2, -1)
    mu_a = wa.mean(axis=axes)
    mu_b = wb.mean(axis=axes)
    var_a = ((wa - mu_a[..., None, None]) ** 2).mean(axis=axes)
    var_b = ((wb - mu_b[..., None, None]) ** 2).mean(axis=axes)
    cov = ((wa - mu_a[..., None, None]) * (wb - mu_b[..., None, None])).mean(axis=axes)
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class MetricReport:
    mse: float
    psnr: float
    ssim: Optional[float] = None


def report(a, b, peak: float = 1.0, shape=None, window: int = 7) -> MetricReport:
    """MSE/PSNR, plus SSIM when a 2D lattice ``shape`` is given.

    The SSIM window is shrunk to the largest odd size that fits the lattice.
    """
    s = None
    if shape is not None:
        win = min(window, *shape)
        if win % 2 == 0:
            win -= 1
        s = ssim(np.reshape(a, shape), np.reshape(b, shape), win, peak)
    return MetricReport(mse(a, b), psnr(a, b, peak), s)
