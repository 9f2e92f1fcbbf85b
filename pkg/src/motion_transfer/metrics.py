"""PSNR and SSIM for images in [-1, 1] plus a per-frame report."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .errors import ArgumentError, DimensionError


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError("metric", a.shape, b.shape)
    return a, b


def psnr(a, b, peak=2.0):
    """10 log10(peak^2 / MSE); identical inputs give ``inf``."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse)


def gaussian_window(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-x ** 2 / (2 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a, b, window=11, sigma=1.5, k1=0.01, k2=0.03, data_range=2.0):
    """Mean local SSIM over every fully contained window, averaged over channels.

    Accepts (H, W) or (C, H, W) arrays.
    """
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.ndim != 3:
        raise DimensionError("ssim", a.shape, "(C, H, W)")
    if min(a.shape[1:]) < window:
        raise ArgumentError(f"image {a.shape[1:]} smaller than the {window}x{window} window")
    g = gaussian_window(window, sigma)
    c1, c2 = (k1 * data_range) ** 2, (k2 * data_range) ** 2

    def filt(x):
        return convolve2d(x, g[::-1, ::-1], mode="valid")

    scores = []
    for x, y in zip(a, b):
        mx, my = filt(x), filt(y)
        sxx = filt(x * x) - mx * mx
        syy = filt(y * y) - my * my
        sxy = filt(x * y) - mx * my
        s = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
        scores.append(s.mean())
    return float(np.mean(scores))


@dataclass
class MetricReport:
    frames: list = field(default_factory=list)
    psnr_db: list = field(default_factory=list)
    ssim: list = field(default_factory=list)

    def add(self, name, pred, gt):
        self.frames.append(name)
        self.psnr_db.append(psnr(pred, gt))
        self.ssim.append(ssim(pred, gt))

    def summary(self):
        p = np.array(self.psnr_db, dtype=np.float64)
        s = np.array(self.ssim, dtype=np.float64)
        return {"psnr_mean": float(p.mean()), "psnr_std": float(p.std()) if np.isfinite(p).all() else math.nan,
                "ssim_mean": float(s.mean()), "ssim_std": float(s.std())}

    def to_csv(self):
        rows = ["frame,psnr_db,ssim"]
        rows += [f"{n},{p:.6f},{s:.6f}" for n, p, s in zip(self.frames, self.psnr_db, self.ssim)]
        return "\n".join(rows) + "\n"
