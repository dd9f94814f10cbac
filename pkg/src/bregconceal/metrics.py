"""Image quality metric."""

import numpy as np

from .exceptions import DimensionMismatchError

PSNR_CAP = 99.0
PEAK = 255.0


def psnr(original, restored):
    """Peak signal-to-noise ratio in dB for 8-bit range frames.

    ``10 log10(255^2 M N / ||w - w_hat||^2)``; identical frames give
    :data:`PSNR_CAP`.
    """
    w = np.asarray(original, dtype=np.float64)
    w_hat = np.asarray(restored, dtype=np.float64)
    if w.shape != w_hat.shape:
        raise DimensionMismatchError(f"frame shapes differ: {w.shape} vs {w_hat.shape}")
    sse = float(np.sum((w - w_hat) ** 2))
    if sse == 0.0:
        return PSNR_CAP
    return float(10.0 * np.log10(PEAK**2 * w.size / sse))
