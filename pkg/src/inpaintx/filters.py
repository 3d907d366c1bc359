"""Small separable-convolution helpers shared by the compositing and corruption code."""

from __future__ import annotations

import math

import numpy as np


def gaussian_kernel_1d(sigma: float, radius: int) -> np.ndarray:
    """Normalized 1D Gaussian sampled on [-radius, radius]."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def sigma_from_kernel_size(ksize: int) -> float:
    """Conventional sigma implied by an odd kernel size (0.3*((k-1)/2 - 1) + 0.8)."""
    if ksize < 3 or ksize % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 3, got {ksize}")
    return 0.3 * ((ksize - 1) / 2 - 1) + 0.8


def blur_radius(sigma: float) -> int:
    """Kernel half-width for truncation at +-3 sigma."""
    return max(1, math.ceil(3.0 * sigma))


def convolve_separable(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Convolve a 2D (or 2D+channels) array with a 1D kernel along both spatial axes.

    Edges are handled by reflection (edge sample not repeated).
    """
    out = _convolve_axis(arr.astype(np.float64, copy=False), kernel, axis=0)
    return _convolve_axis(out, kernel, axis=1)


def _convolve_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = len(kernel) // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (r, r)
    padded = np.pad(arr, pad, mode="reflect")
    out = np.zeros_like(arr, dtype=np.float64)
    n = arr.shape[axis]
    for i, w in enumerate(kernel):
        sl = [slice(None)] * arr.ndim
        sl[axis] = slice(i, i + n)
        out += w * padded[tuple(sl)]
    return out


def dilate8(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    """Binary dilation with the 3x3 (8-connected) structuring element."""
    out = mask.astype(bool)
    for _ in range(iterations):
        p = np.pad(out, 1, mode="constant", constant_values=False)
        acc = np.zeros_like(out)
        for dy in (0, 1, 2):
            for dx in (0, 1, 2):
                acc |= p[dy : dy + out.shape[0], dx : dx + out.shape[1]]
        out = acc
    return out
