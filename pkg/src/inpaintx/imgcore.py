"""Image/mask primitives, deterministic IO, and pixel-exchange compositing.

The exchange operation keeps every pixel outside the edit mask bit-exact with
the original at 8-bit precision; everything here is built around preserving
that guarantee (round-half-up quantization, no implicit resampling).
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .filters import (
    convolve_separable,
    dilate8,
    gaussian_kernel_1d,
    sigma_from_kernel_size,
)

MASK_THRESHOLD = 128  # grayscale value >= 128 means "edit region"


def _quantize_u8(data: np.ndarray) -> np.ndarray:
    """[0,1] floats to 8-bit with round-half-up."""
    return np.clip(np.floor(data * 255.0 + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class RasterImage:
    """H x W x C pixel grid with scalar samples in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.shape[2] not in (1, 3):
            raise ValueError(f"image data must be HxWx1 or HxWx3, got shape {d.shape}")
        if d.shape[0] == 0 or d.shape[1] == 0:
            raise ValueError("zero-dimension image")
        if not np.isfinite(d).all():
            raise ValueError("image contains non-finite samples")
        if d.min() < 0.0 or d.max() > 1.0:
            raise ValueError("image samples must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_u8(cls, arr: np.ndarray) -> "RasterImage":
        if arr.ndim == 2:
            arr = arr[:, :, None]
        return cls(arr.astype(np.float64) / 255.0)

    def to_u8(self) -> np.ndarray:
        return _quantize_u8(self.data)

    def luma2d(self) -> np.ndarray:
        """Single-channel 2D view (Rec.601 luma for color images)."""
        if self.channels == 1:
            return self.data[:, :, 0]
        r, g, b = self.data[:, :, 0], self.data[:, :, 1], self.data[:, :, 2]
        return 0.299 * r + 0.587 * g + 0.114 * b


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel edit-region indicator (True = edit region)."""

    bits: np.ndarray

    def __post_init__(self):
        if self.bits.ndim != 2:
            raise ValueError(f"mask must be 2D, got shape {self.bits.shape}")
        if self.bits.dtype != np.bool_:
            raise ValueError("mask bits must be boolean")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def __invert__(self) -> "BinaryMask":
        return BinaryMask(~self.bits)


@dataclass(frozen=True)
class AlphaMatte:
    """Soft blend weight per pixel, zero away from the mask boundary band."""

    alpha: np.ndarray

    def __post_init__(self):
        a = self.alpha
        if a.ndim != 2:
            raise ValueError(f"alpha matte must be 2D, got shape {a.shape}")
        if a.min() < 0.0 or a.max() > 1.0:
            raise ValueError("alpha values must lie in [0, 1]")


@dataclass(frozen=True)
class DiffMap:
    """Per-pixel mean absolute channel difference between two images."""

    values: np.ndarray

    def to_image(self) -> RasterImage:
        return RasterImage(np.clip(self.values, 0.0, 1.0)[:, :, None])


def load_image(path) -> RasterImage:
    """Load a PNG or JPEG file into a [0,1] float image."""
    with Image.open(path) as im:
        im.load()
        if im.mode in ("1", "L", "I", "I;16", "P", "LA"):
            im = im.convert("L")
        else:
            im = im.convert("RGB")
        arr = np.asarray(im)
    return RasterImage.from_u8(arr)


def save_image(img: RasterImage, path, format: str = "png", quality: int | None = None) -> None:
    """Write an image as PNG (lossless) or baseline JPEG.

    The file is written to a temp name and renamed, so readers never see a
    partial file.
    """
    fmt = format.lower()
    if fmt not in ("png", "jpeg", "jpg"):
        raise ValueError(f"unsupported format: {format}")
    arr = img.to_u8()
    if arr.shape[2] == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    if fmt == "png":
        pil.save(tmp, format="PNG")
    else:
        if quality is None:
            quality = 95
        if not (1 <= quality <= 100):
            raise ValueError(f"jpeg quality must be in 1..100, got {quality}")
        pil.save(tmp, format="JPEG", quality=quality, subsampling=2 if img.channels == 3 else 0)
    os.replace(tmp, path)


def load_mask(path) -> BinaryMask:
    """Load a grayscale mask PNG; values >= 128 become edit-region pixels."""
    with Image.open(path) as im:
        im.load()
        arr = np.asarray(im.convert("L"))
    return BinaryMask(arr >= MASK_THRESHOLD)


def save_mask(mask: BinaryMask, path) -> None:
    save_image(RasterImage(mask.bits.astype(np.float64)[:, :, None]), path, format="png")


def _check_dims(original: RasterImage, generated: RasterImage, mask: BinaryMask) -> None:
    if (original.height, original.width) != (generated.height, generated.width):
        raise ValueError(
            f"image dimensions differ: {original.height}x{original.width} vs "
            f"{generated.height}x{generated.width}"
        )
    if original.channels != generated.channels:
        raise ValueError("original and generated must share channel count")
    if (mask.height, mask.width) != (original.height, original.width):
        raise ValueError(
            f"mask dimensions {mask.height}x{mask.width} do not match image "
            f"{original.height}x{original.width} (masks are never resized)"
        )


def exchange(original: RasterImage, generated: RasterImage, mask: BinaryMask) -> RasterImage:
    """Composite keeping generated pixels inside the mask and original pixels outside."""
    _check_dims(original, generated, mask)
    out = np.where(mask.bits[:, :, None], generated.data, original.data)
    return RasterImage(out)


def edge_band(mask: BinaryMask, band_width: int) -> np.ndarray:
    """Boundary pixels of the mask (both sides, 8-connected), dilated band_width times."""
    m = mask.bits
    boundary = (m & dilate8(~m)) | (~m & dilate8(m))
    if band_width > 0:
        boundary = dilate8(boundary, band_width)
    return boundary


def soft_exchange(
    original: RasterImage,
    generated: RasterImage,
    mask: BinaryMask,
    band_width: int = 2,
    blur_kernel: int = 5,
) -> RasterImage:
    """Exchange with the mask-boundary seam softened by alpha-blended blurring.

    The hard composite is computed first; a Gaussian-blurred edge band forms an
    alpha matte, and the output interpolates between the composite and its
    blurred version under that matte. band_width = 0 degenerates to the hard
    exchange.
    """
    if band_width < 0:
        raise ValueError("band_width must be >= 0")
    if blur_kernel % 2 == 0 or blur_kernel < 3:
        raise ValueError(f"blur_kernel must be odd and >= 3, got {blur_kernel}")
    hard = exchange(original, generated, mask)
    if band_width == 0 or not mask.bits.any() or mask.bits.all():
        return hard
    sigma = sigma_from_kernel_size(blur_kernel)
    kernel = gaussian_kernel_1d(sigma, (blur_kernel - 1) // 2)
    band = edge_band(mask, band_width).astype(np.float64)
    alpha = AlphaMatte(np.clip(convolve_separable(band, kernel), 0.0, 1.0))
    blurred = np.clip(convolve_separable(hard.data, kernel), 0.0, 1.0)
    a = alpha.alpha[:, :, None]
    out = hard.data * (1.0 - a) + blurred * a
    return RasterImage(np.clip(out, 0.0, 1.0))


def diff_map(a: RasterImage, b: RasterImage) -> DiffMap:
    """Per-pixel mean absolute channel difference."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    return DiffMap(np.abs(a.data - b.data).mean(axis=2))


def mask_ratio(mask: BinaryMask) -> float:
    """Fraction of pixels inside the edit region."""
    return float(mask.bits.mean())
