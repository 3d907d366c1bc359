"""Comparison corruptions: Gaussian blur, localized light spot, JPEG compression."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .filters import blur_radius, convolve_separable, gaussian_kernel_1d
from .imgcore import RasterImage


@dataclass(frozen=True)
class LightSpotParams:
    """Center, radius, and peak gain of a Gaussian illumination spot."""

    center: tuple[int, int]  # (x, y)
    radius: float
    gain: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.gain < 1.0:
            raise ValueError(f"gain must be >= 1, got {self.gain}")


def gaussian_blur(img: RasterImage, sigma: float) -> RasterImage:
    """Separable Gaussian blur, kernel truncated at +-3 sigma, reflected edges."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    kernel = gaussian_kernel_1d(sigma, blur_radius(sigma))
    out = convolve_separable(img.data, kernel)
    return RasterImage(np.clip(out, 0.0, 1.0))


def light_spot(img: RasterImage, params: LightSpotParams) -> RasterImage:
    """Multiply by a radial gain 1 + (A-1)*exp(-d^2 / (2 r^2)) around the center."""
    cx, cy = params.center
    if not (0 <= cx < img.width and 0 <= cy < img.height):
        raise ValueError(f"center {params.center} outside {img.width}x{img.height} image")
    yy, xx = np.mgrid[0 : img.height, 0 : img.width]
    d2 = (xx - cx) ** 2.0 + (yy - cy) ** 2.0
    gain = 1.0 + (params.gain - 1.0) * np.exp(-d2 / (2.0 * params.radius**2))
    out = img.data * gain[:, :, None]
    return RasterImage(np.clip(out, 0.0, 1.0))


def light_spot_random(
    img: RasterImage,
    radius: float,
    gain: float,
    seed: int | np.random.Generator,
) -> tuple[RasterImage, LightSpotParams]:
    """Light spot at a center drawn uniformly over the pixel grid.

    Passing a Generator lets a caller stream independent draws over a batch
    while keeping the whole batch reproducible from one seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cx = int(rng.integers(0, img.width))
    cy = int(rng.integers(0, img.height))
    params = LightSpotParams(center=(cx, cy), radius=radius, gain=gain)
    return light_spot(img, params), params


def jpeg_compress(img: RasterImage, quality: int) -> RasterImage:
    """Baseline JPEG encode/decode round trip at the given IJG quality.

    Color images use 4:2:0 chroma subsampling; the result is deterministic for
    a fixed input.
    """
    if not (1 <= quality <= 100):
        raise ValueError(f"quality must be in 1..100, got {quality}")
    arr = img.to_u8()
    if img.channels == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
        subsampling = 0
    else:
        pil = Image.fromarray(arr, mode="RGB")
        subsampling = 2
    buf = io.BytesIO()
    pil.save(buf, format="JPEG", quality=quality, subsampling=subsampling)
    buf.seek(0)
    with Image.open(buf) as back:
        back.load()
        decoded = np.asarray(back)
    return RasterImage.from_u8(decoded)
