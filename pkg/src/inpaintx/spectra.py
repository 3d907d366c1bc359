"""Frequency-domain diagnostics: cross-difference filtering, averaged spectral
fingerprints, spectral-MSE scores, radial power spectra, and Haar wavelet
per-scale energies."""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from .imgcore import RasterImage


def to_luma(img: RasterImage) -> RasterImage:
    """Rec.601 luma (0.299 R + 0.587 G + 0.114 B); identity on grayscale."""
    if img.channels == 1:
        return img
    return RasterImage(np.clip(img.luma2d(), 0.0, 1.0)[:, :, None])


def _as_2d(img) -> np.ndarray:
    if isinstance(img, RasterImage):
        if img.channels != 1:
            raise ValueError("expected a single-channel image")
        return img.data[:, :, 0]
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected 2D data, got shape {arr.shape}")
    return arr


def cross_difference(img) -> np.ndarray:
    """Second-difference high-pass |I[i,j] - I[i+1,j] - I[i,j+1] + I[i+1,j+1]|.

    Output is (H-1)x(W-1) and is returned as a raw array: values can exceed 1
    (a 0/1 checkerboard yields a constant 2) and are deliberately not clamped.
    """
    a = _as_2d(img)
    if a.shape[0] < 2 or a.shape[1] < 2:
        raise ValueError(f"image too small for cross-difference: {a.shape}")
    return np.abs(a[:-1, :-1] - a[1:, :-1] - a[:-1, 1:] + a[1:, 1:])


def _resize_bilinear(img: RasterImage, size: int) -> RasterImage:
    channels = []
    for c in range(img.channels):
        pil = Image.fromarray(img.data[:, :, c].astype(np.float32), mode="F")
        channels.append(np.asarray(pil.resize((size, size), Image.BILINEAR), dtype=np.float64))
    return RasterImage(np.clip(np.stack(channels, axis=2), 0.0, 1.0))


@dataclass
class SpectralFingerprint:
    """Dataset-averaged, per-image-normalized, DC-centered FFT magnitude."""

    magnitude: np.ndarray
    count: int

    def __post_init__(self):
        if self.magnitude.ndim != 2 or self.magnitude.shape[0] != self.magnitude.shape[1]:
            raise ValueError(f"fingerprint must be square, got {self.magnitude.shape}")
        if self.count < 1:
            raise ValueError("fingerprint count must be >= 1")
        if not np.isfinite(self.magnitude).all() or self.magnitude.min() < 0:
            raise ValueError("fingerprint magnitudes must be finite and >= 0")

    @property
    def size(self) -> int:
        return self.magnitude.shape[0]

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "count": self.count,
            "magnitude": self.magnitude.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralFingerprint":
        size = int(d["size"])
        mag = np.asarray(d["magnitude"], dtype=np.float64).reshape(size, size)
        return cls(mag, int(d["count"]))

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_dict(), sort_keys=True))
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "SpectralFingerprint":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save_heatmap(self, path) -> None:
        """8-bit PNG export, log-scaled for display only."""
        disp = np.log1p(self.magnitude / max(self.magnitude.max(), 1e-30) * 1e4)
        disp = disp / max(disp.max(), 1e-30)
        from .imgcore import save_image

        save_image(RasterImage(disp[:, :, None]), path, format="png")


def _single_spectrum(img: RasterImage, resize_to: int | None) -> np.ndarray:
    if resize_to is not None and (img.width, img.height) != (resize_to, resize_to):
        img = _resize_bilinear(img, resize_to)
    cd = cross_difference(to_luma(img))
    mag = np.abs(np.fft.fft2(cd))
    total = mag.sum()
    if total > 0:
        mag = mag / total
    return np.fft.fftshift(mag)


def fingerprint(images: Iterable[RasterImage], resize_to: int | None = 512) -> SpectralFingerprint:
    """Average the normalized cross-difference FFT magnitude over a corpus.

    Each image contributes unit spectral mass, so the result (and the MSE
    score built on it) is invariant to per-image exposure.
    """
    acc = None
    count = 0
    for img in images:
        spec = _single_spectrum(img, resize_to)
        acc = spec if acc is None else acc + spec
        count += 1
    if count == 0:
        raise ValueError("fingerprint requires at least one image")
    return SpectralFingerprint(acc / count, count)


def merge_fingerprints(a: SpectralFingerprint, b: SpectralFingerprint) -> SpectralFingerprint:
    """Count-weighted merge of two partial fingerprints."""
    if a.size != b.size:
        raise ValueError(f"fingerprint sizes differ: {a.size} vs {b.size}")
    n = a.count + b.count
    return SpectralFingerprint((a.magnitude * a.count + b.magnitude * b.count) / n, n)


def spectral_mse(a: SpectralFingerprint, b: SpectralFingerprint) -> float:
    """Mean squared per-bin difference, scaled by 1000."""
    if a.size != b.size:
        raise ValueError(f"fingerprint sizes differ: {a.size} vs {b.size}")
    return float(np.mean((a.magnitude - b.magnitude) ** 2) * 1000.0)


@dataclass
class RadialPSD:
    """Mean spectral power per radial-frequency annulus (cycles/pixel)."""

    bin_edges: np.ndarray
    power: np.ndarray

    @property
    def bin_centers(self) -> np.ndarray:
        return (self.bin_edges[:-1] + self.bin_edges[1:]) / 2.0


def radial_frequency_grid(height: int, width: int) -> np.ndarray:
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    return np.sqrt(fx * fx + fy * fy)


def radial_psd(img, n_bins: int) -> RadialPSD:
    """Radially averaged |FFT|^2. Bin 0 contains DC; frequencies past the
    Nyquist 0.5 (grid corners) fold into the last bin."""
    if n_bins < 2:
        raise ValueError(f"n_bins must be >= 2, got {n_bins}")
    x = _as_2d(img)
    if x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError(f"image too small for radial PSD: {x.shape}")
    power = np.abs(np.fft.fft2(x)) ** 2
    rho = radial_frequency_grid(*x.shape)
    edges = np.linspace(0.0, 0.5, n_bins + 1)
    idx = np.minimum(np.searchsorted(edges, rho, side="right") - 1, n_bins - 1)
    out = np.zeros(n_bins)
    counts = np.bincount(idx.ravel(), minlength=n_bins)
    sums = np.bincount(idx.ravel(), weights=power.ravel(), minlength=n_bins)
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz]
    return RadialPSD(edges, out)


@dataclass
class WaveletEnergyProfile:
    """Orthonormal Haar detail energy per scale plus the coarse remainder.

    Scale indices are the subband side exponent: a level entry (q, E) holds the
    summed LH/HL/HH energy of the 2^q x 2^q detail subbands; larger q = finer.
    """

    levels: list = field(default_factory=list)  # [(scale q, energy), ...] finest first
    approx_energy: float = 0.0

    @property
    def total_energy(self) -> float:
        return self.approx_energy + sum(e for _, e in self.levels)

    def energy_at(self, scale: int) -> float:
        for q, e in self.levels:
            if q == scale:
                return e
        raise KeyError(f"no detail scale {scale} in profile")


def _haar_step(x: np.ndarray) -> tuple[np.ndarray, float]:
    """One orthonormal 2D Haar analysis step: approximation + detail energy."""
    a = x[0::2, 0::2]
    b = x[0::2, 1::2]
    c = x[1::2, 0::2]
    d = x[1::2, 1::2]
    ll = (a + b + c + d) / 2.0
    lh = (a - b + c - d) / 2.0
    hl = (a + b - c - d) / 2.0
    hh = (a - b - c + d) / 2.0
    detail = float((lh * lh).sum() + (hl * hl).sum() + (hh * hh).sum())
    return ll, detail


def haar_energies(img, levels: int) -> WaveletEnergyProfile:
    """Per-scale detail energies of the orthonormal 2D Haar transform.

    Requires a square power-of-two input; anything else is center-cropped to
    the largest admissible square (with a warning).
    """
    x = _as_2d(img)
    h, w = x.shape
    side = 2 ** int(math.floor(math.log2(min(h, w))))
    if (h, w) != (side, side):
        warnings.warn(
            f"haar_energies: {h}x{w} input center-cropped to {side}x{side}",
            stacklevel=2,
        )
        top = (h - side) // 2
        left = (w - side) // 2
        x = x[top : top + side, left : left + side]
    k = int(math.log2(side))
    if levels < 1 or levels > k:
        raise ValueError(f"levels must be in 1..{k} for a {side}x{side} image, got {levels}")
    profile = WaveletEnergyProfile()
    cur = x.astype(np.float64)
    for step in range(1, levels + 1):
        cur, detail = _haar_step(cur)
        profile.levels.append((k - step, detail))
    profile.approx_energy = float((cur * cur).sum())
    return profile
