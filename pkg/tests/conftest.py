import numpy as np
import pytest

from inpaintx.imgcore import BinaryMask, RasterImage


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_image(rng, height, width, channels=3):
    """Random image whose samples sit exactly on the 8-bit grid."""
    u8 = rng.integers(0, 256, size=(height, width, channels), dtype=np.uint8)
    return RasterImage.from_u8(u8)


def random_mask(rng, height, width, p=0.3):
    return BinaryMask(rng.random((height, width)) < p)


def natural_test_image(height=96, width=96, channels=3, noise=0.02, seed=1):
    """Smooth synthetic scene with mild noise, for codec/filter tests."""
    yy, xx = np.mgrid[0:height, 0:width]
    yy = yy / height
    xx = xx / width
    base = 0.5 + 0.2 * np.sin(2 * np.pi * 3 * xx) * np.cos(2 * np.pi * 2 * yy) + 0.1 * (xx - 0.5)
    r = np.random.default_rng(seed)
    if channels == 1:
        data = base[:, :, None]
    else:
        data = np.stack([base, base * 0.9 + 0.05, base * 0.8 + 0.1], axis=2)
    data = data + noise * r.standard_normal(data.shape)
    return RasterImage.from_u8(
        np.clip(np.floor(np.clip(data, 0, 1) * 255 + 0.5), 0, 255).astype(np.uint8)
    )
