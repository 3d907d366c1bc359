"""Inpainting-exchange compositing, spectral forensics diagnostics, detector
evaluation metrics, and bottleneck-theory validators."""

__version__ = "0.1.0"

from .imgcore import (
    AlphaMatte,
    BinaryMask,
    DiffMap,
    RasterImage,
    diff_map,
    exchange,
    load_image,
    load_mask,
    mask_ratio,
    save_image,
    save_mask,
    soft_exchange,
)
from .corrupt import LightSpotParams, gaussian_blur, jpeg_compress, light_spot, light_spot_random
from .spectra import (
    RadialPSD,
    SpectralFingerprint,
    WaveletEnergyProfile,
    cross_difference,
    fingerprint,
    haar_energies,
    merge_fingerprints,
    radial_psd,
    spectral_mse,
    to_luma,
)
from .stats import (
    CorrelationReport,
    SignalTriple,
    image_level_correlations,
    pearson,
    pixel_level_correlations,
    spearman,
)
from .evalharness import (
    ClassificationReport,
    DetectionRecord,
    LocalizationReport,
    SaliencyMap,
    classification_metrics,
    load_manifest,
    localization_metrics,
    stratify_by_mask_ratio,
)
from .theoryval import (
    BottleneckSim,
    NoisyImageModel,
    TheoremReport,
    bottleneck_reconstruct,
    check_variance_contraction,
    check_wavelet_decay,
    detectability_gap_demo,
    exchange_mask_ratio_trend,
)
