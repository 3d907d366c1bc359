"""Pearson/Spearman correlation machinery for the reconstruction-artifact
signal triple (reconstruction error, inpainting difference, high-frequency
content), at image and pixel level."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PAIRS = (
    ("vae_loss", "high_freq"),
    ("vae_loss", "inpaint_diff"),
    ("inpaint_diff", "high_freq"),
)


@dataclass(frozen=True)
class SignalTriple:
    """Aligned signals per item: scalars (image level) or 2D maps (pixel level)."""

    vae_loss: object
    inpaint_diff: object
    high_freq: object

    def get(self, name: str):
        return getattr(self, name)


@dataclass
class CorrelationReport:
    level: str
    n: int
    pairs: dict = field(default_factory=dict)
    n_skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "n": self.n,
            "n_skipped": self.n_skipped,
            "pairs": self.pairs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorrelationReport":
        return cls(
            level=d["level"], n=d["n"], pairs=d["pairs"], n_skipped=d.get("n_skipped", 0)
        )


def pearson(x, y) -> float:
    """Sample Pearson correlation; raises on constant input."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt((dx * dx).sum())
    sy = np.sqrt((dy * dy).sum())
    if sx == 0.0 or sy == 0.0:
        raise ValueError("pearson undefined for constant input")
    r = float((dx * dy).sum() / (sx * sy))
    return min(1.0, max(-1.0, r))


def rankdata(x) -> np.ndarray:
    """1-based ranks with ties assigned their average rank."""
    x = np.asarray(x, dtype=np.float64).ravel()
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation (Pearson over average-tie ranks)."""
    return pearson(rankdata(x), rankdata(y))


def image_level_correlations(triples: list[SignalTriple]) -> CorrelationReport:
    """Pairwise r and rho across per-image mean signals."""
    if len(triples) < 3:
        raise ValueError(f"need at least 3 images, got {len(triples)}")
    report = CorrelationReport(level="image", n=len(triples))
    for a, b in PAIRS:
        xs = np.array([float(np.asarray(t.get(a)).mean()) for t in triples])
        ys = np.array([float(np.asarray(t.get(b)).mean()) for t in triples])
        report.pairs[f"{a}__{b}"] = {
            "pearson": pearson(xs, ys),
            "spearman": spearman(xs, ys),
        }
    return report


def pixel_level_correlations(
    triples: list[SignalTriple],
    masks: list | None = None,
    region: str = "full",
) -> CorrelationReport:
    """Per-image correlations over pixels, aggregated as mean +- std.

    region="background" restricts each image to its unmasked pixels (requires
    masks). Images where any signal is constant over the selected region are
    skipped and counted.
    """
    if region not in ("full", "background"):
        raise ValueError(f"unknown region {region!r}")
    if region == "background" and masks is None:
        raise ValueError("background region requires masks")
    per_pair: dict[str, dict[str, list[float]]] = {
        f"{a}__{b}": {"pearson": [], "spearman": []} for a, b in PAIRS
    }
    n_skipped = 0
    for i, t in enumerate(triples):
        sel = None
        if region == "background":
            sel = ~np.asarray(masks[i].bits if hasattr(masks[i], "bits") else masks[i])
        signals = {}
        for name in ("vae_loss", "inpaint_diff", "high_freq"):
            v = np.asarray(t.get(name), dtype=np.float64)
            v = v[sel] if sel is not None else v.ravel()
            signals[name] = v
        if any(len(v) < 16 for v in signals.values()):
            raise ValueError(f"image {i}: fewer than 16 pixels")
        if any(np.ptp(v) == 0.0 for v in signals.values()):
            n_skipped += 1
            continue
        for a, b in PAIRS:
            key = f"{a}__{b}"
            per_pair[key]["pearson"].append(pearson(signals[a], signals[b]))
            per_pair[key]["spearman"].append(spearman(signals[a], signals[b]))
    report = CorrelationReport(level="pixel", n=len(triples) - n_skipped, n_skipped=n_skipped)
    for key, vals in per_pair.items():
        report.pairs[key] = {
            "pearson_mean": float(np.mean(vals["pearson"])) if vals["pearson"] else None,
            "pearson_std": float(np.std(vals["pearson"])) if vals["pearson"] else None,
            "spearman_mean": float(np.mean(vals["spearman"])) if vals["spearman"] else None,
            "spearman_std": float(np.std(vals["spearman"])) if vals["spearman"] else None,
        }
    return report
