"""Detector-evaluation metrics: classification scores from ingested detector
outputs, localization scores from ingested saliency maps, and mask-size
stratification."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .imgcore import BinaryMask

LOCALIZATION_SIZE = 224
SALIENCY_THRESHOLD = 0.5


@dataclass(frozen=True)
class DetectionRecord:
    """One detector output row: item id, ground truth (fake=1), fake probability."""

    item_id: str
    label: int
    score: float

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass
class ClassificationReport:
    acc: float
    auc: float
    precision: float
    recall: float
    f1: float
    threshold: float
    n_pos: int
    n_neg: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SaliencyMap:
    """Continuous [0,1] localization heatmap."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise ValueError(f"saliency map must be 2D, got shape {v.shape}")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("saliency values must lie in [0, 1]")


@dataclass
class LocalizationReport:
    miou: float
    map: float
    n_items: int
    n_ap_skipped: int
    per_item: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "miou": self.miou,
            "map": self.map,
            "n_items": self.n_items,
            "n_ap_skipped": self.n_ap_skipped,
            "per_item": self.per_item,
        }


def load_saliency(path) -> SaliencyMap:
    """8-bit grayscale PNG mapped linearly to [0, 1]."""
    with Image.open(path) as im:
        im.load()
        arr = np.asarray(im.convert("L"))
    return SaliencyMap(arr.astype(np.float64) / 255.0)


def roc_auc(labels: np.ndarray, scores: np.ndarray) -> float:
    """ROC area via the Mann-Whitney rank statistic, ties credited 0.5."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: need both classes")
    from .stats import rankdata

    ranks = rankdata(scores)
    pos_rank_sum = ranks[labels == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def classification_metrics(
    records: list[DetectionRecord], threshold: float = 0.5
) -> ClassificationReport:
    """Accuracy/precision/recall/F1 at the threshold plus threshold-free AUC.

    Prediction rule: fake iff score >= threshold. Precision (and F1) are 0
    when no positives are predicted.
    """
    if not records:
        raise ValueError("no records")
    labels = np.array([r.label for r in records])
    scores = np.array([r.score for r in records])
    auc = roc_auc(labels, scores)
    pred = scores >= threshold
    tp = int((pred & (labels == 1)).sum())
    fp = int((pred & (labels == 0)).sum())
    fn = int((~pred & (labels == 1)).sum())
    tn = int((~pred & (labels == 0)).sum())
    acc = (tp + tn) / len(records)
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    return ClassificationReport(
        acc=float(acc),
        auc=auc,
        precision=float(precision),
        recall=float(recall),
        f1=float(f1),
        threshold=float(threshold),
        n_pos=int((labels == 1).sum()),
        n_neg=int((labels == 0).sum()),
    )


def average_precision(scores: np.ndarray, truth: np.ndarray) -> float:
    """AP of a continuous score map against binary truth, over the ranked
    pixel list: sum of precision * recall-increment at each unique score
    threshold, descending."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=bool).ravel()
    n_pos = int(truth.sum())
    if n_pos == 0:
        raise ValueError("AP undefined for an empty ground-truth mask")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    t = truth[order]
    tp_cum = np.cumsum(t)
    k = np.arange(1, len(s) + 1)
    # group boundaries: last index of each unique score value
    boundary = np.nonzero(np.diff(s))[0]
    idx = np.concatenate([boundary, [len(s) - 1]])
    ap = 0.0
    prev_recall = 0.0
    for i in idx:
        prec = tp_cum[i] / k[i]
        rec = tp_cum[i] / n_pos
        ap += prec * (rec - prev_recall)
        prev_recall = rec
    return float(ap)


def _resize_mask(mask: BinaryMask, size: int) -> np.ndarray:
    if mask.bits.shape == (size, size):
        return mask.bits
    pil = Image.fromarray(mask.bits.astype(np.uint8) * 255, mode="L")
    return np.asarray(pil.resize((size, size), Image.NEAREST)) >= 128


def _resize_saliency(sal: SaliencyMap, size: int) -> np.ndarray:
    if sal.values.shape == (size, size):
        return sal.values
    pil = Image.fromarray(sal.values.astype(np.float32), mode="F")
    return np.clip(np.asarray(pil.resize((size, size), Image.BILINEAR), dtype=np.float64), 0.0, 1.0)


def localization_metrics(items: list[tuple[SaliencyMap, BinaryMask]]) -> LocalizationReport:
    """mIoU of thresholded saliency and mean per-item pixel-wise AP.

    Both maps are resized to 224x224 (saliency bilinear, mask nearest). IoU of
    an empty prediction against an empty mask is 1; AP is skipped (and
    counted) for empty masks.
    """
    if not items:
        raise ValueError("no items")
    ious = []
    aps = []
    per_item = []
    n_ap_skipped = 0
    for sal, mask in items:
        s = _resize_saliency(sal, LOCALIZATION_SIZE)
        m = _resize_mask(mask, LOCALIZATION_SIZE)
        pred = s >= SALIENCY_THRESHOLD
        union = int((pred | m).sum())
        inter = int((pred & m).sum())
        iou = 1.0 if union == 0 else inter / union
        ious.append(iou)
        entry = {"iou": iou}
        if m.any():
            ap = average_precision(s, m)
            aps.append(ap)
            entry["ap"] = ap
        else:
            n_ap_skipped += 1
            entry["ap"] = None
        per_item.append(entry)
    return LocalizationReport(
        miou=float(np.mean(ious)),
        map=float(np.mean(aps)) if aps else 0.0,
        n_items=len(items),
        n_ap_skipped=n_ap_skipped,
        per_item=per_item,
    )


def stratify_by_mask_ratio(
    records: list[tuple[DetectionRecord, float]],
    edges: list[float],
    threshold: float = 0.5,
) -> list[dict]:
    """Bucket (record, mask_ratio) pairs by ratio and score each bucket.

    Buckets are [e_i, e_{i+1}), the last one closed on the right. Buckets that
    are empty or single-class are flagged instead of scored.
    """
    edges = [float(e) for e in edges]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"edges must be strictly increasing, got {edges}")
    buckets: list[list[DetectionRecord]] = [[] for _ in range(len(edges) - 1)]
    for rec, ratio in records:
        for i in range(len(edges) - 1):
            last = i == len(edges) - 2
            if edges[i] <= ratio < edges[i + 1] or (last and ratio == edges[i + 1]):
                buckets[i].append(rec)
                break
    out = []
    for i, bucket in enumerate(buckets):
        entry = {"lo": edges[i], "hi": edges[i + 1], "n": len(bucket)}
        labels = {r.label for r in bucket}
        if not bucket:
            entry["flag"] = "empty"
            entry["report"] = None
        elif labels != {0, 1}:
            entry["flag"] = "single-class"
            entry["report"] = None
        else:
            entry["flag"] = None
            entry["report"] = classification_metrics(bucket, threshold).to_dict()
        out.append(entry)
    return out


@dataclass(frozen=True)
class ManifestRow:
    record: DetectionRecord
    mask_path: Path | None = None
    saliency_path: Path | None = None
    mask_ratio: float | None = None


def load_manifest(path) -> list[ManifestRow]:
    """Read a detector-score CSV: item_id,label,score[,mask_path,saliency_path,mask_ratio].

    Paths are resolved relative to the manifest's directory. Malformed rows
    are reported with their line numbers; duplicate item ids are rejected.
    """
    path = Path(path)
    base = path.parent
    rows: list[ManifestRow] = []
    errors: list[str] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"item_id", "label", "score"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(
                f"{path}: manifest header must contain item_id,label,score "
                f"(got {reader.fieldnames})"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                item_id = row["item_id"]
                if not item_id:
                    raise ValueError("empty item_id")
                if item_id in seen:
                    raise ValueError(f"duplicate item_id {item_id!r}")
                rec = DetectionRecord(
                    item_id=item_id,
                    label=int(row["label"]),
                    score=float(row["score"]),
                )
                seen.add(item_id)
                mask_path = base / row["mask_path"] if row.get("mask_path") else None
                sal_path = base / row["saliency_path"] if row.get("saliency_path") else None
                ratio = float(row["mask_ratio"]) if row.get("mask_ratio") else None
                rows.append(ManifestRow(rec, mask_path, sal_path, ratio))
            except (ValueError, KeyError) as exc:
                errors.append(f"line {lineno}: {exc}")
    if errors:
        raise ValueError(f"{path}: malformed manifest rows:\n" + "\n".join(errors))
    return rows
