import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inpaintx.evalharness import (
    DetectionRecord,
    SaliencyMap,
    average_precision,
    classification_metrics,
    load_manifest,
    localization_metrics,
    roc_auc,
    stratify_by_mask_ratio,
)
from inpaintx.imgcore import BinaryMask


def auc_oracle(labels, scores):
    """All-pairs Mann-Whitney count with 0.5 tie credit."""
    pos = [s for l, s in zip(labels, scores) if l == 1]
    neg = [s for l, s in zip(labels, scores) if l == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def ap_sweep_oracle(scores, truth):
    """Exhaustive precision/recall sweep over every distinct score threshold."""
    scores = np.asarray(scores, dtype=float).ravel()
    truth = np.asarray(truth, dtype=bool).ravel()
    n_pos = truth.sum()
    ap = 0.0
    prev_recall = 0.0
    for t in sorted(set(scores), reverse=True):
        pred = scores >= t
        tp = (pred & truth).sum()
        prec = tp / pred.sum()
        rec = tp / n_pos
        ap += prec * (rec - prev_recall)
        prev_recall = rec
    return ap


def make_records(labels, scores):
    return [
        DetectionRecord(f"item-{i}", int(l), float(s))
        for i, (l, s) in enumerate(zip(labels, scores))
    ]


class TestClassificationMetrics:
    def test_perfect_separation(self):
        recs = make_records([0, 0, 0, 1, 1, 1], [0.1, 0.2, 0.3, 0.7, 0.8, 0.9])
        rep = classification_metrics(recs, threshold=0.5)
        assert rep.acc == rep.auc == rep.f1 == 1.0

    def test_all_tied_scores_auc_half(self):
        recs = make_records([0, 1, 0, 1], [0.5] * 4)
        rep = classification_metrics(recs, threshold=0.5)
        assert rep.auc == 0.5

    def test_six_record_toy_vs_oracles(self):
        labels = [1, 0, 1, 0, 1, 0]
        scores = [0.9, 0.9, 0.6, 0.4, 0.2, 0.1]
        rep = classification_metrics(make_records(labels, scores), threshold=0.5)
        assert rep.auc == pytest.approx(auc_oracle(labels, scores), abs=1e-12)
        # hand count at threshold 0.5: predicted fake = {0.9, 0.9, 0.6}
        # tp=2 fp=1 fn=1 tn=2
        assert rep.acc == pytest.approx(4 / 6)
        assert rep.precision == pytest.approx(2 / 3)
        assert rep.recall == pytest.approx(2 / 3)
        assert rep.f1 == pytest.approx(2 / 3)

    def test_randomized_sets_match_brute_force(self, rng):
        for _ in range(20):
            labels = rng.integers(0, 2, size=10)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.random(10), 2)  # rounding forces ties
            rep = classification_metrics(make_records(labels, scores), threshold=0.5)
            assert rep.auc == pytest.approx(auc_oracle(labels, scores), abs=1e-9)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            classification_metrics(make_records([1, 1], [0.5, 0.6]))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_auc_invariant_under_monotone_transform(self, seed):
        r = np.random.default_rng(seed)
        labels = r.integers(0, 2, size=12)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = r.random(12)
        base = roc_auc(labels, scores)
        squashed = 1.0 / (1.0 + np.exp(-5 * (scores - 0.5)))
        assert roc_auc(labels, squashed) == pytest.approx(base, abs=1e-12)

    def test_optimal_threshold_beats_prior(self, rng):
        labels = rng.integers(0, 2, size=50)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = rng.random(50)
        recs = make_records(labels, scores)
        best = max(
            classification_metrics(recs, threshold=t).acc
            for t in list(scores) + [0.0, 1.1]
        )
        prior = max(labels.mean(), 1 - labels.mean())
        assert best >= prior

    def test_record_validation(self):
        with pytest.raises(ValueError):
            DetectionRecord("x", 2, 0.5)
        with pytest.raises(ValueError):
            DetectionRecord("x", 1, 1.2)


class TestLocalizationMetrics:
    def test_saliency_equals_mask(self, rng):
        bits = rng.random((224, 224)) < 0.2
        items = [(SaliencyMap(bits.astype(float)), BinaryMask(bits))]
        rep = localization_metrics(items)
        assert rep.miou == 1.0
        assert rep.map == pytest.approx(1.0)

    def test_disjoint_iou_zero(self):
        sal = np.zeros((224, 224))
        sal[:10] = 1.0
        bits = np.zeros((224, 224), dtype=bool)
        bits[-10:] = True
        rep = localization_metrics([(SaliencyMap(sal), BinaryMask(bits))])
        assert rep.per_item[0]["iou"] == 0.0

    def test_both_empty_iou_one_and_ap_skipped(self):
        rep = localization_metrics(
            [(SaliencyMap(np.zeros((224, 224))), BinaryMask(np.zeros((224, 224), dtype=bool)))]
        )
        assert rep.miou == 1.0
        assert rep.n_ap_skipped == 1

    def test_small_maps_ap_matches_sweep_oracle(self, rng):
        for _ in range(25):
            scores = np.round(rng.random((4, 4)), 1)
            truth = rng.random((4, 4)) < 0.4
            if not truth.any():
                truth[0, 0] = True
            got = average_precision(scores, truth)
            assert got == pytest.approx(ap_sweep_oracle(scores, truth), abs=1e-9)

    def test_binary_saliency_ap_reduces_to_sweep(self, rng):
        scores = (rng.random((4, 4)) < 0.5).astype(float)
        truth = rng.random((4, 4)) < 0.5
        if not truth.any():
            truth[1, 1] = True
        assert average_precision(scores, truth) == pytest.approx(
            ap_sweep_oracle(scores, truth), abs=1e-12
        )

    def test_resizing_applied(self, rng):
        bits = np.zeros((64, 64), dtype=bool)
        bits[16:48, 16:48] = True
        sal = bits.astype(float)
        rep = localization_metrics([(SaliencyMap(sal), BinaryMask(bits))])
        assert rep.miou > 0.9  # bilinear edge softening keeps it just under 1

    def test_permutation_invariance(self, rng):
        items = []
        for _ in range(4):
            bits = rng.random((16, 16)) < 0.3
            items.append((SaliencyMap(rng.random((16, 16))), BinaryMask(bits)))
        a = localization_metrics(items)
        b = localization_metrics(items[::-1])
        assert a.miou == pytest.approx(b.miou)
        assert a.map == pytest.approx(b.map)

    def test_empty_items_rejected(self):
        with pytest.raises(ValueError):
            localization_metrics([])


class TestStratify:
    def test_single_bin_reproduces_unstratified(self, rng):
        labels = rng.integers(0, 2, size=30)
        labels[:2] = [0, 1]
        scores = rng.random(30)
        recs = make_records(labels, scores)
        ratios = rng.random(30)
        strata = stratify_by_mask_ratio(list(zip(recs, ratios)), [0.0, 1.0])
        full = classification_metrics(recs, 0.5)
        assert strata[0]["report"]["auc"] == pytest.approx(full.auc)
        assert strata[0]["n"] == 30

    def test_empty_bins_flagged(self, rng):
        recs = make_records([0, 1, 0, 1], [0.2, 0.8, 0.3, 0.9])
        pairs = [(r, 0.05) for r in recs]
        strata = stratify_by_mask_ratio(pairs, [0.0, 0.1, 0.5, 1.0])
        assert strata[0]["flag"] is None
        assert strata[1]["flag"] == "empty"
        assert strata[2]["flag"] == "empty"

    def test_non_monotone_edges_rejected(self):
        with pytest.raises(ValueError):
            stratify_by_mask_ratio([], [0.0, 0.5, 0.3])

    def test_score_growing_with_ratio_gives_monotone_accuracy(self, rng):
        pairs = []
        for i in range(300):
            ratio = rng.random()
            label = int(i % 2)
            # detector that sees big masks well and small ones at chance
            score = np.clip(0.5 + (ratio - 0.1) * label + 0.05 * rng.standard_normal(), 0, 1)
            pairs.append((DetectionRecord(f"i{i}", label, float(score)), ratio))
        strata = stratify_by_mask_ratio(pairs, [0.0, 0.25, 0.5, 1.0], threshold=0.6)
        accs = [s["report"]["acc"] for s in strata]
        assert accs[0] <= accs[1] <= accs[2]


class TestManifest:
    def test_well_formed(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(
            "item_id,label,score\n"
            "a,0,0.1\n"
            "b,1,0.9\n"
            "c,1,0.7\n"
        )
        rows = load_manifest(p)
        assert len(rows) == 3
        assert rows[1].record.score == 0.9

    def test_out_of_range_score_reports_line(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("item_id,label,score\na,0,0.1\nb,1,1.2\n")
        with pytest.raises(ValueError, match="line 3"):
            load_manifest(p)

    def test_missing_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("id,gt,prob\na,0,0.1\n")
        with pytest.raises(ValueError, match="header"):
            load_manifest(p)

    def test_duplicate_item_id_rejected(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("item_id,label,score\na,0,0.1\na,1,0.9\n")
        with pytest.raises(ValueError, match="duplicate"):
            load_manifest(p)

    def test_optional_paths_resolved_relative(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(
            "item_id,label,score,mask_path,saliency_path,mask_ratio\n"
            "a,1,0.9,masks/a.png,sal/a.png,0.12\n"
        )
        rows = load_manifest(p)
        assert rows[0].mask_path == tmp_path / "masks/a.png"
        assert rows[0].mask_ratio == 0.12
