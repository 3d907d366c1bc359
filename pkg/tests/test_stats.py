import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inpaintx.stats import (
    CorrelationReport,
    SignalTriple,
    image_level_correlations,
    pearson,
    pixel_level_correlations,
    rankdata,
    spearman,
)


def pearson_oracle(x, y):
    """Direct covariance/sigma formula, no shared code with the implementation."""
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y)) / n
    sx = math.sqrt(sum((a - mx) ** 2 for a in x) / n)
    sy = math.sqrt(sum((b - my) ** 2 for b in y) / n)
    return cov / (sx * sy)


def ranks_oracle(x):
    """Average-rank assignment by explicit sorting and tie grouping."""
    pairs = sorted((v, i) for i, v in enumerate(x))
    out = [0.0] * len(x)
    i = 0
    while i < len(pairs):
        j = i
        while j + 1 < len(pairs) and pairs[j + 1][0] == pairs[i][0]:
            j += 1
        avg = (i + j) / 2 + 1
        for _, idx in pairs[i : j + 1]:
            out[idx] = avg
        i = j + 1
    return out


class TestPearson:
    def test_identity(self):
        x = [1.0, 2.0, 5.0, 7.0]
        assert pearson(x, x) == pytest.approx(1.0)

    def test_negative_affine(self):
        x = np.array([1.0, 2.0, 3.0, 9.0])
        assert pearson(x, -2 * x + 3) == pytest.approx(-1.0)

    def test_matches_direct_formula(self):
        x = [1.0, 2.0, 3.0, 4.0]
        y = [1.0, 3.0, 2.0, 4.0]
        assert pearson(x, y) == pytest.approx(pearson_oracle(x, y), abs=1e-12)

    def test_constant_input_rejected(self):
        with pytest.raises(ValueError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_length_checks(self):
        with pytest.raises(ValueError):
            pearson([1.0], [2.0])
        with pytest.raises(ValueError):
            pearson([1.0, 2.0], [1.0, 2.0, 3.0])

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(0, 2**31),
        scale=st.floats(0.1, 100),
        shift=st.floats(-50, 50),
    )
    def test_positive_affine_invariance(self, seed, scale, shift):
        r = np.random.default_rng(seed)
        x = r.standard_normal(12)
        y = r.standard_normal(12)
        base = pearson(x, y)
        assert pearson(scale * x + shift, y) == pytest.approx(base, abs=1e-9)
        assert pearson(-scale * x + shift, y) == pytest.approx(-base, abs=1e-9)

    def test_symmetry(self, rng):
        x = rng.standard_normal(10)
        y = rng.standard_normal(10)
        assert pearson(x, y) == pytest.approx(pearson(y, x))


class TestSpearman:
    def test_monotone_transform_is_one(self):
        x = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
        assert spearman(x, np.exp(x)) == pytest.approx(1.0)

    def test_tie_ranks_use_averages(self):
        assert rankdata([1.0, 1.0, 2.0]).tolist() == [1.5, 1.5, 3.0]

    def test_random_vectors_match_rank_then_pearson_oracle(self, rng):
        for _ in range(30):
            x = rng.integers(0, 6, size=10).astype(float)
            y = rng.integers(0, 6, size=10).astype(float)
            if np.ptp(ranks_oracle(x)) == 0 or np.ptp(ranks_oracle(y)) == 0:
                continue
            want = pearson_oracle(ranks_oracle(x), ranks_oracle(y))
            assert spearman(x, y) == pytest.approx(want, abs=1e-12)

    def test_invariant_under_increasing_transform(self, rng):
        x = rng.integers(-10, 10, size=15).astype(float)
        y = rng.integers(-10, 10, size=15).astype(float)
        assert spearman(x, y) == pytest.approx(spearman(x**3, y), abs=1e-12)


class TestImageLevel:
    def test_equal_signals_perfectly_correlated(self):
        triples = [SignalTriple(v, 2 * v + 1, v) for v in (0.1, 0.5, 0.3, 0.9)]
        rep = image_level_correlations(triples)
        pair = rep.pairs["vae_loss__high_freq"]
        assert pair["pearson"] == pytest.approx(1.0)
        assert pair["spearman"] == pytest.approx(1.0)

    def test_too_few_images(self):
        with pytest.raises(ValueError):
            image_level_correlations([SignalTriple(1.0, 2.0, 3.0)] * 2)

    def test_simulator_corpus_direction(self):
        # reconstruction error should track high-frequency content strongly;
        # shuffling the pairing must destroy the correlation
        from inpaintx.spectra import cross_difference
        from inpaintx.theoryval import BottleneckSim, NoisyImageModel, bottleneck_reconstruct

        model = NoisyImageModel(size=64, sigma_n=0.05, seed=11)
        sim = BottleneckSim(factor=8, mode="box")
        r = model.rng()
        triples = []
        for _ in range(100):
            # vary noise amplitude across images so there is signal to correlate
            scale = r.uniform(0.2, 2.0)
            x = np.clip(model.semantic(r) + scale * model.sigma_n * r.standard_normal((64, 64)), 0, 1)
            tx = bottleneck_reconstruct(x, sim)
            triples.append(
                SignalTriple(
                    vae_loss=float(np.abs(x - tx).mean()),
                    inpaint_diff=float(np.abs(x - tx).mean()) * r.uniform(0.5, 1.5),
                    high_freq=float(cross_difference(x).mean()),
                )
            )
        rep = image_level_correlations(triples)
        assert rep.pairs["vae_loss__high_freq"]["pearson"] > 0.5
        shuffled = [
            SignalTriple(t.vae_loss, t.inpaint_diff, triples[(i + 37) % 100].high_freq)
            for i, t in enumerate(triples)
        ]
        rep2 = image_level_correlations(shuffled)
        assert abs(rep2.pairs["vae_loss__high_freq"]["pearson"]) < 0.3


class TestPixelLevel:
    def test_identical_maps_mean_one_std_zero(self, rng):
        maps = [rng.random((8, 8)) for _ in range(4)]
        triples = [SignalTriple(m, m, m) for m in maps]
        rep = pixel_level_correlations(triples)
        for pair in rep.pairs.values():
            assert pair["pearson_mean"] == pytest.approx(1.0)
            assert pair["pearson_std"] == pytest.approx(0.0, abs=1e-12)

    def test_matches_per_image_flat_oracle(self, rng):
        triples = []
        for _ in range(2):
            a = rng.random((6, 6))
            b = a + 0.1 * rng.random((6, 6))
            c = rng.random((6, 6))
            triples.append(SignalTriple(a, b, c))
        rep = pixel_level_correlations(triples)
        want = np.mean(
            [pearson_oracle(t.vae_loss.ravel(), t.inpaint_diff.ravel()) for t in triples]
        )
        assert rep.pairs["vae_loss__inpaint_diff"]["pearson_mean"] == pytest.approx(want, abs=1e-12)

    def test_constant_images_skipped_and_counted(self, rng):
        good = SignalTriple(rng.random((8, 8)), rng.random((8, 8)), rng.random((8, 8)))
        flat = SignalTriple(np.zeros((8, 8)), rng.random((8, 8)), rng.random((8, 8)))
        rep = pixel_level_correlations([good, flat])
        assert rep.n == 1
        assert rep.n_skipped == 1

    def test_too_few_pixels_rejected(self, rng):
        t = SignalTriple(rng.random((3, 3)), rng.random((3, 3)), rng.random((3, 3)))
        with pytest.raises(ValueError):
            pixel_level_correlations([t])

    def test_background_region_uses_unmasked_pixels(self, rng):
        a = rng.random((8, 8))
        mask = np.zeros((8, 8), dtype=bool)
        mask[:4] = True
        # make the masked half garbage; background-only must be unaffected
        noisy = a.copy()
        noisy[:4] = rng.random((4, 8))
        t_full = SignalTriple(a, a, a)
        t_bg = SignalTriple(noisy, a, a)
        rep = pixel_level_correlations([t_bg], masks=[mask], region="background")
        assert rep.pairs["vae_loss__inpaint_diff"]["pearson_mean"] == pytest.approx(1.0)


class TestReportSerialization:
    def test_round_trip_exact(self, rng):
        triples = [
            SignalTriple(float(v), float(v * 2), float(v + 1)) for v in rng.random(5)
        ]
        rep = image_level_correlations(triples)
        back = CorrelationReport.from_dict(json.loads(json.dumps(rep.to_dict())))
        assert back.to_dict() == rep.to_dict()
