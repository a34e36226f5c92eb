"""Cosine, augmentation, diversity closed forms, and discriminator training."""

import math

import numpy as np
import pytest

from adq.binning import Bin
from adq.data import FeatureTable, ImageTable, RandomProjectionFeaturizer, fallback_featurize
from adq.diversity import (
    Discriminator,
    FeatureNoiseAugmenter,
    IdentityAugmenter,
    IdentityDiscriminator,
    ImageAugmenter,
    bin_diversity,
    contrastive_loss_and_grads,
    cosine,
    train_discriminator,
)
from adq.errors import BinTooSmall, ConfigError, ZeroVector
from adq.rng import substream


class TestCosine:
    def test_self_similarity_is_one(self):
        gen = substream(1, "cos")
        for _ in range(5):
            v = gen.standard_normal(6)
            assert cosine(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_vectors(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_forty_five_degrees(self):
        assert cosine([1.0, 1.0], [1.0, 0.0]) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)

    def test_clamped_to_unit_interval(self):
        gen = substream(2, "clamp")
        for _ in range(200):
            v = gen.standard_normal(3) * float(gen.uniform(1e-3, 1e3))
            assert -1.0 <= cosine(v, v) <= 1.0
            assert -1.0 <= cosine(v, -v) <= 1.0

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVector):
            cosine([0.0, 0.0], [1.0, 0.0])


class TestAugmenters:
    def test_identity_returns_exact_copy(self):
        rows = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = IdentityAugmenter().positives([0, 1], rows)
        assert np.array_equal(out, rows)
        out[0, 0] = 99.0
        assert rows[0, 0] == 1.0

    def test_noise_deterministic_per_item_and_seed(self):
        gen = substream(2, "aug")
        rows = gen.standard_normal((4, 3))
        aug = FeatureNoiseAugmenter(seed=7)
        a = aug.positives([0, 1, 2, 3], rows)
        b = aug.positives([0, 1, 2, 3], rows)
        assert np.array_equal(a, b)
        c = FeatureNoiseAugmenter(seed=8).positives([0, 1, 2, 3], rows)
        assert not np.array_equal(a, c)

    def test_noise_depends_on_item_not_position(self):
        gen = substream(3, "aug")
        rows = gen.standard_normal((2, 3))
        aug = FeatureNoiseAugmenter(seed=1)
        ab = aug.positives([10, 11], rows)
        ba = aug.positives([11, 10], rows[::-1])
        assert np.allclose(ab[0] - rows[0], ba[1] - rows[0])

    def test_constant_bin_augments_to_itself(self):
        rows = np.full((3, 4), 2.5)
        out = FeatureNoiseAugmenter(seed=4).positives([0, 1, 2], rows)
        assert np.array_equal(out, rows)

    def test_image_augmenter_deterministic(self):
        gen = substream(5, "imgs")
        pixels = gen.integers(0, 256, size=(6, 8, 8, 1), dtype=np.uint8)
        images = ImageTable(pixels)
        table = fallback_featurize(images, 5, seed=3)
        proj = RandomProjectionFeaturizer(images.shape, 5, seed=3)
        aug = ImageAugmenter(images, proj, seed=11)
        rows = table.features[:4].astype(np.float64)
        a = aug.positives([0, 1, 2, 3], rows)
        b = aug.positives([0, 1, 2, 3], rows)
        assert np.array_equal(a, b)
        assert a.shape == (4, 5)

    def test_image_augmenter_applies_a_known_op(self):
        # Whatever op gets drawn, the augmented pixels must be one of the five.
        gen = substream(6, "imgs")
        pixels = gen.integers(0, 256, size=(1, 6, 6, 3), dtype=np.uint8)
        images = ImageTable(pixels)
        proj = RandomProjectionFeaturizer(images.shape, 4, seed=1)
        aug = ImageAugmenter(images, proj, seed=2)
        got = aug._augment_pixels(0)
        px = pixels[0]
        candidates = [px[:, ::-1, :]] + [np.rot90(px, k, axes=(0, 1)) for k in (1, 2, 3)]
        is_geometric = any(np.array_equal(got, c) for c in candidates)
        ratio = got.astype(float).sum() / px.astype(float).sum()
        assert is_geometric or 0.85 < ratio < 1.15


class TestBinDiversity:
    def _pair_table(self, v1, v2):
        return FeatureTable(np.array([v1, v2], dtype=np.float32))

    def _div(self, table, tau=1.0):
        score = bin_diversity(
            Bin(1, (0, 1)),
            table,
            IdentityDiscriminator(),
            tau,
            seed=0,
            augmenter=IdentityAugmenter(),
        )
        return score.value

    def test_duplicate_pair_scores_minus_one(self):
        assert self._div(self._pair_table([1.0, 0.0], [1.0, 0.0])) == pytest.approx(
            -1.0, abs=1e-9
        )

    def test_orthogonal_pair_scores_minus_inverse_e(self):
        assert self._div(self._pair_table([1.0, 0.0], [0.0, 1.0])) == pytest.approx(
            -math.exp(-1.0), abs=1e-9
        )

    def test_always_negative(self):
        gen = substream(7, "div")
        table = FeatureTable(gen.standard_normal((12, 5)).astype(np.float32))
        score = bin_diversity(
            Bin(1, tuple(range(12))), table, IdentityDiscriminator(), 0.5, seed=3
        )
        assert score.value < 0.0

    def test_permutation_invariant(self):
        gen = substream(8, "div")
        table = FeatureTable(gen.standard_normal((8, 4)).astype(np.float32))
        a = bin_diversity(
            Bin(1, (0, 1, 2, 3, 4)), table, IdentityDiscriminator(), 1.0, seed=5
        )
        b = bin_diversity(
            Bin(1, (4, 2, 0, 3, 1)), table, IdentityDiscriminator(), 1.0, seed=5
        )
        assert a.value == pytest.approx(b.value, rel=1e-12)

    def test_monotone_in_pair_angle(self):
        values = []
        for theta in np.linspace(0.1, math.pi, 20):
            table = self._pair_table([1.0, 0.0], [math.cos(theta), math.sin(theta)])
            values.append(self._div(table))
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_small_bin_rejected(self):
        table = self._pair_table([1.0, 0.0], [0.0, 1.0])
        with pytest.raises(BinTooSmall):
            bin_diversity(Bin(1, (0,)), table, IdentityDiscriminator(), 1.0, seed=0)

    def test_bad_temperature(self):
        table = self._pair_table([1.0, 0.0], [0.0, 1.0])
        with pytest.raises(ConfigError):
            bin_diversity(Bin(1, (0, 1)), table, IdentityDiscriminator(), 0.0, seed=0)

    def test_zero_embedding_rejected(self):
        table = self._pair_table([1.0, 0.0], [0.0, 1.0])
        disc = Discriminator.create(2, 3, 2, seed=1)
        disc.w2 = np.zeros_like(disc.w2)
        disc.b2 = np.zeros_like(disc.b2)
        with pytest.raises(ZeroVector):
            bin_diversity(Bin(1, (0, 1)), table, disc, 1.0, seed=0)

    def test_chunked_evaluation_matches_direct_formula(self):
        gen = substream(9, "div")
        n = 7
        table = FeatureTable(gen.standard_normal((n, 4)).astype(np.float32))
        got = bin_diversity(
            Bin(1, tuple(range(n))),
            table,
            IdentityDiscriminator(),
            0.7,
            seed=0,
            augmenter=IdentityAugmenter(),
        ).value
        f = table.features.astype(np.float64)
        u = f / np.linalg.norm(f, axis=1, keepdims=True)
        acc = 0.0
        for i in range(n):
            num = sum(
                math.exp(np.clip(float(u[i] @ u[j]), -1, 1) / 0.7)
                for j in range(n)
                if j != i
            )
            acc += num / math.exp(np.clip(float(u[i] @ u[i]), -1, 1) / 0.7)
        want = -(acc / n) / (n - 1)
        assert got == pytest.approx(want, rel=1e-9)


class TestDiscriminator:
    def test_create_is_seed_deterministic(self):
        a = Discriminator.create(4, 8, 3, seed=5)
        b = Discriminator.create(4, 8, 3, seed=5)
        assert np.array_equal(a.w1, b.w1) and np.array_equal(a.w2, b.w2)
        c = Discriminator.create(4, 8, 3, seed=6)
        assert not np.array_equal(a.w1, c.w1)

    def test_embed_shape_and_finiteness(self):
        disc = Discriminator.create(6, 8, 4, seed=1)
        gen = substream(10, "embed")
        out = disc.embed(gen.standard_normal((9, 6)) * 100.0)
        assert out.shape == (9, 4)
        assert np.all(np.isfinite(out))


class TestTraining:
    def _bin_table(self, seed, n=6, d=6):
        gen = substream(seed, "train")
        return FeatureTable(gen.standard_normal((n, d)).astype(np.float32))

    def test_zero_epochs_returns_initial_network(self):
        table = self._bin_table(1)
        bin_ = Bin(1, tuple(range(6)))
        trained = train_discriminator(bin_, table, tau=0.5, epochs=0, seed=3, hidden=8, embed_dim=4)
        fresh = Discriminator.create(6, 8, 4, seed=3)
        assert np.array_equal(trained.w1, fresh.w1)
        assert np.array_equal(trained.w2, fresh.w2)
        assert len(trained.loss_history) == 1

    def test_deterministic(self):
        table = self._bin_table(2)
        bin_ = Bin(1, tuple(range(6)))
        a = train_discriminator(bin_, table, 0.5, 5, seed=4, hidden=8, embed_dim=4)
        b = train_discriminator(bin_, table, 0.5, 5, seed=4, hidden=8, embed_dim=4)
        assert np.array_equal(a.w1, b.w1) and np.array_equal(a.b1, b.b1)
        assert a.loss_history == b.loss_history

    def test_loss_non_increasing_on_orthogonal_pair(self):
        table = FeatureTable(np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32))
        bin_ = Bin(1, (0, 1))
        disc = train_discriminator(
            bin_, table, tau=1.0, epochs=50, seed=1, hidden=8, embed_dim=4,
            augmenter=IdentityAugmenter(),
        )
        losses = disc.loss_history
        assert len(losses) == 51
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_gradients_match_central_differences(self):
        max_rel = 0.0
        for seed in range(5):
            gen = substream(seed, "gradcheck")
            n, d, h, e = 5, 6, 8, 4
            rows = gen.standard_normal((n, d))
            positives = rows + 0.3 * gen.standard_normal((n, d))
            disc = Discriminator.create(d, h, e, seed=seed)
            tau = 0.5
            _, grads = contrastive_loss_and_grads(disc, rows, positives, tau)
            step = 1e-5
            for name, param in disc.params().items():
                numeric = np.zeros_like(param)
                it = np.nditer(param, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    orig = param[idx]
                    param[idx] = orig + step
                    up, _ = contrastive_loss_and_grads(disc, rows, positives, tau)
                    param[idx] = orig - step
                    down, _ = contrastive_loss_and_grads(disc, rows, positives, tau)
                    param[idx] = orig
                    numeric[idx] = (up - down) / (2 * step)
                rel = np.abs(grads[name] - numeric) / (1.0 + np.abs(numeric))
                max_rel = max(max_rel, float(rel.max()))
        assert max_rel <= 1e-4

    def test_small_bin_rejected(self):
        table = self._bin_table(3)
        with pytest.raises(BinTooSmall):
            train_discriminator(Bin(1, (0,)), table, 0.5, 1, seed=1)

    def test_bad_hyperparameters(self):
        table = self._bin_table(4)
        bin_ = Bin(1, (0, 1))
        with pytest.raises(ConfigError):
            train_discriminator(bin_, table, tau=-1.0, epochs=1, seed=1)
        with pytest.raises(ConfigError):
            train_discriminator(bin_, table, tau=1.0, epochs=-1, seed=1)
        with pytest.raises(ConfigError):
            train_discriminator(bin_, table, tau=1.0, epochs=1, seed=1, lr=0.0)

    def test_training_separates_spread_bin_from_duplicates(self):
        # A trained discriminator must still rank a duplicate bin below a spread one.
        gen = substream(11, "rank")
        spread_rows = gen.standard_normal((6, 4)).astype(np.float32)
        dup_rows = np.tile(spread_rows[0], (6, 1)) + 1e-3 * gen.standard_normal((6, 4)).astype(
            np.float32
        )
        table = FeatureTable(np.concatenate([spread_rows, dup_rows]))
        spread_bin = Bin(1, tuple(range(6)))
        dup_bin = Bin(2, tuple(range(6, 12)))
        scores = []
        for b in (spread_bin, dup_bin):
            disc = train_discriminator(b, table, 0.5, 5, seed=2, hidden=16, embed_dim=8)
            scores.append(bin_diversity(b, table, disc, 0.5, seed=2).value)
        assert scores[0] > scores[1]
