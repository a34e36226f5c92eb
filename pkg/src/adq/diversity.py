"""Contrastive diversity scoring of bins.

Each member of a bin gets a positive view from a deterministic augmentation;
the other members are its negatives.  A small trainable discriminator embeds
items, cosine similarities are temperature-scaled, and the bin's diversity is
the negative mean ratio of negative-pair mass to positive-pair mass:

    div = -(1/(n-1)) * mean_i [ sum_{j != i} exp(cos(z_i, z_j)/tau)
                                / exp(cos(z_i, z_i_pos)/tau) ]

Diversity is always negative; a bin of near-duplicates scores close to -1 at
tau=1 while a spread-out bin scores closer to 0.  The discriminator trains by
full-batch gradient descent on the matching contrastive loss; its analytic
gradients are verified against central finite differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .binning import Bin
from .data import FeatureTable, ImageTable, RandomProjectionFeaturizer
from .errors import BinTooSmall, ConfigError, IoFailure, MissingImage, ZeroVector
from .rng import substream

_EVAL_CHUNK = 1024  # rows per block when scanning the pairwise cosine matrix


def cosine(x1: np.ndarray, x2: np.ndarray) -> float:
    """Cosine similarity of two embedded vectors, clamped to [-1, 1]."""
    a = np.asarray(x1, dtype=np.float64)
    b = np.asarray(x2, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine of a zero vector is undefined")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class DivScore:
    """Diversity of one bin; finite and strictly negative for nonempty bins."""

    bin_index: int
    value: float


class IdentityDiscriminator:
    """Embedding that returns features unchanged (test hook / cheap pipeline mode)."""

    def embed(self, inputs: np.ndarray) -> np.ndarray:
        return np.asarray(inputs, dtype=np.float64)


@dataclass
class Discriminator:
    """Two-layer perceptron d -> hidden (tanh) -> embed, trained per bin."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    seed: int = 0
    loss_history: List[float] = field(default_factory=list)

    @classmethod
    def create(cls, in_dim: int, hidden: int, embed_dim: int, seed: int) -> "Discriminator":
        if min(in_dim, hidden, embed_dim) < 1:
            raise ConfigError("discriminator layer sizes must be >= 1")
        gen = substream(seed, "disc-init")
        return cls(
            w1=gen.standard_normal((hidden, in_dim)) / math.sqrt(in_dim),
            b1=np.zeros(hidden),
            w2=gen.standard_normal((embed_dim, hidden)) / math.sqrt(hidden),
            b2=np.zeros(embed_dim),
            seed=seed,
        )

    def embed(self, inputs: np.ndarray) -> np.ndarray:
        x = np.asarray(inputs, dtype=np.float64)
        hidden = np.tanh(x @ self.w1.T + self.b1)
        return hidden @ self.w2.T + self.b2

    def params(self) -> Dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


# --- positive-view augmentation ---


class IdentityAugmenter:
    """x_pos = x exactly; deterministic baseline for tests and closed forms."""

    def positives(self, member_ids: Sequence[int], member_rows: np.ndarray) -> np.ndarray:
        return np.array(member_rows, dtype=np.float64, copy=True)


class FeatureNoiseAugmenter:
    """Feature-space views: add Gaussian noise scaled to the bin's spread.

    The noise scale is 0.05 times the per-dimension standard deviation of the
    bin's members, drawn from a per-item substream, so a constant-feature bin
    augments to itself and the same (item, seed) always gives the same view.
    """

    def __init__(self, seed: int):
        self.seed = seed

    def positives(self, member_ids: Sequence[int], member_rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(member_rows, dtype=np.float64)
        scale = 0.05 * rows.std(axis=0)
        out = np.empty_like(rows)
        for k, item in enumerate(member_ids):
            gen = substream(self.seed, "augment", int(item))
            out[k] = rows[k] + scale * gen.standard_normal(rows.shape[1])
        return out


class ImageAugmenter:
    """Pixel-space views re-embedded with the run's featurizer.

    One of {horizontal flip, 90/180/270 degree rotation, brightness jitter
    within +/-10%} is chosen per item from its substream.  Only valid when the
    feature table was produced by the same featurizer.
    """

    def __init__(self, images: ImageTable, featurizer: RandomProjectionFeaturizer, seed: int):
        self.images = images
        self.featurizer = featurizer
        self.seed = seed

    def _augment_pixels(self, item: int) -> np.ndarray:
        if not 0 <= item < self.images.count:
            raise MissingImage(item)
        gen = substream(self.seed, "augment", int(item))
        px = self.images.pixels[item]
        op = int(gen.integers(5))
        if op == 0:
            return px[:, ::-1, :]
        if op in (1, 2, 3):
            return np.rot90(px, k=op, axes=(0, 1))
        factor = 1.0 + gen.uniform(-0.1, 0.1)
        jittered = np.clip(np.rint(px.astype(np.float64) * factor), 0, 255)
        return jittered.astype(np.uint8)

    def positives(self, member_ids: Sequence[int], member_rows: np.ndarray) -> np.ndarray:
        out = np.empty(
            (len(member_ids), self.featurizer.out_dim), dtype=np.float64
        )
        for k, item in enumerate(member_ids):
            out[k] = self.featurizer.apply(self._augment_pixels(int(item)))
        return out


# --- scoring ---


def _unit_rows(z: np.ndarray, what: str) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroVector(f"{what} embedding collapsed to the zero vector")
    return z / norms, norms


def bin_diversity(
    bin_: Bin,
    features: FeatureTable,
    disc,
    tau: float,
    seed: int,
    augmenter=None,
) -> DivScore:
    """Diversity of one bin under the given discriminator and augmentation."""
    n = bin_.size
    if n < 2:
        raise BinTooSmall(f"bin {bin_.index} has {n} member(s); diversity needs >= 2")
    if not tau > 0:
        raise ConfigError(f"temperature must be > 0, got {tau}")
    if augmenter is None:
        augmenter = FeatureNoiseAugmenter(seed)
    members = list(bin_.members)
    rows = features.features[members].astype(np.float64)
    pos_rows = augmenter.positives(members, rows)

    z, _ = _unit_rows(np.asarray(disc.embed(rows), dtype=np.float64), "member")
    zp, _ = _unit_rows(np.asarray(disc.embed(pos_rows), dtype=np.float64), "positive")
    pos_cos = np.clip(np.sum(z * zp, axis=1), -1.0, 1.0)

    ratios = np.empty(n)
    for start in range(0, n, _EVAL_CHUNK):
        stop = min(start + _EVAL_CHUNK, n)
        block = np.clip(z[start:stop] @ z.T, -1.0, 1.0)
        # exp((cos_ij - cos_i_pos)/tau) summed over j != i, in one stable pass
        shifted = (block - pos_cos[start:stop, None]) / tau
        exps = np.exp(shifted)
        totals = exps.sum(axis=1)
        self_terms = exps[np.arange(stop - start), np.arange(start, stop)]
        ratios[start:stop] = totals - self_terms
    return DivScore(bin_index=bin_.index, value=-float(np.mean(ratios)) / (n - 1))


# --- training ---


def contrastive_loss_and_grads(
    disc: Discriminator, inputs: np.ndarray, positives: np.ndarray, tau: float
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Loss plus analytic parameter gradients for one full batch.

    The loss is the mean over items of
    -log( exp(cos(z_i, z_i_pos)/tau) / sum_{j != i} exp(cos(z_i, z_j)/tau) ),
    the pull/push counterpart of the diversity ratio.
    """
    x = np.asarray(inputs, dtype=np.float64)
    xp = np.asarray(positives, dtype=np.float64)
    n = x.shape[0]

    a1 = x @ disc.w1.T + disc.b1
    h = np.tanh(a1)
    z = h @ disc.w2.T + disc.b2
    a1p = xp @ disc.w1.T + disc.b1
    hp = np.tanh(a1p)
    zp = hp @ disc.w2.T + disc.b2

    u, nz = _unit_rows(z, "member")
    up, nzp = _unit_rows(zp, "positive")
    cos_neg = u @ u.T
    cos_pos = np.sum(u * up, axis=1)

    scaled = cos_neg / tau
    np.fill_diagonal(scaled, -np.inf)
    row_max = scaled.max(axis=1, keepdims=True)
    exps = np.exp(scaled - row_max)
    sums = exps.sum(axis=1, keepdims=True)
    logsum = (row_max + np.log(sums)).ravel()
    loss = float(np.mean(-cos_pos / tau + logsum))

    # d(loss)/d(cos_neg[i,j]) for j != i is softmax(i,j)/(n*tau);
    # d(loss)/d(cos_pos[i]) is -1/(n*tau).
    gamma = (exps / sums) / (n * tau)
    dpos = -1.0 / (n * tau)

    du = (gamma + gamma.T) @ u + dpos * up
    dup = dpos * u
    dz = (du - np.sum(du * u, axis=1, keepdims=True) * u) / nz
    dzp = (dup - np.sum(dup * up, axis=1, keepdims=True) * up) / nzp

    grads: Dict[str, np.ndarray] = {}
    grads["w2"] = dz.T @ h + dzp.T @ hp
    grads["b2"] = dz.sum(axis=0) + dzp.sum(axis=0)
    dh = dz @ disc.w2
    dhp = dzp @ disc.w2
    da = dh * (1.0 - h * h)
    dap = dhp * (1.0 - hp * hp)
    grads["w1"] = da.T @ x + dap.T @ xp
    grads["b1"] = da.sum(axis=0) + dap.sum(axis=0)
    return loss, grads


def train_discriminator(
    bin_: Bin,
    features: FeatureTable,
    tau: float,
    epochs: int,
    seed: int,
    lr: float = 0.01,
    hidden: int = 128,
    embed_dim: int = 64,
    augmenter=None,
) -> Discriminator:
    """Fit a per-bin discriminator by full-batch gradient descent.

    Positives are drawn once before training, so the run is a pure function
    of (bin, features, tau, epochs, seed).  ``loss_history`` on the returned
    object holds the loss before training and after each epoch; with
    epochs=0 the seed-initialized network comes back unchanged.
    """
    if bin_.size < 2:
        raise BinTooSmall(f"bin {bin_.index} has {bin_.size} member(s); training needs >= 2")
    if not tau > 0:
        raise ConfigError(f"temperature must be > 0, got {tau}")
    if epochs < 0:
        raise ConfigError(f"epochs must be >= 0, got {epochs}")
    if not lr > 0:
        raise ConfigError(f"learning rate must be > 0, got {lr}")
    if augmenter is None:
        augmenter = FeatureNoiseAugmenter(seed)

    members = list(bin_.members)
    rows = features.features[members].astype(np.float64)
    pos_rows = augmenter.positives(members, rows)

    disc = Discriminator.create(features.dim, hidden, embed_dim, seed=seed)
    for _ in range(epochs):
        loss, grads = contrastive_loss_and_grads(disc, rows, pos_rows, tau)
        disc.loss_history.append(loss)
        disc.w1 = disc.w1 - lr * grads["w1"]
        disc.b1 = disc.b1 - lr * grads["b1"]
        disc.w2 = disc.w2 - lr * grads["w2"]
        disc.b2 = disc.b2 - lr * grads["b2"]
    final_loss, _ = contrastive_loss_and_grads(disc, rows, pos_rows, tau)
    disc.loss_history.append(final_loss)
    return disc


def write_div_csv(scores: Sequence[DivScore], path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("bin,div\n")
            for s in scores:
                fh.write(f"{s.bin_index},{s.value!r}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write div CSV {str(path)!r}: {exc}") from exc
