"""Patch texture statistics for bin representativeness.

Images are converted to [0,1] grayscale (luma weights 0.299/0.587/0.114),
tiled into non-overlapping L x L patches, and each patch is scored by the
mean Sobel gradient magnitude over its pixels.  A bin's representativeness
is the mean over all patches of all member images.

For feature-only datasets (no image table) a proxy is available: the negated
mean distance of the bin's members to the global feature centroid.  Reports
label it "proxy"; it is only comparable after min-max normalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .binning import Bin
from .data import FeatureTable, ImageTable
from .errors import ConfigError, InvariantViolation, IoFailure, MissingImage, PatchTooLarge

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class Patch:
    """One L x L grayscale tile with its source image and tile coordinates."""

    pixels: np.ndarray
    source_id: int = -1
    row: int = 0
    col: int = 0

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] != px.shape[1] or px.shape[0] < 2:
            raise InvariantViolation(f"patch must be square with side >= 2, got {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise InvariantViolation("patch intensities must be finite and within [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def side(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class RepScore:
    """Representativeness of one bin (mean patch texture, or the proxy value)."""

    bin_index: int
    value: float


def to_grayscale(pixels: np.ndarray) -> np.ndarray:
    """[0,1] float64 grayscale of one W x H x C uint8 image."""
    px = np.asarray(pixels, dtype=np.float64)
    if px.ndim != 3:
        raise InvariantViolation(f"expected a W x H x C image, got shape {px.shape}")
    c = px.shape[2]
    if c == 1:
        gray = px[:, :, 0]
    elif c == 3:
        r, g, b = LUMA_WEIGHTS
        gray = r * px[:, :, 0] + g * px[:, :, 1] + b * px[:, :, 2]
    else:
        gray = px.mean(axis=2)
    return gray / 255.0


def extract_patches(pixels: np.ndarray, side: int, source_id: int = -1) -> List[Patch]:
    """Tile one image into floor(W/L) * floor(H/L) patches, row-major.

    Right/bottom remainders smaller than the patch side are discarded.
    """
    if side < 2:
        raise ConfigError(f"patch side must be >= 2, got {side}")
    gray = to_grayscale(pixels)
    w, h = gray.shape
    if side > min(w, h):
        raise PatchTooLarge(f"patch side {side} exceeds image dimensions {w}x{h}")
    patches = []
    for pr in range(w // side):
        for pc in range(h // side):
            tile = gray[pr * side : (pr + 1) * side, pc * side : (pc + 1) * side]
            patches.append(Patch(tile, source_id=source_id, row=pr, col=pc))
    return patches


def gradient_magnitude(patch: Patch) -> np.ndarray:
    """Sobel magnitude map of the patch with clamp-to-edge borders.

    Each kernel evaluates as three paired differences accumulated
    left-to-right, so constant regions cancel to exactly zero and the result
    is reproducible bit-for-bit against a scalar convolution that groups the
    taps the same way.
    """
    side = patch.side
    padded = np.pad(patch.pixels, 1, mode="edge")

    def shifted(u, v):
        return padded[u : u + side, v : v + side]

    gx = (
        (shifted(0, 2) - shifted(0, 0))
        + 2.0 * (shifted(1, 2) - shifted(1, 0))
        + (shifted(2, 2) - shifted(2, 0))
    )
    gy = (
        (shifted(2, 0) - shifted(0, 0))
        + 2.0 * (shifted(2, 1) - shifted(0, 1))
        + (shifted(2, 2) - shifted(0, 2))
    )
    return np.sqrt(gx * gx + gy * gy)


def patch_texture_level(patch: Patch) -> float:
    """Mean gradient magnitude over all pixels of the patch."""
    return float(np.mean(gradient_magnitude(patch)))


def bin_representativeness(bin_: Bin, images: ImageTable, side: int) -> RepScore:
    """Mean patch texture level over all patches of all member images."""
    values = []
    for item in bin_.members:
        if not 0 <= item < images.count:
            raise MissingImage(item)
        for patch in extract_patches(images.pixels[item], side, source_id=item):
            values.append(patch_texture_level(patch))
    return RepScore(bin_index=bin_.index, value=float(np.mean(values)))


def proxy_representativeness(
    bin_: Bin, features: FeatureTable, centroid: Optional[np.ndarray] = None
) -> RepScore:
    """Feature-only stand-in: negated mean member distance to the global centroid."""
    f64 = features.features.astype(np.float64)
    if centroid is None:
        centroid = f64.mean(axis=0)
    rows = f64[list(bin_.members)]
    dists = np.linalg.norm(rows - centroid, axis=1)
    return RepScore(bin_index=bin_.index, value=-float(np.mean(dists)))


def write_rep_csv(scores: Sequence[RepScore], path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("bin,rep\n")
            for s in scores:
                fh.write(f"{s.bin_index},{s.value!r}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write rep CSV {str(path)!r}: {exc}") from exc
