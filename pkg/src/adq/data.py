"""Dataset containers, binary file formats, and synthetic sources.

Two little-endian binary containers hold the data:

* feature file: magic ``ADQF``, version u32, M u64, d u32, then M*d float32
  row-major (header is 20 bytes);
* image file: magic ``ADQI``, version u32, count u64, W u32, H u32, C u32,
  then count*W*H*C uint8 row-major (header is 28 bytes).

``W`` labels the leading spatial axis (raster rows) and ``H`` the second.
A JSON manifest ties the two files together and carries the labels and the
sha256 checksum of the feature file.

Features are stored as float32; all numerics downstream upcast to float64.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .errors import (
    BadMagic,
    ConfigError,
    InvariantViolation,
    IoFailure,
    NonFiniteValue,
    TruncatedFile,
)
from .rng import substream

FEATURE_MAGIC = b"ADQF"
IMAGE_MAGIC = b"ADQI"
FORMAT_VERSION = 1

_FEATURE_HEADER = struct.Struct("<4sIQI")  # magic, version, M, d
_IMAGE_HEADER = struct.Struct("<4sIQIII")  # magic, version, count, W, H, C


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FeatureTable:
    """M rows of d-dimensional float32 features with dense ids 0..M-1.

    Labels are optional per-item integers (e.g. class indices); they travel
    in the manifest, not the feature file.
    """

    features: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float32)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise InvariantViolation(
                f"features must be a non-empty 2-d array, got shape {feats.shape}"
            )
        bad = ~np.all(np.isfinite(feats), axis=1)
        if bad.any():
            raise NonFiniteValue(row=int(np.argmax(bad)))
        object.__setattr__(self, "features", _frozen(feats))
        if self.labels is not None:
            labels = np.ascontiguousarray(self.labels, dtype=np.int64)
            if labels.shape != (feats.shape[0],):
                raise InvariantViolation(
                    f"labels must have one entry per row, got shape {labels.shape}"
                )
            object.__setattr__(self, "labels", _frozen(labels))

    @property
    def count(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.count, dtype=np.int64)


@dataclass(frozen=True)
class ImageTable:
    """Per-item W x H x C uint8 images aligned with a FeatureTable by id."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.ndim != 4 or min(px.shape) < 1:
            raise InvariantViolation(
                f"pixels must be a non-empty (count, W, H, C) array, got shape {px.shape}"
            )
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def count(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.pixels.shape[1:]


@dataclass(frozen=True)
class DatasetManifest:
    """Pointer to the on-disk dataset: file paths, labels, and checksum."""

    feature_path: str
    image_path: Optional[str]
    labels: Optional[Tuple[int, ...]]
    sha256: str


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --- feature container ---


def write_features(table: FeatureTable, path) -> None:
    """Write the feature matrix; loading the file back is bit-exact."""
    header = _FEATURE_HEADER.pack(FEATURE_MAGIC, FORMAT_VERSION, table.count, table.dim)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(table.features.astype("<f4", copy=False).tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write feature file {str(path)!r}: {exc}") from exc


def load_features(path) -> FeatureTable:
    """Load a feature file, rejecting bad headers, short files, and non-finite rows."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read feature file {str(path)!r}: {exc}") from exc
    if len(blob) < _FEATURE_HEADER.size:
        if blob[: len(FEATURE_MAGIC)] != FEATURE_MAGIC[: len(blob)]:
            raise BadMagic(f"not a feature file: {str(path)!r}")
        raise TruncatedFile("feature header incomplete", offset=len(blob))
    magic, version, m, d = _FEATURE_HEADER.unpack_from(blob)
    if magic != FEATURE_MAGIC:
        raise BadMagic(f"not a feature file: {str(path)!r} (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise BadMagic(f"unsupported feature file version {version}")
    if m < 1 or d < 1:
        raise BadMagic(f"invalid header: M={m}, d={d}")
    need = m * d * 4
    payload = blob[_FEATURE_HEADER.size : _FEATURE_HEADER.size + need]
    if len(payload) < need:
        raise TruncatedFile(
            f"feature rows incomplete: expected {need} payload bytes, found {len(payload)}",
            offset=_FEATURE_HEADER.size + len(payload),
        )
    feats = np.frombuffer(payload, dtype="<f4").reshape(m, d)
    bad = ~np.all(np.isfinite(feats), axis=1)
    if bad.any():
        raise NonFiniteValue(row=int(np.argmax(bad)), path=str(path))
    return FeatureTable(feats)


# --- image container ---


def write_images(table: ImageTable, path) -> None:
    w, h, c = table.shape
    header = _IMAGE_HEADER.pack(IMAGE_MAGIC, FORMAT_VERSION, table.count, w, h, c)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(table.pixels.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write image file {str(path)!r}: {exc}") from exc


def load_images(path) -> ImageTable:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read image file {str(path)!r}: {exc}") from exc
    if len(blob) < _IMAGE_HEADER.size:
        if blob[: len(IMAGE_MAGIC)] != IMAGE_MAGIC[: len(blob)]:
            raise BadMagic(f"not an image file: {str(path)!r}")
        raise TruncatedFile("image header incomplete", offset=len(blob))
    magic, version, count, w, h, c = _IMAGE_HEADER.unpack_from(blob)
    if magic != IMAGE_MAGIC:
        raise BadMagic(f"not an image file: {str(path)!r} (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise BadMagic(f"unsupported image file version {version}")
    if count < 1 or min(w, h, c) < 1:
        raise BadMagic(f"invalid header: count={count}, W={w}, H={h}, C={c}")
    need = count * w * h * c
    payload = blob[_IMAGE_HEADER.size : _IMAGE_HEADER.size + need]
    if len(payload) < need:
        raise TruncatedFile(
            f"image rows incomplete: expected {need} payload bytes, found {len(payload)}",
            offset=_IMAGE_HEADER.size + len(payload),
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(count, w, h, c)
    return ImageTable(pixels)


# --- PGM / PPM import ---


def load_pnm(path) -> np.ndarray:
    """Read one binary 8-bit PGM (P5) or PPM (P6) image as (rows, cols, C) uint8."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read image {str(path)!r}: {exc}") from exc
    magic = blob[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise BadMagic(f"not a binary PGM/PPM file: {str(path)!r} (magic {magic!r})")

    # Header tokens may be separated by whitespace and '#' comment lines.
    pos = 2
    fields: List[int] = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if pos == start:
            raise TruncatedFile("PNM header incomplete", offset=pos)
        try:
            fields.append(int(blob[start:pos]))
        except ValueError:
            raise BadMagic(f"malformed PNM header token {blob[start:pos]!r}", offset=start) from None
    cols, rows, maxval = fields
    if not (0 < maxval < 256):
        raise IoFailure(f"only 8-bit PGM/PPM supported, maxval={maxval}")
    pos += 1  # single whitespace byte after maxval
    need = rows * cols * channels
    payload = blob[pos : pos + need]
    if len(payload) < need:
        raise TruncatedFile(
            f"PNM payload incomplete: expected {need} bytes, found {len(payload)}",
            offset=pos + len(payload),
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(rows, cols, channels)


def load_image_dir(dirpath) -> ImageTable:
    """Import every .pgm/.ppm in a directory (sorted by name) into one table."""
    paths = sorted(
        p for p in Path(dirpath).iterdir() if p.suffix.lower() in (".pgm", ".ppm", ".pnm")
    )
    if not paths:
        raise IoFailure(f"no .pgm/.ppm images found in {str(dirpath)!r}")
    arrays = [load_pnm(p) for p in paths]
    shape = arrays[0].shape
    for p, arr in zip(paths, arrays):
        if arr.shape != shape:
            raise InvariantViolation(
                f"image {p.name} has shape {arr.shape}, expected {shape}"
            )
    return ImageTable(np.stack(arrays))


# --- manifest ---


def write_manifest(manifest: DatasetManifest, path) -> None:
    doc = {
        "feature_path": manifest.feature_path,
        "image_path": manifest.image_path,
        "labels": list(manifest.labels) if manifest.labels is not None else None,
        "sha256": manifest.sha256,
    }
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {str(path)!r}: {exc}") from exc


def load_manifest(path) -> DatasetManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {str(path)!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"manifest {str(path)!r} is not valid JSON: {exc}") from exc
    for key in ("feature_path", "image_path", "labels", "sha256"):
        if key not in doc:
            raise IoFailure(f"manifest {str(path)!r} missing key {key!r}")
    labels = doc["labels"]
    return DatasetManifest(
        feature_path=doc["feature_path"],
        image_path=doc["image_path"],
        labels=tuple(int(x) for x in labels) if labels is not None else None,
        sha256=str(doc["sha256"]),
    )


def load_dataset(manifest_path, verify: bool = True) -> Tuple[FeatureTable, Optional[ImageTable]]:
    """Load features (+labels, +images) referenced by a manifest.

    Relative paths resolve against the manifest's directory.  With ``verify``
    the feature file must match the manifest checksum.
    """
    manifest = load_manifest(manifest_path)
    base = Path(manifest_path).parent
    feature_path = base / manifest.feature_path
    if verify:
        digest = sha256_file(feature_path)
        if digest != manifest.sha256:
            raise IoFailure(
                f"checksum mismatch for {str(feature_path)!r}: "
                f"manifest says {manifest.sha256}, file is {digest}"
            )
    table = load_features(feature_path)
    if manifest.labels is not None:
        if len(manifest.labels) != table.count:
            raise InvariantViolation(
                f"manifest has {len(manifest.labels)} labels for {table.count} rows"
            )
        table = FeatureTable(table.features, np.asarray(manifest.labels, dtype=np.int64))
    images = None
    if manifest.image_path is not None:
        images = load_images(base / manifest.image_path)
        if images.count > table.count:
            raise InvariantViolation(
                f"image table has {images.count} entries but only {table.count} features"
            )
    return table, images


# --- fallback featurizer ---


class RandomProjectionFeaturizer:
    """Projects flattened, per-image-centered pixels through a fixed Gaussian matrix.

    The matrix entries are drawn once from a unit normal scaled by
    1/sqrt(W*H*C), keyed by the seed, so the featurizer is a pure function of
    (pixels, out_dim, seed).  Centering removes each image's mean intensity,
    so constant images map to the zero vector.
    """

    def __init__(self, image_shape: Tuple[int, int, int], out_dim: int, seed: int):
        if out_dim < 1:
            raise ConfigError(f"out_dim must be >= 1, got {out_dim}")
        w, h, c = image_shape
        n = w * h * c
        gen = substream(seed, "featurize")
        self.matrix = _frozen(gen.standard_normal((out_dim, n)) / math.sqrt(n))
        self.image_shape = (w, h, c)
        self.out_dim = out_dim
        self.seed = seed

    def apply(self, pixels: np.ndarray) -> np.ndarray:
        """Feature vector (float64) for one W x H x C image."""
        flat = np.asarray(pixels, dtype=np.float64).ravel()
        if flat.size != self.matrix.shape[1]:
            raise InvariantViolation(
                f"image has {flat.size} values, featurizer expects {self.matrix.shape[1]}"
            )
        flat = flat - flat.mean()
        return self.matrix @ flat


def fallback_featurize(images: ImageTable, out_dim: int, seed: int) -> FeatureTable:
    """Embed every image with a RandomProjectionFeaturizer keyed by ``seed``."""
    proj = RandomProjectionFeaturizer(images.shape, out_dim, seed)
    flat = images.pixels.reshape(images.count, -1).astype(np.float64)
    flat = flat - flat.mean(axis=1, keepdims=True)
    return FeatureTable(flat @ proj.matrix.T)


# --- synthetic mixtures ---


def gen_synthetic_mixture(
    clusters: int, per_cluster: int, d: int, spread: float, seed: int
) -> FeatureTable:
    """Labeled Gaussian blobs around cluster centers on a sphere of radius 10*spread.

    Centers are placed deterministically from the seed; each point is its
    center plus isotropic noise of scale ``spread``.  Emits exactly
    clusters*per_cluster rows with dense ids and the cluster index as label.
    """
    if clusters < 1 or per_cluster < 1:
        raise ConfigError(
            f"clusters and per_cluster must be >= 1, got {clusters} and {per_cluster}"
        )
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    if not spread > 0:
        raise ConfigError(f"spread must be > 0, got {spread}")
    gen = substream(seed, "mixture")
    raw = gen.standard_normal((clusters, d))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    centers = 10.0 * spread * raw / norms
    noise = spread * gen.standard_normal((clusters * per_cluster, d))
    points = np.repeat(centers, per_cluster, axis=0) + noise
    labels = np.repeat(np.arange(clusters, dtype=np.int64), per_cluster)
    return FeatureTable(points, labels)
