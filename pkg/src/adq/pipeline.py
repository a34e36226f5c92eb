"""End-to-end orchestration: bins -> scores -> importance -> plan -> draw.

A run reads a dataset manifest, partitions it into bins, scores each bin's
representativeness (patch texture when images exist, the centroid proxy
otherwise) and diversity, builds the sampling plan, draws the coreset, and
writes every artifact into the output directory:

    bins.json, scores.csv, plan.json, coreset.txt, coreset.meta.json,
    report.json, trend.csv, trend.png, plan.png, timings.json

Everything except timings.json (and the PNGs, whose bytes depend on the
matplotlib build) is byte-reproducible from (inputs, config, seed).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import diversity as div_mod
from . import texture as tex_mod
from .binning import Bin, bin_size_schedule, generate_bins, write_bins
from .data import (
    FeatureTable,
    ImageTable,
    RandomProjectionFeaturizer,
    load_dataset,
    load_manifest,
    sha256_file,
)
from .errors import ConfigError, IoFailure
from .figures import render_plan_figure, render_trend_figure
from .parallel import parallel_map
from .sampling import (
    SamplingPlan,
    ScoreTable,
    draw_samples,
    write_coreset,
    write_plan_json,
    write_scores_csv,
)

AUGMENT_MODES = ("auto", "identity", "noise", "image")
REP_MODES = ("auto", "texture", "proxy")
DISC_MODES = ("mlp", "identity")


@dataclass
class PipelineConfig:
    """Everything a run needs; flags and config files both map onto this."""

    manifest: str = ""
    out_dir: str = ""
    bins: int = 10
    alpha: float = 0.65
    tau: float = 0.5
    patch: int = 8
    rho: float = 0.1
    seed: int = 1
    disc_mode: str = "mlp"
    disc_hidden: int = 128
    disc_embed: int = 64
    disc_epochs: int = 5
    disc_lr: float = 0.01
    augment: str = "auto"
    rep_mode: str = "auto"
    featurizer_dim: Optional[int] = None
    featurizer_seed: Optional[int] = None
    figures: bool = True

    def validate(self) -> None:
        if not self.manifest:
            raise ConfigError("a dataset manifest is required")
        if not self.out_dir:
            raise ConfigError("an output directory is required")
        if self.bins < 1:
            raise ConfigError(f"bin count must be >= 1, got {self.bins}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if self.patch < 2:
            raise ConfigError(f"patch side must be >= 2, got {self.patch}")
        if not 0.0 < self.rho <= 1.0:
            raise ConfigError(f"rho must lie in (0, 1], got {self.rho}")
        if self.disc_mode not in DISC_MODES:
            raise ConfigError(f"disc mode must be one of {DISC_MODES}, got {self.disc_mode!r}")
        if self.augment not in AUGMENT_MODES:
            raise ConfigError(f"augment must be one of {AUGMENT_MODES}, got {self.augment!r}")
        if self.rep_mode not in REP_MODES:
            raise ConfigError(f"rep mode must be one of {REP_MODES}, got {self.rep_mode!r}")
        if min(self.disc_hidden, self.disc_embed) < 1 or self.disc_epochs < 0:
            raise ConfigError("discriminator sizes must be >= 1 and epochs >= 0")
        if not self.disc_lr > 0:
            raise ConfigError(f"disc learning rate must be > 0, got {self.disc_lr}")
        if (self.featurizer_dim is None) != (self.featurizer_seed is None):
            raise ConfigError("featurizer_dim and featurizer_seed must be set together")

    def semantic_fields(self) -> Dict:
        """Fields that affect outputs; paths and figure toggles excluded."""
        doc = dataclasses.asdict(self)
        for key in ("manifest", "out_dir", "figures"):
            doc.pop(key)
        return doc

    def config_hash(self, input_digests: Sequence[str]) -> str:
        doc = {"config": self.semantic_fields(), "inputs": list(input_digests)}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def config_from_file(path) -> Dict:
    """Raw key/value dict from a JSON config file (validated on merge)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {str(path)!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {str(path)!r} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {str(path)!r} must hold a JSON object")
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"config {str(path)!r} has unknown keys: {sorted(unknown)}")
    return doc


def merge_config(base: Dict, overrides: Dict) -> PipelineConfig:
    """Build a PipelineConfig from a config-file dict and explicit flag overrides."""
    merged = dict(base)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = PipelineConfig(**merged)
    except TypeError as exc:
        raise ConfigError(f"bad configuration: {exc}") from exc
    cfg.validate()
    return cfg


@dataclass
class RunReport:
    """Outcome of one pipeline run; timings stay out of the deterministic report."""

    config_hash: str
    seed: int
    m: int
    bin_size: int
    bin_sizes: Tuple[int, ...]
    rep_mode: str
    augment_mode: str
    scores: ScoreTable
    plan: SamplingPlan
    coreset_size: int
    coreset_file: str
    timings: Dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> Dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "m": self.m,
            "bin_size": self.bin_size,
            "bin_sizes": list(self.bin_sizes),
            "rep_mode": self.rep_mode,
            "augment_mode": self.augment_mode,
            "scores": {
                "rep": list(self.scores.rep),
                "div": list(self.scores.div),
                "rep_hat": list(self.scores.rep_hat),
                "div_hat": list(self.scores.div_hat),
                "importance": list(self.scores.importance),
            },
            "plan": {
                "alpha": self.plan.alpha,
                "rho": self.plan.rho,
                "budget": self.plan.budget,
                "ratios": list(self.plan.ratios),
                "quotas": list(self.plan.quotas),
                "masses": list(self.plan.masses),
            },
            "coreset_size": self.coreset_size,
            "coreset_file": self.coreset_file,
        }


# --- stage helpers (shared by run_pipeline and the stage subcommands) ---


def resolve_rep_mode(mode: str, images: Optional[ImageTable]) -> str:
    if mode == "texture" and images is None:
        raise ConfigError("rep mode 'texture' requires an image table in the manifest")
    if mode == "auto":
        return "texture" if images is not None else "proxy"
    return mode


def resolve_augment_mode(
    mode: str, images: Optional[ImageTable], featurizer_dim: Optional[int]
) -> str:
    image_capable = images is not None and featurizer_dim is not None
    if mode == "image" and not image_capable:
        raise ConfigError(
            "augment mode 'image' requires images plus featurizer_dim/featurizer_seed"
        )
    if mode == "auto":
        return "image" if image_capable else "noise"
    return mode


def make_augmenter(
    cfg: PipelineConfig, features: FeatureTable, images: Optional[ImageTable], mode: str
):
    if mode == "identity":
        return div_mod.IdentityAugmenter()
    if mode == "image":
        if cfg.featurizer_dim != features.dim:
            raise ConfigError(
                f"featurizer_dim {cfg.featurizer_dim} does not match the "
                f"feature dimension {features.dim}; augmented views would land "
                "in a different space"
            )
        featurizer = RandomProjectionFeaturizer(
            images.shape, cfg.featurizer_dim, cfg.featurizer_seed
        )
        return div_mod.ImageAugmenter(images, featurizer, cfg.seed)
    return div_mod.FeatureNoiseAugmenter(cfg.seed)


def compute_rep_values(
    bins: Sequence[Bin],
    features: FeatureTable,
    images: Optional[ImageTable],
    patch_side: int,
    mode: str,
) -> List[float]:
    """Per-bin representativeness in bin order (parallel across bins)."""
    if mode == "texture":
        score = lambda b: tex_mod.bin_representativeness(b, images, patch_side).value
    else:
        centroid = features.features.astype(np.float64).mean(axis=0)
        score = lambda b: tex_mod.proxy_representativeness(b, features, centroid).value
    return parallel_map(score, bins)


def compute_div_values(
    bins: Sequence[Bin],
    features: FeatureTable,
    cfg: PipelineConfig,
    augmenter,
) -> List[float]:
    """Per-bin diversity in bin order (parallel across bins)."""

    def score(b: Bin) -> float:
        if cfg.disc_mode == "identity":
            disc = div_mod.IdentityDiscriminator()
        else:
            disc = div_mod.train_discriminator(
                b,
                features,
                cfg.tau,
                cfg.disc_epochs,
                cfg.seed,
                lr=cfg.disc_lr,
                hidden=cfg.disc_hidden,
                embed_dim=cfg.disc_embed,
                augmenter=augmenter,
            )
        return div_mod.bin_diversity(b, features, disc, cfg.tau, cfg.seed, augmenter=augmenter).value

    return parallel_map(score, bins)


def trend_csv(scores: ScoreTable) -> str:
    """Bin-index-vs-score series (normalized RS/DS plus IS) for external plotting."""
    lines = ["bin,rs,ds,is"]
    for i in range(scores.bin_count):
        lines.append(
            f"{i + 1},{scores.rep_hat[i]!r},{scores.div_hat[i]!r},{scores.importance[i]!r}"
        )
    return "\n".join(lines) + "\n"


def emit_trend_report(scores: ScoreTable, out_dir, rep_mode: str = "texture", figures: bool = True) -> List[str]:
    """Write trend.csv (and trend.png unless disabled); returns written names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        with open(out / "trend.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(trend_csv(scores))
    except OSError as exc:
        raise IoFailure(f"cannot write trend CSV: {exc}") from exc
    written.append("trend.csv")
    if figures:
        render_trend_figure(scores, out / "trend.png", rep_mode=rep_mode)
        written.append("trend.png")
    return written


def _write_json(doc: Dict, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {str(path)!r}: {exc}") from exc


def run_pipeline(cfg: PipelineConfig) -> RunReport:
    """Execute every stage and write all artifacts into cfg.out_dir."""
    cfg.validate()
    timings: Dict[str, float] = {}
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    features, images = load_dataset(cfg.manifest)
    manifest = load_manifest(cfg.manifest)
    manifest_dir = Path(cfg.manifest).parent
    digests = [manifest.sha256]
    if images is not None:
        digests.append(sha256_file(manifest_dir / manifest.image_path))
    timings["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    bins = generate_bins(features, cfg.bins)
    k, _ = bin_size_schedule(features.count, cfg.bins)
    timings["bins"] = time.perf_counter() - t0

    rep_mode = resolve_rep_mode(cfg.rep_mode, images)
    augment_mode = resolve_augment_mode(cfg.augment, images, cfg.featurizer_dim)
    augmenter = make_augmenter(cfg, features, images, augment_mode)

    t0 = time.perf_counter()
    rep_values = compute_rep_values(bins, features, images, cfg.patch, rep_mode)
    timings["rep"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    div_values = compute_div_values(bins, features, cfg, augmenter)
    timings["div"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    scores = ScoreTable.from_raw(rep_values, div_values)
    plan = SamplingPlan.build(scores.importance, [b.size for b in bins], cfg.alpha, cfg.rho)
    timings["plan"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    coreset = draw_samples(bins, plan.quotas, cfg.seed)
    timings["draw"] = time.perf_counter() - t0

    config_hash = cfg.config_hash(digests)
    report = RunReport(
        config_hash=config_hash,
        seed=cfg.seed,
        m=cfg.bins,
        bin_size=k,
        bin_sizes=tuple(b.size for b in bins),
        rep_mode=rep_mode,
        augment_mode=augment_mode,
        scores=scores,
        plan=plan,
        coreset_size=len(coreset),
        coreset_file="coreset.txt",
    )

    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_bins(bins, k, out / "bins.json")
    write_scores_csv(scores, out / "scores.csv")
    write_plan_json(plan, out / "plan.json")
    write_coreset(coreset, out / "coreset.txt")
    _write_json({"config_hash": config_hash, "seed": cfg.seed}, out / "coreset.meta.json")
    _write_json(report.to_json_dict(), out / "report.json")
    emit_trend_report(scores, out, rep_mode=rep_mode, figures=cfg.figures)
    if cfg.figures:
        render_plan_figure(plan, out / "plan.png")
    timings["write"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    report.timings = timings
    _write_json({k: round(v, 6) for k, v in timings.items()}, out / "timings.json")
    return report
