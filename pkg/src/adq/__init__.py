"""adq: compress a labeled dataset into a coreset.

The pipeline partitions a feature table into non-overlapping bins by greedy
graph-cut selection, scores each bin's representativeness (patch texture) and
diversity (contrastive), blends the normalized scores into an importance,
converts importance plus bin mass into per-bin quotas under a global keep
ratio, and draws the final coreset with deterministic per-bin streams.
"""

from .binning import Bin, PoolMoments, fast_gain, generate_bins, naive_gain
from .data import (
    DatasetManifest,
    FeatureTable,
    ImageTable,
    RandomProjectionFeaturizer,
    fallback_featurize,
    gen_synthetic_mixture,
    load_dataset,
    load_features,
    load_images,
    write_features,
    write_images,
)
from .diversity import (
    Discriminator,
    DivScore,
    FeatureNoiseAugmenter,
    IdentityAugmenter,
    IdentityDiscriminator,
    ImageAugmenter,
    bin_diversity,
    cosine,
    train_discriminator,
)
from .errors import AdqError, ConfigError, DataIoError, InvariantViolation
from .pipeline import PipelineConfig, RunReport, emit_trend_report, run_pipeline
from .rng import substream
from .sampling import (
    SamplingPlan,
    ScoreTable,
    draw_samples,
    importance,
    minmax_normalize,
    quota_counts,
    raw_ratios,
)
from .texture import (
    Patch,
    RepScore,
    bin_representativeness,
    extract_patches,
    gradient_magnitude,
    patch_texture_level,
    proxy_representativeness,
)

__version__ = "0.1.0"
