"""Command-line interface.

One subcommand per pipeline stage plus the end-to-end run, so stages can be
run, cached, and inspected independently:

    adq ingest     build the native dataset files (images dir or synthetic)
    adq bins       partition features into bins
    adq score      score each bin (rep/div/importance) into a CSV
    adq plan       turn scores + bin masses into per-bin quotas
    adq sample     draw the coreset from bins + plan
    adq run        everything end to end into an output directory
    adq trend      per-bin score series (CSV + figure) from a scores file

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 invariant
violation.  ADQ_THREADS caps worker threads (results never depend on it).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .binning import bin_size_schedule, generate_bins, load_bins, write_bins
from .data import (
    DatasetManifest,
    fallback_featurize,
    gen_synthetic_mixture,
    load_dataset,
    load_image_dir,
    sha256_file,
    write_features,
    write_images,
    write_manifest,
)
from .errors import AdqError, ConfigError
from .pipeline import (
    PipelineConfig,
    compute_div_values,
    compute_rep_values,
    config_from_file,
    emit_trend_report,
    make_augmenter,
    merge_config,
    resolve_augment_mode,
    resolve_rep_mode,
    run_pipeline,
)
from .sampling import (
    SamplingPlan,
    ScoreTable,
    draw_samples,
    read_plan_json,
    read_scores_csv,
    write_coreset,
    write_plan_json,
    write_scores_csv,
)
from .texture import RepScore, write_rep_csv
from .diversity import DivScore, write_div_csv


def _parse_synthetic(spec: str) -> dict:
    """Parse 'clusters=10,per=100,dim=8,spread=1.0' into generator arguments."""
    out = {"clusters": 10, "per": 100, "dim": 8, "spread": 1.0}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"synthetic spec entries must be key=value, got {part!r}")
        key, value = part.split("=", 1)
        key = key.strip()
        if key not in out:
            raise ConfigError(f"unknown synthetic key {key!r} (use clusters/per/dim/spread)")
        out[key] = float(value) if key == "spread" else int(value)
    return out


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; explicit flags override it")
    p.add_argument("--manifest", help="dataset manifest path")
    p.add_argument("--out", help="output directory")
    p.add_argument("--bins", type=int, help="number of bins m (default 10)")
    p.add_argument("--alpha", type=float, help="importance weighting in [0,1] (default 0.65)")
    p.add_argument("--tau", type=float, help="contrastive temperature (default 0.5)")
    p.add_argument("--patch", type=int, help="texture patch side L (default 8)")
    p.add_argument("--rho", type=float, help="data keep ratio in (0,1] (default 0.1)")
    p.add_argument("--seed", type=int, help="root seed (default 1)")
    p.add_argument("--disc-mode", choices=("mlp", "identity"), dest="disc_mode")
    p.add_argument("--disc-hidden", type=int, dest="disc_hidden")
    p.add_argument("--disc-embed", type=int, dest="disc_embed")
    p.add_argument("--disc-epochs", type=int, dest="disc_epochs")
    p.add_argument("--disc-lr", type=float, dest="disc_lr")
    p.add_argument("--augment", choices=("auto", "identity", "noise", "image"))
    p.add_argument("--rep-mode", choices=("auto", "texture", "proxy"), dest="rep_mode")
    p.add_argument("--featurizer-dim", type=int, dest="featurizer_dim")
    p.add_argument("--featurizer-seed", type=int, dest="featurizer_seed")
    p.add_argument(
        "--no-figures", action="store_true", help="skip rendering PNG figures"
    )


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    base = config_from_file(args.config) if args.config else {}
    overrides = {
        "manifest": args.manifest,
        "out_dir": args.out,
        "bins": args.bins,
        "alpha": args.alpha,
        "tau": args.tau,
        "patch": args.patch,
        "rho": args.rho,
        "seed": args.seed,
        "disc_mode": args.disc_mode,
        "disc_hidden": args.disc_hidden,
        "disc_embed": args.disc_embed,
        "disc_epochs": args.disc_epochs,
        "disc_lr": args.disc_lr,
        "augment": args.augment,
        "rep_mode": args.rep_mode,
        "featurizer_dim": args.featurizer_dim,
        "featurizer_seed": args.featurizer_seed,
    }
    if args.no_figures:
        overrides["figures"] = False
    return merge_config(base, overrides)


# --- subcommand handlers ---


def cmd_ingest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labels = None
    image_name = None

    if args.synthetic:
        spec = _parse_synthetic(args.synthetic)
        table = gen_synthetic_mixture(
            spec["clusters"], spec["per"], spec["dim"], spec["spread"], args.seed
        )
        labels = tuple(int(x) for x in table.labels)
    elif args.images:
        images = load_image_dir(args.images)
        write_images(images, out / "images.adqi")
        image_name = "images.adqi"
        if args.featurize_dim is None:
            raise ConfigError("--featurize-dim is required when ingesting images")
        table = fallback_featurize(images, args.featurize_dim, args.seed)
    else:
        raise ConfigError("ingest needs --images DIR or --synthetic SPEC")

    write_features(table, out / "features.adqf")
    manifest = DatasetManifest(
        feature_path="features.adqf",
        image_path=image_name,
        labels=labels,
        sha256=sha256_file(out / "features.adqf"),
    )
    write_manifest(manifest, out / "manifest.json")
    print(f"ingested {table.count} items of dim {table.dim} into {out}")
    return 0


def cmd_bins(args) -> int:
    features, _ = load_dataset(args.manifest)
    bins = generate_bins(features, args.bins)
    k, _ = bin_size_schedule(features.count, args.bins)
    write_bins(bins, k, args.out)
    print(f"wrote {len(bins)} bins (K={k}) to {args.out}")
    return 0


def cmd_score(args) -> int:
    cfg = _config_from_args(args)
    features, images = load_dataset(cfg.manifest)
    bins, _ = load_bins(args.bins_file)
    rep_mode = resolve_rep_mode(cfg.rep_mode, images)
    augment_mode = resolve_augment_mode(cfg.augment, images, cfg.featurizer_dim)
    augmenter = make_augmenter(cfg, features, images, augment_mode)
    rep_values = compute_rep_values(bins, features, images, cfg.patch, rep_mode)
    div_values = compute_div_values(bins, features, cfg, augmenter)
    table = ScoreTable.from_raw(rep_values, div_values)
    write_scores_csv(table, args.out)
    if args.rep_csv:
        write_rep_csv(
            [RepScore(b.index, v) for b, v in zip(bins, rep_values)], args.rep_csv
        )
    if args.div_csv:
        write_div_csv(
            [DivScore(b.index, v) for b, v in zip(bins, div_values)], args.div_csv
        )
    print(f"scored {len(bins)} bins (rep mode: {rep_mode}) into {args.out}")
    return 0


def cmd_plan(args) -> int:
    scores = read_scores_csv(args.scores)
    bins, _ = load_bins(args.bins_file)
    if scores.bin_count != len(bins):
        raise ConfigError(
            f"scores cover {scores.bin_count} bins but bins file holds {len(bins)}"
        )
    plan = SamplingPlan.build(
        scores.importance, [b.size for b in bins], args.alpha, args.rho
    )
    write_plan_json(plan, args.out)
    print(f"planned {sum(plan.quotas)} of budget {plan.budget} items into {args.out}")
    return 0


def cmd_sample(args) -> int:
    bins, _ = load_bins(args.bins_file)
    plan_doc = read_plan_json(args.plan)
    quotas = [int(q) for q in plan_doc["quotas"]]
    coreset = draw_samples(bins, quotas, args.seed)
    write_coreset(coreset, args.out)

    stage_hash = hashlib.sha256()
    stage_hash.update(Path(args.bins_file).read_bytes())
    stage_hash.update(Path(args.plan).read_bytes())
    stage_hash.update(str(args.seed).encode("utf-8"))
    sidecar = {"config_hash": stage_hash.hexdigest(), "seed": args.seed}
    meta_path = Path(args.out).with_suffix("").as_posix() + ".meta.json"
    with open(meta_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"drew {len(coreset)} items into {args.out}")
    return 0


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    report = run_pipeline(cfg)
    print(
        f"run complete: {report.coreset_size} items kept of "
        f"{sum(report.bin_sizes)} (budget {report.plan.budget}), "
        f"rep mode {report.rep_mode}, outputs in {cfg.out_dir}"
    )
    return 0


def cmd_trend(args) -> int:
    scores = read_scores_csv(args.scores)
    written = emit_trend_report(
        scores, args.out, rep_mode=args.rep_mode, figures=not args.no_figures
    )
    print(f"wrote {', '.join(written)} to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adq",
        description="Compress a dataset into a coreset by greedy binning, "
        "per-bin scoring, and weighted quota sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build native dataset files + manifest")
    p.add_argument("--images", help="directory of 8-bit PGM/PPM images")
    p.add_argument("--synthetic", help="e.g. clusters=10,per=100,dim=8,spread=1.0")
    p.add_argument("--featurize-dim", type=int, dest="featurize_dim")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("bins", help="partition the dataset into bins")
    p.add_argument("--manifest", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", required=True, help="bins JSON path")
    p.set_defaults(func=cmd_bins)

    p = sub.add_parser("score", help="score bins into a CSV")
    _add_run_flags(p)
    p.add_argument("--bins-file", required=True, dest="bins_file")
    p.add_argument("--rep-csv", dest="rep_csv", help="optional bin,rep dump")
    p.add_argument("--div-csv", dest="div_csv", help="optional bin,div dump")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("plan", help="quotas from scores + bin masses")
    p.add_argument("--scores", required=True)
    p.add_argument("--bins-file", required=True, dest="bins_file")
    p.add_argument("--alpha", type=float, default=0.65)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--out", required=True, help="plan JSON path")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sample", help="draw the coreset")
    p.add_argument("--bins-file", required=True, dest="bins_file")
    p.add_argument("--plan", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="coreset text path")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("run", help="full pipeline into an output directory")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trend", help="per-bin score series (CSV + figure)")
    p.add_argument("--scores", required=True, help="scores CSV from 'adq score' or a run")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--rep-mode", default="texture", dest="rep_mode")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_trend)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AdqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
