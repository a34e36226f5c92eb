"""Score normalization, importance weighting, quota apportionment, and the draw.

Per-bin representativeness and diversity are min-max normalized onto [0, 1],
summed into an importance in [0, 2], and blended with bin mass:

    ratio_n = alpha * importance_n + (1 - alpha) * mass_n / total_mass

Ratios are treated as unnormalized weights; quotas rescale them to the budget
B = floor(rho * M) with per-bin clipping and largest-remainder redistribution,
so the advertised keep ratio is met exactly up to floor slack.  At alpha = 0
with equal masses the plan degenerates to the uniform plan.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .binning import Bin
from .errors import (
    BadAlpha,
    BadKeepRatio,
    EmptyInput,
    InvariantViolation,
    IoFailure,
    LengthMismatch,
    QuotaExceedsBin,
)
from .rng import substream


def minmax_normalize(values: Sequence[float]) -> List[float]:
    """Map values onto [0, 1] by (v - min)/(max - min); all-equal input maps to 0.5."""
    vals = [float(v) for v in values]
    if not vals:
        raise EmptyInput("cannot normalize an empty list")
    if not all(math.isfinite(v) for v in vals):
        raise InvariantViolation("cannot normalize non-finite values")
    lo, hi = min(vals), max(vals)
    if hi == lo:
        return [0.5] * len(vals)
    return [(v - lo) / (hi - lo) for v in vals]


def importance(rep_hat: Sequence[float], div_hat: Sequence[float]) -> List[float]:
    """Elementwise sum of the two normalized scores; range [0, 2]."""
    if len(rep_hat) != len(div_hat):
        raise LengthMismatch(
            f"rep has {len(rep_hat)} entries, div has {len(div_hat)}"
        )
    return [float(r) + float(d) for r, d in zip(rep_hat, div_hat)]


def raw_ratios(importances: Sequence[float], masses: Sequence[int], alpha: float) -> List[float]:
    """Blend importance with relative bin mass using weighting coefficient alpha."""
    if not 0.0 <= alpha <= 1.0:
        raise BadAlpha(f"alpha must lie in [0, 1], got {alpha}")
    if len(importances) != len(masses):
        raise LengthMismatch(
            f"{len(importances)} importances for {len(masses)} masses"
        )
    if any(n <= 0 for n in masses):
        raise InvariantViolation("bin masses must be positive")
    total = float(sum(masses))
    return [alpha * float(i) + (1.0 - alpha) * (n / total) for i, n in zip(importances, masses)]


def quota_counts(
    ratios: Sequence[float], masses: Sequence[int], rho: float, total: int
) -> List[int]:
    """Integer per-bin quotas under budget B = floor(rho * total).

    Wants w_n = ratio_n * mass_n are rescaled to the budget, floored, clipped
    at the bin mass, and any leftover budget goes to unsaturated bins by
    descending fractional remainder (index breaks ties) until the budget is
    met or every bin saturates.
    """
    if not 0.0 < rho <= 1.0:
        raise BadKeepRatio(f"keep ratio must lie in (0, 1], got {rho}")
    if len(ratios) != len(masses):
        raise LengthMismatch(f"{len(ratios)} ratios for {len(masses)} masses")
    if any(n <= 0 for n in masses):
        raise InvariantViolation("bin masses must be positive")
    if sum(masses) != total:
        raise InvariantViolation(
            f"masses sum to {sum(masses)}, dataset declares {total} items"
        )
    budget = math.floor(rho * total)
    wants = [float(r) * n for r, n in zip(ratios, masses)]
    if any(w < 0 for w in wants):
        raise InvariantViolation("sampling weights must be non-negative")
    weight_sum = sum(wants)
    if weight_sum <= 0.0:
        raise InvariantViolation("all sampling weights are zero")

    ideal = [budget * w / weight_sum for w in wants]
    quotas = [min(n, math.floor(a)) for n, a in zip(masses, ideal)]
    fractions = [a - math.floor(a) for a in ideal]

    remaining = budget - sum(quotas)
    order = sorted(range(len(masses)), key=lambda i: (-fractions[i], i))
    while remaining > 0:
        progressed = False
        for i in order:
            if remaining == 0:
                break
            if quotas[i] < masses[i]:
                quotas[i] += 1
                remaining -= 1
                progressed = True
        if not progressed:
            break  # every bin saturated
    return quotas


def draw_samples(bins: Sequence[Bin], quotas: Sequence[int], seed: int) -> List[int]:
    """Uniform without-replacement draw of quota_n items from each bin.

    Each bin draws from its own substream keyed by (seed, bin index), so bins
    can be drawn in parallel or re-drawn independently.  The combined coreset
    comes back sorted by id.
    """
    if len(bins) != len(quotas):
        raise LengthMismatch(f"{len(quotas)} quotas for {len(bins)} bins")
    chosen: List[int] = []
    for bin_, quota in zip(bins, quotas):
        quota = int(quota)
        if quota < 0 or quota > bin_.size:
            raise QuotaExceedsBin(
                f"quota {quota} invalid for bin {bin_.index} of size {bin_.size}"
            )
        if quota == 0:
            continue
        gen = substream(seed, "draw", bin_.index)
        perm = gen.permutation(bin_.size)
        members = np.asarray(bin_.members, dtype=np.int64)
        chosen.extend(int(x) for x in members[perm[:quota]])
    return sorted(chosen)


# --- aggregate tables ---


@dataclass(frozen=True)
class ScoreTable:
    """Raw and normalized per-bin scores plus the combined importance."""

    rep: Tuple[float, ...]
    div: Tuple[float, ...]
    rep_hat: Tuple[float, ...]
    div_hat: Tuple[float, ...]
    importance: Tuple[float, ...]

    def __post_init__(self):
        n = len(self.rep)
        for name in ("div", "rep_hat", "div_hat", "importance"):
            if len(getattr(self, name)) != n:
                raise LengthMismatch(f"score column {name!r} has wrong length")
        for r, d, i in zip(self.rep_hat, self.div_hat, self.importance):
            if i != r + d:
                raise InvariantViolation("importance must equal rep_hat + div_hat")

    @classmethod
    def from_raw(cls, rep: Sequence[float], div: Sequence[float]) -> "ScoreTable":
        rep_hat = minmax_normalize(rep)
        div_hat = minmax_normalize(div)
        return cls(
            rep=tuple(float(v) for v in rep),
            div=tuple(float(v) for v in div),
            rep_hat=tuple(rep_hat),
            div_hat=tuple(div_hat),
            importance=tuple(importance(rep_hat, div_hat)),
        )

    @property
    def bin_count(self) -> int:
        return len(self.rep)


SCORE_CSV_HEADER = "bin,rep,div,rep_hat,div_hat,importance"


def scores_to_csv(table: ScoreTable) -> str:
    lines = [SCORE_CSV_HEADER]
    for i in range(table.bin_count):
        lines.append(
            f"{i + 1},{table.rep[i]!r},{table.div[i]!r},"
            f"{table.rep_hat[i]!r},{table.div_hat[i]!r},{table.importance[i]!r}"
        )
    return "\n".join(lines) + "\n"


def write_scores_csv(table: ScoreTable, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(scores_to_csv(table))
    except OSError as exc:
        raise IoFailure(f"cannot write scores CSV {str(path)!r}: {exc}") from exc


def read_scores_csv(path) -> ScoreTable:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise IoFailure(f"cannot read scores CSV {str(path)!r}: {exc}") from exc
    if not lines or lines[0] != SCORE_CSV_HEADER:
        raise IoFailure(f"scores CSV {str(path)!r} has an unexpected header")
    cols: List[List[float]] = [[], [], [], [], []]
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 6:
            raise IoFailure(f"scores CSV {str(path)!r} has a malformed row: {ln!r}")
        for k in range(5):
            cols[k].append(float(parts[k + 1]))
    return ScoreTable(
        rep=tuple(cols[0]),
        div=tuple(cols[1]),
        rep_hat=tuple(cols[2]),
        div_hat=tuple(cols[3]),
        importance=tuple(cols[4]),
    )


@dataclass(frozen=True)
class SamplingPlan:
    """Per-bin sampling ratios and integer quotas under a global keep ratio."""

    alpha: float
    rho: float
    budget: int
    ratios: Tuple[float, ...]
    quotas: Tuple[int, ...]
    masses: Tuple[int, ...]

    def __post_init__(self):
        if len(self.quotas) != len(self.masses) or len(self.ratios) != len(self.masses):
            raise LengthMismatch("plan columns must have one entry per bin")
        for q, n in zip(self.quotas, self.masses):
            if not 0 <= q <= n:
                raise InvariantViolation(f"quota {q} outside [0, {n}]")
        if sum(self.quotas) > self.budget:
            raise InvariantViolation(
                f"quotas sum to {sum(self.quotas)}, budget is {self.budget}"
            )

    @classmethod
    def build(
        cls,
        importances: Sequence[float],
        masses: Sequence[int],
        alpha: float,
        rho: float,
    ) -> "SamplingPlan":
        total = int(sum(masses))
        ratios = raw_ratios(importances, masses, alpha)
        quotas = quota_counts(ratios, masses, rho, total)
        return cls(
            alpha=float(alpha),
            rho=float(rho),
            budget=math.floor(rho * total),
            ratios=tuple(ratios),
            quotas=tuple(quotas),
            masses=tuple(int(n) for n in masses),
        )


def plan_to_json(plan: SamplingPlan) -> str:
    doc = {
        "alpha": plan.alpha,
        "rho": plan.rho,
        "budget": plan.budget,
        "quotas": list(plan.quotas),
    }
    return json.dumps(doc, sort_keys=True) + "\n"


def write_plan_json(plan: SamplingPlan, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(plan_to_json(plan))
    except OSError as exc:
        raise IoFailure(f"cannot write plan {str(path)!r}: {exc}") from exc


def read_plan_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read plan {str(path)!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"plan {str(path)!r} is not valid JSON: {exc}") from exc
    for key in ("alpha", "rho", "budget", "quotas"):
        if key not in doc:
            raise IoFailure(f"plan {str(path)!r} missing key {key!r}")
    return doc


def write_coreset(ids: Sequence[int], path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for item in ids:
                fh.write(f"{int(item)}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write coreset {str(path)!r}: {exc}") from exc


def read_coreset(path) -> List[int]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return [int(ln) for ln in fh if ln.strip()]
    except OSError as exc:
        raise IoFailure(f"cannot read coreset {str(path)!r}: {exc}") from exc
