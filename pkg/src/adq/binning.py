"""Greedy graph-cut partitioning of a dataset into non-overlapping bins.

Each selection step moves the pool item with the largest gain

    gain(x) = sum_{p in bin} ||f(p) - f(x)||^2 - sum_{p in pool} ||f(p) - f(x)||^2

into the current bin (ties broken by smallest id).  ``naive_gain`` evaluates
the two distance sums literally and serves as the oracle; the production path
expands the squares into pool/bin moments so one step costs O(d) per candidate
instead of O(M*d).  All gain arithmetic runs in float64: the squared-norm
accumulators sum M*d terms and float32 cannot hold the oracle tolerance at
dataset scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .data import FeatureTable
from .errors import InvalidBinCount, InvariantViolation, IoFailure, UnknownId


@dataclass(frozen=True)
class Bin:
    """One bin: 1-based index plus member ids in selection order."""

    index: int
    members: Tuple[int, ...]

    def __post_init__(self):
        if self.index < 1:
            raise InvariantViolation(f"bin index must be >= 1, got {self.index}")
        if len(set(self.members)) != len(self.members):
            raise InvariantViolation(f"bin {self.index} has duplicate members")
        object.__setattr__(self, "members", tuple(int(x) for x in self.members))

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class PoolMoments:
    """Sufficient statistics of the current bin and the remaining pool.

    ``*_sum`` is the vector sum of features over the set, ``*_sumsq`` the sum
    of squared feature norms; together with the counts they evaluate the
    selection gain in O(d).
    """

    bin_count: int
    bin_sum: np.ndarray
    bin_sumsq: float
    pool_count: int
    pool_sum: np.ndarray
    pool_sumsq: float

    @classmethod
    def from_sets(
        cls, features: FeatureTable, bin_ids: Iterable[int], pool_ids: Iterable[int]
    ) -> "PoolMoments":
        """Direct recomputation from explicit id sets (test/reference path)."""
        f64 = features.features.astype(np.float64)
        bin_idx = _check_ids(bin_ids, features.count)
        pool_idx = _check_ids(pool_ids, features.count)
        d = features.dim
        return cls(
            bin_count=len(bin_idx),
            bin_sum=f64[bin_idx].sum(axis=0) if bin_idx else np.zeros(d),
            bin_sumsq=float(np.einsum("ij,ij->", f64[bin_idx], f64[bin_idx])) if bin_idx else 0.0,
            pool_count=len(pool_idx),
            pool_sum=f64[pool_idx].sum(axis=0) if pool_idx else np.zeros(d),
            pool_sumsq=float(np.einsum("ij,ij->", f64[pool_idx], f64[pool_idx])) if pool_idx else 0.0,
        )

    def move_to_bin(self, row: np.ndarray, row_sumsq: float) -> None:
        """Transfer one item (given as its float64 row) from pool to bin."""
        self.pool_count -= 1
        self.pool_sum = self.pool_sum - row
        self.pool_sumsq -= row_sumsq
        self.bin_count += 1
        self.bin_sum = self.bin_sum + row
        self.bin_sumsq += row_sumsq

    def reset_bin(self, d: int) -> None:
        self.bin_count = 0
        self.bin_sum = np.zeros(d)
        self.bin_sumsq = 0.0


def _check_ids(ids: Iterable[int], count: int) -> List[int]:
    out = []
    for i in ids:
        i = int(i)
        if not 0 <= i < count:
            raise UnknownId(f"item id {i} outside [0, {count})")
        out.append(i)
    return out


def naive_gain(
    candidate: int,
    current_bin: Iterable[int],
    pool: Iterable[int],
    features: FeatureTable,
) -> float:
    """Literal evaluation of the selection gain by explicit distance sums.

    The candidate's own pool term is a zero distance, so it contributes
    nothing.  This is the reference the fast kernel is verified against.
    """
    (cand,) = _check_ids([candidate], features.count)
    bin_idx = _check_ids(current_bin, features.count)
    pool_idx = _check_ids(pool, features.count)
    f64 = features.features.astype(np.float64)
    x = f64[cand]
    d2 = np.einsum("ij,ij->i", f64 - x, f64 - x)
    return float(d2[bin_idx].sum() - d2[pool_idx].sum())


def fast_gain(candidate: int, moments: PoolMoments, features: FeatureTable) -> float:
    """Moment-based selection gain; agrees with ``naive_gain`` to 1e-6 relative."""
    (cand,) = _check_ids([candidate], features.count)
    x = features.features[cand].astype(np.float64)
    xsq = float(x @ x)
    a_bin = moments.bin_sumsq - 2.0 * float(moments.bin_sum @ x) + moments.bin_count * xsq
    a_pool = moments.pool_sumsq - 2.0 * float(moments.pool_sum @ x) + moments.pool_count * xsq
    return a_bin - a_pool


def bin_size_schedule(total: int, m: int) -> Tuple[int, List[int]]:
    """Per-bin sizes: K = ceil(total/m) for bins 1..m-1, remainder last.

    Raises InvalidBinCount when the schedule is infeasible (the remainder
    would be empty or negative, which happens for small ``total/m`` ratios).
    """
    if m < 1 or m > total:
        raise InvalidBinCount(f"bin count must be in [1, {total}], got {m}")
    k = -(-total // m)
    remainder = total - (m - 1) * k
    if remainder < 1:
        raise InvalidBinCount(
            f"bin count {m} with bin size {k} leaves no items for the final bin "
            f"(dataset has {total}); choose a smaller bin count"
        )
    return k, [k] * (m - 1) + [remainder]


def generate_bins(features: FeatureTable, m: int) -> List[Bin]:
    """Partition the dataset into ``m`` disjoint bins by greedy gain maximization.

    Pure function of (features, m): candidate gains are evaluated against the
    pool of still-unselected items, the argmax prefers the smallest id on
    exact ties, and moments update incrementally in O(d) per move.
    """
    total = features.count
    k, sizes = bin_size_schedule(total, m)
    f64 = features.features.astype(np.float64)
    d = features.dim
    sumsq = np.einsum("ij,ij->i", f64, f64)

    # Compacted pool: the first `remaining` rows of these arrays are the pool;
    # removal swaps the last active row into the vacated slot.
    pool_rows = f64.copy()
    pool_sumsq = sumsq.copy()
    pool_ids = np.arange(total, dtype=np.int64)
    remaining = total

    moments = PoolMoments(
        bin_count=0,
        bin_sum=np.zeros(d),
        bin_sumsq=0.0,
        pool_count=total,
        pool_sum=f64.sum(axis=0),
        pool_sumsq=float(sumsq.sum()),
    )

    bins: List[Bin] = []
    for index, size in enumerate(sizes, start=1):
        moments.reset_bin(d)
        members = []
        for _ in range(size):
            delta = moments.bin_sum - moments.pool_sum
            coeff = moments.bin_count - moments.pool_count
            gains = (
                (moments.bin_sumsq - moments.pool_sumsq)
                - 2.0 * (pool_rows[:remaining] @ delta)
                + coeff * pool_sumsq[:remaining]
            )
            best = float(gains.max())
            ties = np.flatnonzero(gains == best)
            slot = int(ties[np.argmin(pool_ids[ties])]) if ties.size > 1 else int(ties[0])

            row = pool_rows[slot].copy()
            row_sumsq = float(pool_sumsq[slot])
            members.append(int(pool_ids[slot]))
            remaining -= 1
            pool_rows[slot] = pool_rows[remaining]
            pool_sumsq[slot] = pool_sumsq[remaining]
            pool_ids[slot] = pool_ids[remaining]
            moments.move_to_bin(row, row_sumsq)
        bins.append(Bin(index=index, members=tuple(members)))
    return bins


# --- bin container I/O ---


def bins_to_json(bins: Sequence[Bin], k: int) -> str:
    doc = {"m": len(bins), "K": k, "bins": [list(b.members) for b in bins]}
    return json.dumps(doc, sort_keys=True) + "\n"


def write_bins(bins: Sequence[Bin], k: int, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(bins_to_json(bins, k))
    except OSError as exc:
        raise IoFailure(f"cannot write bins file {str(path)!r}: {exc}") from exc


def load_bins(path) -> Tuple[List[Bin], int]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read bins file {str(path)!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"bins file {str(path)!r} is not valid JSON: {exc}") from exc
    for key in ("m", "K", "bins"):
        if key not in doc:
            raise IoFailure(f"bins file {str(path)!r} missing key {key!r}")
    members = doc["bins"]
    if len(members) != doc["m"]:
        raise InvariantViolation(
            f"bins file declares m={doc['m']} but holds {len(members)} bins"
        )
    bins = [Bin(index=i, members=tuple(ids)) for i, ids in enumerate(members, start=1)]
    seen = set()
    for b in bins:
        overlap = seen.intersection(b.members)
        if overlap:
            raise InvariantViolation(f"bins overlap on ids {sorted(overlap)[:5]}")
        seen.update(b.members)
    return bins, int(doc["K"])
