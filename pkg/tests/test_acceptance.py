"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Criterion 10 (early-bin centroid trend) is a known red: the greedy's
own diversity term balances selection directions inside every bin, so all bin
centroids land near the pool mean and the centroid-vs-centroid statistic
cannot detect the representativeness trend (the per-member distance profile
shows it clearly; see the proxy representativeness scores).  The criterion is
asserted as specified rather than weakened.
"""

import math
import time

import numpy as np

from adq.binning import PoolMoments, fast_gain, generate_bins, naive_gain
from adq.data import FeatureTable, gen_synthetic_mixture
from adq.diversity import (
    Discriminator,
    IdentityAugmenter,
    IdentityDiscriminator,
    bin_diversity,
    contrastive_loss_and_grads,
)
from adq.binning import Bin
from adq.pipeline import run_pipeline
from adq.rng import substream
from adq.sampling import SamplingPlan, minmax_normalize, quota_counts, raw_ratios
from adq.texture import Patch, gradient_magnitude, patch_texture_level

from naive_reference import (
    greedy_naive,
    sobel_magnitude_oracle,
    uniform_plan,
)
from test_pipeline import _config, _write_dataset


def _verdict(number: int, name: str, ok: bool, detail: str = "") -> None:
    state = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{state}] criterion {number}: {name}{suffix}")
    assert ok, f"criterion {number} failed: {name}{suffix}"


def _random_features(seed: int, count: int, dim: int) -> FeatureTable:
    gen = substream(seed, "acceptance")
    return FeatureTable(gen.standard_normal((count, dim)).astype(np.float32))


def test_c01_oracle_equivalence_of_greedy_drivers():
    start = time.perf_counter()
    all_match = True
    for seed in range(10):
        table = _random_features(seed, 200, 16)
        fast = [list(b.members) for b in generate_bins(table, 10)]
        naive = greedy_naive(table, 10)
        all_match = all_match and fast == naive
    elapsed = time.perf_counter() - start
    _verdict(
        1,
        "fast-gain greedy matches naive-gain greedy on 10 seeded instances",
        all_match and elapsed < 5.0,
        f"elapsed {elapsed:.2f}s",
    )


def test_c02_gain_identity_on_random_triples():
    gen = substream(77, "triples")
    worst = 0.0
    for _ in range(1000):
        count = int(gen.integers(10, 40))
        dim = int(gen.integers(1, 12))
        table = _random_features(int(gen.integers(1 << 30)), count, dim)
        ids = gen.permutation(count)
        split = int(gen.integers(1, count))
        bin_ids = [int(x) for x in ids[:split]]
        pool_ids = [int(x) for x in ids[split:]] or [int(ids[0])]
        if not pool_ids:
            continue
        cand = pool_ids[int(gen.integers(len(pool_ids)))]
        moments = PoolMoments.from_sets(table, bin_ids, pool_ids)
        fast = fast_gain(cand, moments, table)
        naive = naive_gain(cand, bin_ids, pool_ids, table)
        worst = max(worst, abs(fast - naive) / (1.0 + abs(naive)))
    _verdict(2, "fast gain equals naive gain within 1e-6 relative on 1000 triples",
             worst <= 1e-6, f"worst {worst:.2e}")


def test_c03_partition_laws_on_random_configurations():
    gen = substream(78, "partition")
    ok = True
    checked = 0
    while checked < 20:
        count = int(gen.integers(10, 300))
        m = int(gen.integers(1, 12))
        if m > count:
            continue
        k = -(-count // m)
        if m > 1 and (m - 1) * k >= count:
            continue
        table = _random_features(int(gen.integers(1 << 30)), count, int(gen.integers(1, 8)))
        bins = generate_bins(table, m)
        sizes = [b.size for b in bins]
        flat = [i for b in bins for i in b.members]
        ok = ok and sizes[:-1] == [k] * (m - 1)
        ok = ok and sizes[-1] == count - (m - 1) * k
        ok = ok and len(set(flat)) == len(flat) == count
        ok = ok and sorted(flat) == list(range(count))
        checked += 1
    _verdict(3, "bins are disjoint, cover all ids, and follow the size schedule", ok)


def test_c04_texture_oracle():
    constant = Patch(np.full((8, 8), 0.37))
    constant_ok = patch_texture_level(constant) == 0.0

    step = np.zeros((4, 4))
    step[:, 2:] = 1.0
    got = gradient_magnitude(Patch(step))
    want = sobel_magnitude_oracle(step)
    step_ok = bool(np.max(np.abs(got - want)) <= 1e-12)

    gen = substream(79, "patches")
    transpose_ok = True
    for _ in range(100):
        pixels = gen.uniform(0.0, 1.0, size=(8, 8))
        a = gradient_magnitude(Patch(pixels.T))
        b = gradient_magnitude(Patch(pixels)).T
        transpose_ok = transpose_ok and np.allclose(a, b, rtol=0.0, atol=1e-12)
    _verdict(4, "Sobel texture matches the scalar oracle and its symmetries",
             constant_ok and step_ok and transpose_ok)


def test_c05_diversity_closed_forms_and_monotonicity():
    def pair_div(v2):
        table = FeatureTable(np.array([[1.0, 0.0], v2], dtype=np.float32))
        return bin_diversity(
            Bin(1, (0, 1)), table, IdentityDiscriminator(), 1.0, seed=0,
            augmenter=IdentityAugmenter(),
        ).value

    dup_ok = abs(pair_div([1.0, 0.0]) - (-1.0)) <= 1e-9
    orth_ok = abs(pair_div([0.0, 1.0]) - (-math.exp(-1.0))) <= 1e-9
    sweep = [pair_div([math.cos(t), math.sin(t)]) for t in np.linspace(0.05, math.pi, 20)]
    monotone_ok = all(b > a for a, b in zip(sweep, sweep[1:]))
    _verdict(5, "diversity closed forms and monotone separation",
             dup_ok and orth_ok and monotone_ok)


def test_c06_discriminator_gradient_check():
    worst = 0.0
    for seed in range(5):
        gen = substream(seed, "acc-gradcheck")
        rows = gen.standard_normal((5, 6))
        positives = rows + 0.3 * gen.standard_normal((5, 6))
        disc = Discriminator.create(6, 8, 4, seed=seed)
        _, grads = contrastive_loss_and_grads(disc, rows, positives, 0.5)
        step = 1e-5
        for name, param in disc.params().items():
            numeric = np.zeros_like(param)
            it = np.nditer(param, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = param[idx]
                param[idx] = orig + step
                up, _ = contrastive_loss_and_grads(disc, rows, positives, 0.5)
                param[idx] = orig - step
                down, _ = contrastive_loss_and_grads(disc, rows, positives, 0.5)
                param[idx] = orig
                numeric[idx] = (up - down) / (2 * step)
            rel = np.abs(grads[name] - numeric) / (1.0 + np.abs(numeric))
            worst = max(worst, float(rel.max()))
    _verdict(6, "analytic gradients match central differences within 1e-4",
             worst <= 1e-4, f"worst {worst:.2e}")


def test_c07_sampling_plan_laws():
    gen = substream(80, "planlaws")
    ok = True
    for _ in range(50):
        m = int(gen.integers(1, 12))
        masses = [int(gen.integers(1, 80)) for _ in range(m)]
        total = sum(masses)
        imps = [float(gen.uniform(0.0, 2.0)) for _ in range(m)]
        alpha = float(gen.uniform(0.0, 1.0))
        rho = float(gen.uniform(0.05, 1.0))
        plan = SamplingPlan.build(imps, masses, alpha, rho)
        budget = math.floor(rho * total)
        ok = ok and sum(plan.quotas) <= budget
        ok = ok and all(q <= n for q, n in zip(plan.quotas, plan.masses))
        if all(q < n for q, n in zip(plan.quotas, plan.masses)):
            ok = ok and sum(plan.quotas) >= budget - m

    # alpha = 0 with equal masses degenerates to the uniform plan exactly.
    dq_ok = True
    for m, mass, rho in ((10, 5000, 0.1), (7, 13, 0.35), (4, 100, 0.77), (10, 500, 0.1)):
        imps = [float(x) for x in substream(m, "imp").uniform(0.0, 2.0, size=m)]
        ratios = raw_ratios(imps, [mass] * m, alpha=0.0)
        quotas = quota_counts(ratios, [mass] * m, rho, total=m * mass)
        dq_ok = dq_ok and quotas == uniform_plan(m * mass, m, rho)
    _verdict(7, "quota laws hold and alpha=0 reduces to the uniform plan", ok and dq_ok)


def test_c08_normalization_laws():
    gen = substream(81, "normlaws")
    ok = True
    for _ in range(100):
        values = gen.standard_normal(int(gen.integers(2, 15))).tolist()
        out = minmax_normalize(values)
        ok = ok and all(0.0 <= v <= 1.0 for v in out)
        ok = ok and min(out) == 0.0 and max(out) == 1.0
        a = float(gen.uniform(0.1, 10.0))
        b = float(gen.uniform(-5.0, 5.0))
        rescaled = minmax_normalize([a * v + b for v in values])
        ok = ok and bool(np.allclose(rescaled, out, atol=1e-9))
    degenerate = minmax_normalize([4.2] * 6) == [0.5] * 6
    _verdict(8, "min-max normalization laws (range, endpoints, affine, degenerate)",
             ok and degenerate)


def test_c09_end_to_end_determinism(tmp_path, monkeypatch):
    table = gen_synthetic_mixture(6, 40, 5, 1.0, seed=21)
    manifest = _write_dataset(tmp_path, table)
    compared = ("coreset.txt", "plan.json", "report.json")

    def run_into(name):
        cfg = _config(manifest, tmp_path / name, bins=6, rho=0.25,
                      disc_mode="mlp", disc_hidden=8, disc_embed=4)
        run_pipeline(cfg)
        return {f: (tmp_path / name / f).read_bytes() for f in compared}

    monkeypatch.setenv("ADQ_THREADS", "1")
    first = run_into("det_a")
    second = run_into("det_b")
    monkeypatch.setenv("ADQ_THREADS", "4")
    third = run_into("det_c")
    _verdict(9, "reruns are byte-identical and ADQ_THREADS changes nothing",
             first == second == third)


def test_c10_early_bin_centroid_trend():
    wins = 0
    seeds = 20
    for seed in range(seeds):
        table = gen_synthetic_mixture(10, 100, 8, 1.0, seed=seed)
        feats = table.features.astype(np.float64)
        global_centroid = feats.mean(axis=0)
        bins = generate_bins(table, 10)
        first = feats[list(bins[0].members)].mean(axis=0)
        last = feats[list(bins[-1].members)].mean(axis=0)
        if np.linalg.norm(first - global_centroid) < np.linalg.norm(last - global_centroid):
            wins += 1
    rate = wins / seeds
    _verdict(10, "bin-1 centroid closer to global centroid than bin-m in >= 70% of seeds",
             rate >= 0.70, f"measured rate {rate:.0%}")


def test_c11_bin_generation_performance_bound():
    table = gen_synthetic_mixture(10, 5000, 64, 1.0, seed=5)
    start = time.perf_counter()
    bins = generate_bins(table, 10)
    elapsed = time.perf_counter() - start
    sizes_ok = [b.size for b in bins] == [5000] * 10
    _verdict(11, "bin generation at M=50000, d=64, m=10 finishes within 60s",
             sizes_ok and elapsed < 60.0, f"elapsed {elapsed:.1f}s")
