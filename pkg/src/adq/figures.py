"""Report figures rendered to files next to the delimited outputs.

matplotlib is imported lazily with the Agg backend, so headless runs work and
library users who never render figures do not pay the import.
"""

from __future__ import annotations

from .errors import IoFailure
from .sampling import SamplingPlan, ScoreTable


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_trend_figure(scores: ScoreTable, path, rep_mode: str = "texture") -> None:
    """Line chart of normalized per-bin scores (RS, DS) and importance (IS)."""
    plt = _pyplot()
    bins = range(1, scores.bin_count + 1)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    rs_label = "RS (normalized)" if rep_mode == "texture" else "RS (proxy, normalized)"
    ax.plot(bins, scores.rep_hat, marker="o", label=rs_label)
    ax.plot(bins, scores.div_hat, marker="s", label="DS (normalized)")
    ax.plot(bins, scores.importance, marker="^", label="IS")
    ax.set_xlabel("bin")
    ax.set_ylabel("score")
    ax.set_title("Per-bin scores")
    ax.set_xticks(list(bins))
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    try:
        fig.savefig(path, dpi=150)
    except OSError as exc:
        raise IoFailure(f"cannot write figure {str(path)!r}: {exc}") from exc
    finally:
        plt.close(fig)


def render_plan_figure(plan: SamplingPlan, path) -> None:
    """Bar chart of per-bin mass next to the sampled quota."""
    plt = _pyplot()
    m = len(plan.quotas)
    xs = range(1, m + 1)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    width = 0.4
    ax.bar([x - width / 2 for x in xs], plan.masses, width=width, label="bin size")
    ax.bar([x + width / 2 for x in xs], plan.quotas, width=width, label="quota")
    ax.set_xlabel("bin")
    ax.set_ylabel("items")
    ax.set_title(f"Sampling plan (alpha={plan.alpha:g}, rho={plan.rho:g})")
    ax.set_xticks(list(xs))
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    try:
        fig.savefig(path, dpi=150)
    except OSError as exc:
        raise IoFailure(f"cannot write figure {str(path)!r}: {exc}") from exc
    finally:
        plt.close(fig)
