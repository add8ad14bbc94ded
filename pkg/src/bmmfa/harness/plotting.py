"""Regret figures for sweep summaries."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "bmmfa",
}


def figure_size(scale=1.0, ratio=None):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    width = 7.0 * scale
    return width, width * (ratio or golden) / 2.0 * 1.1


def plot_regret(summary: dict, path) -> None:
    """Mean surrogate regret and per-round fairness gap against T, log-log."""
    with plt.rc_context(STYLE):
        fig, (ax_reg, ax_gap) = plt.subplots(1, 2, figsize=figure_size())
        for label, block in summary["policies"].items():
            rows = [r for r in block["per_T"] if r["n_runs"] > 0]
            if not rows:
                continue
            T = np.array([r["T"] for r in rows], dtype=float)
            reg = np.array([r["surrogate_regret_ub_mean"] for r in rows])
            reg_sd = np.array([r["surrogate_regret_ub_std"] for r in rows])
            gap = np.array([r["per_round_fairness_gap_mean"] for r in rows])
            pos = reg > 0
            if pos.any():
                line = ax_reg.errorbar(T[pos], reg[pos], yerr=reg_sd[pos], marker="o", ms=3,
                                       capsize=2, lw=1, label=label)
                fit = block.get("fit")
                if fit:
                    xs = np.geomspace(T[pos].min(), T[pos].max(), 50)
                    ax_reg.plot(xs, np.exp(fit["intercept"]) * xs ** fit["slope"], ls="--", lw=0.8,
                                color=line[0].get_color())
            gap = np.abs(gap)
            ax_gap.plot(T[gap > 0], gap[gap > 0], marker="o", ms=3, lw=1, label=label)
        for ax in (ax_reg, ax_gap):
            ax.set_xscale("log")
            # all-zero panels (e.g. exact ties) stay linear rather than empty log axes
            if ax.has_data() and any(len(line.get_ydata()) for line in ax.get_lines()):
                ax.set_yscale("log")
            ax.set_xlabel("horizon T")
        ax_reg.set_ylabel("mean T·P* − min expected utility")
        ax_gap.set_ylabel("|per-round fairness gap|")
        if ax_reg.get_legend_handles_labels()[0]:
            ax_reg.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
