"""Log-scale boxplots of MAD records rendered to self-contained SVG."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import summarize  # noqa: E402

# zeros (exact equivalence) cannot be drawn on a log axis
LOG_FLOOR = 1e-16


def boxplot_svg(records, title: str | None = None) -> str:
    """One panel per model; boxes per rho, one colour per grouping; dots mark means."""
    stats = summarize(records)
    models = sorted({s.model for s in stats})
    groupings = sorted({s.grouping for s in stats})
    colours = dict(zip(groupings, ["#4C72B0", "#DD8452", "#55A868", "#C44E52"]))

    plt.rcParams["svg.fonttype"] = "path"
    plt.rcParams["svg.hashsalt"] = "groupshap"
    fig, axes = plt.subplots(
        1, len(models), figsize=(4.2 * len(models), 3.6), sharey=True, squeeze=False
    )
    for ax, model in zip(axes[0], models):
        rows = [s for s in stats if s.model == model]
        rhos = sorted({s.rho for s in rows})
        width = 0.8 / max(len(groupings), 1)
        for k, g in enumerate(groupings):
            boxes, pos = [], []
            for i, rho in enumerate(rhos):
                match = [s for s in rows if s.grouping == g and s.rho == rho]
                if not match:
                    continue
                s = match[0]
                fl = lambda v: max(v, LOG_FLOOR)  # noqa: E731
                boxes.append(
                    {
                        "med": fl(s.median), "q1": fl(s.q1), "q3": fl(s.q3),
                        "whislo": fl(s.whisker_low), "whishi": fl(s.whisker_high),
                        "fliers": [], "label": f"{rho:g}",
                    }
                )
                pos.append(i + (k - (len(groupings) - 1) / 2) * width)
                ax.plot(pos[-1], fl(s.mean), "o", color="black", markersize=3, zorder=3)
            if boxes:
                art = ax.bxp(boxes, positions=pos, widths=width * 0.9, patch_artist=True,
                             manage_ticks=False)
                for patch in art["boxes"]:
                    patch.set_facecolor(colours[g])
                    patch.set_alpha(0.7)
                ax.plot([], [], "s", color=colours[g], label=f"grouping {g}")
        ax.set_yscale("log")
        ax.set_xticks(np.arange(len(rhos)))
        ax.set_xticklabels([f"{r:g}" for r in rhos])
        ax.set_xlabel("between-group correlation")
        ax.set_title(model)
    axes[0][0].set_ylabel("MAD (log scale)")
    axes[0][-1].legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
