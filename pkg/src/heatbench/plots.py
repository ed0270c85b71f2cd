"""Removal-curve figures rendered to SVG next to the delimited output.

Matplotlib runs on the Agg backend so plotting works headless. SVG output is
kept reproducible: a fixed hash salt for element ids and no embedded creation
date. Provenance goes into the SVG metadata description.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .report import _method_items, _slug, provenance_text  # noqa: E402

_SVG_SALT = "heatbench"


def removal_curve_figure(schedule, curve, baseline_mean, ci_lo, ci_hi,
                         title: str, metric: str):
    """Method curve against the random baseline band. Caller closes it."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4), constrained_layout=True)
    ax.fill_between(schedule, ci_lo, ci_hi, color="tab:gray", alpha=0.25,
                    linewidth=0, label="random 95% CI")
    ax.plot(schedule, baseline_mean, color="tab:gray", linestyle="--",
            linewidth=1.2, label="random mean")
    ax.plot(schedule, curve, color="tab:blue", marker="o", markersize=3.5,
            linewidth=1.6, label="method")
    ax.set_xlabel("fraction of features removed")
    ax.set_ylabel(metric)
    ax.set_xlim(min(schedule), max(schedule))
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    return fig


def write_curve_plots(report: dict, out_dir: str | Path) -> list[Path]:
    """One SVG per (method, endpoint) with faithfulness curves."""
    plt.rcParams["svg.hashsalt"] = _SVG_SALT
    metric = report["context"]["task_metric"]
    schedule = report["context"]["schedule"]
    prov = provenance_text(report)
    written: list[Path] = []
    plot_dir = Path(out_dir) / "plots"
    for method, block in _method_items(report):
        if block.get("status") != "ok" or "faithfulness" not in block:
            continue
        for entry in block["faithfulness"]["per_endpoint"]:
            auc = entry["diff_auc"]
            title = f"{method} (diffAUC={auc:.3f})" if auc is not None else method
            fig = removal_curve_figure(
                schedule, entry["curve"], entry["baseline_mean"],
                entry["baseline_ci_lo"], entry["baseline_ci_hi"], title, metric)
            plot_dir.mkdir(parents=True, exist_ok=True)
            path = plot_dir / f"{_slug(method)}--{_slug(entry['endpoint'])}.svg"
            # Date=None drops the timestamp; reruns produce identical bytes.
            fig.savefig(path, format="svg",
                        metadata={"Date": None, "Description": prov})
            plt.close(fig)
            written.append(path)
    return written
