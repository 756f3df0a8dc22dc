"""Report figures rendered to PNG files next to the written report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _bar(ax, labels, values, title, ylim=None):
    ax.bar(range(len(labels)), values, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_title(title)
    if ylim:
        ax.set_ylim(*ylim)
    for x, v in enumerate(values):
        ax.text(x, v, f"{v:.2f}", ha="center", va="bottom", fontsize=8)


def render_report_figures(report, out_dir):
    """Write accuracy, grounding, and confidence figures; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    agg = report.aggregates

    by_cat = agg["accuracy"]["by_category"]
    if by_cat:
        fig, ax = plt.subplots(figsize=(6, 4))
        labels = list(by_cat) + ["overall"]
        values = [by_cat[c] for c in by_cat] + [agg["accuracy"]["overall"]]
        _bar(ax, labels, values, "Accuracy by question category (%)", (0, 105))
        fig.tight_layout()
        path = out_dir / "accuracy_by_category.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    grounding = agg["grounding"]
    keys = [k for k in ("Q", "A", "FA", "gqa_style", "precision", "recall", "f1")
            if grounding.get(k) is not None]
    if keys:
        fig, ax = plt.subplots(figsize=(6, 4))
        _bar(ax, keys, [grounding[k] for k in keys], "Grounding scores")
        fig.tight_layout()
        path = out_dir / "grounding.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    confidences = [r["confidence"] for r in report.records
                   if r["predicted"] is not None]
    if confidences:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(confidences, bins=20, range=(0.0, 1.0), color="#4878a8")
        ax.set_title("Answer confidence")
        ax.set_xlabel("geometric-mean path score")
        ax.set_ylabel("questions")
        fig.tight_layout()
        path = out_dir / "confidence_hist.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written
