"""Evaluation report rendering: text table, TSV and score figures."""

from __future__ import annotations

from pathlib import Path

from .metrics import SequenceReport

AGGREGATE_KEYS = ("j_mean", "j_recall", "j_decay", "f_mean", "f_recall", "f_decay")


def format_report(scores: list, report: SequenceReport) -> str:
    """Per-frame table followed by one `key = value` line per aggregate."""
    lines = ["frame\tj\tf"]
    for i, s in enumerate(scores):
        lines.append(f"{i:06d}\t{s.j:.4f}\t{s.f:.4f}")
    lines.append("")
    for key in AGGREGATE_KEYS:
        lines.append(f"{key} = {getattr(report, key):.4f}")
    return "\n".join(lines) + "\n"


def write_delimited(scores: list, path) -> None:
    """Per-frame scores as a tab-delimited file."""
    rows = ["frame\tj\tf"]
    rows += [f"{i:06d}\t{s.j:.6f}\t{s.f:.6f}" for i, s in enumerate(scores)]
    Path(path).write_text("\n".join(rows) + "\n")


def render_score_figure(scores: list, report: SequenceReport, path) -> None:
    """Per-frame J/F curves with their means, rendered to an image file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    frames = range(len(scores))
    js = [s.j for s in scores]
    fs = [s.f for s in scores]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(frames, js, marker="o", markersize=3, label="region similarity J")
    ax.plot(frames, fs, marker="s", markersize=3, label="contour accuracy F")
    ax.axhline(report.j_mean, color="C0", linestyle="--", linewidth=1,
               label=f"J mean = {report.j_mean:.3f}")
    ax.axhline(report.f_mean, color="C1", linestyle="--", linewidth=1,
               label=f"F mean = {report.f_mean:.3f}")
    ax.set_xlabel("frame")
    ax.set_ylabel("score")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="lower left", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report_files(scores: list, report: SequenceReport, out_dir) -> dict:
    """Write report.txt, per_frame.tsv and scores.png into `out_dir`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.txt",
        "tsv": out / "per_frame.tsv",
        "figure": out / "scores.png",
    }
    paths["report"].write_text(format_report(scores, report))
    write_delimited(scores, paths["tsv"])
    render_score_figure(scores, report, paths["figure"])
    return paths
