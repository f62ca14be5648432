"""Figure rendering for CLI reports.

Every report path that writes delimited output also renders a matching
figure next to it; these helpers keep the styling in one place.  The Agg
backend is forced so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .complexity import ComplexityReport
from .metrics import EvalReport


def save_loss_curves(curves: dict[str, list[float]], path: str | Path,
                     title: str = "training loss") -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, values in curves.items():
        ax.plot(range(len(values)), values, label=name, linewidth=1.6)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    if len(curves) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_pred_scatter(pred, mos, path: str | Path, title: str = "predictions") -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    ax.scatter(mos, pred, s=14, alpha=0.6, edgecolors="none")
    lo = min(min(mos), min(pred))
    hi = max(max(mos), max(pred))
    ax.plot([lo, hi], [lo, hi], color="gray", linewidth=1, linestyle="--")
    ax.set_xlabel("subjective score")
    ax.set_ylabel("predicted score")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_space_bars(reports: dict[str, EvalReport], path: str | Path,
                    title: str = "per-space agreement") -> Path:
    metrics = ("plcc", "srcc", "krcc")
    spaces = list(reports)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    width = 0.8 / len(metrics)
    for mi, metric in enumerate(metrics):
        xs = [si + mi * width for si in range(len(spaces))]
        ys = [getattr(reports[s], metric) for s in spaces]
        ax.bar(xs, ys, width=width, label=metric.upper())
    ax.set_xticks([si + width for si in range(len(spaces))])
    ax.set_xticklabels([s.upper() for s in spaces])
    ax.set_ylim(-1.0, 1.0)
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_macs_breakdown(report: ComplexityReport, path: str | Path,
                        top: int = 20) -> Path:
    rows = sorted(report.rows, key=lambda r: r.macs, reverse=True)[:top]
    rows = rows[::-1]
    fig, ax = plt.subplots(figsize=(8, max(3.0, 0.32 * len(rows))))
    ax.barh([r.name for r in rows], [r.macs / 1e6 for r in rows])
    ax.set_xlabel("MACs (millions)")
    ax.set_title(f"heaviest layers ({report.mode} mode)")
    ax.grid(True, axis="x", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
