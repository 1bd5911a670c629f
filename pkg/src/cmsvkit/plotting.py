"""Phase-transition figures for experiment summaries."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def phase_plot(summary: dict, path) -> Path:
    """Success rate against m, one line per (k, q, epsilon) group.

    PNG metadata is stripped of the software stamp so reruns are
    byte-identical.
    """
    lines: dict = {}
    for g in summary["groups"]:
        key = (g["k"], g["q"], g["epsilon"])
        lines.setdefault(key, []).append((g["m"], g["success_rate"]))
    fig, ax = plt.subplots(figsize=(6, 4), dpi=100)
    for (k, q, eps), pts in sorted(lines.items(), key=lambda kv: str(kv[0])):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"k={k}, q={q}, eps={eps:g}")
    ax.set_xlabel("measurements m")
    ax.set_ylabel("recovery success rate")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path
