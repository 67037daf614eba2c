"""Evaluation report emission: JSON document, fixed-width table, figures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import PplReport


@dataclass
class EvalReport:
    metrics: dict[str, float] = field(default_factory=dict)  # micro_f1/macro_f1/auc
    ppl: PplReport | None = None
    judge: dict[str, int] | None = None  # wins_a/wins_b/ties

    def to_json_obj(self) -> dict:
        obj: dict = {"metrics": self.metrics}
        if self.ppl is not None:
            obj["ppl"] = self.ppl.to_json_obj()
        if self.judge is not None:
            obj["judge"] = self.judge
        return obj

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(
            json.dumps(self.to_json_obj(), ensure_ascii=False, indent=1) + "\n",
            encoding="utf-8",
        )
        return path

    def table(self) -> str:
        """Fixed-width summary table for terminal output."""
        rows: list[tuple[str, str]] = []
        for name in ("micro_f1", "macro_f1", "auc"):
            if name in self.metrics:
                rows.append((name, f"{self.metrics[name]:.4f}"))
        if self.ppl is not None:
            rows.append(("ppl_mean", f"{self.ppl.mean:.3f}"))
            rows.append(("ppl_max", f"{self.ppl.max:.3f}"))
        if self.judge is not None:
            for key in ("wins_a", "wins_b", "ties"):
                rows.append((key, str(self.judge.get(key, 0))))
        width = max((len(n) for n, _ in rows), default=8)
        lines = [f"{'metric':<{width}}  value", f"{'-' * width}  -----"]
        lines += [f"{name:<{width}}  {value}" for name, value in rows]
        return "\n".join(lines)

    def render_figure(self, path: str | Path) -> Path:
        """Bar-chart rendering of the report, written as an image file."""
        path = Path(path)
        panels = []
        if self.metrics:
            panels.append(("classification", list(self.metrics.items())))
        if self.ppl is not None:
            panels.append(("perplexity", [("mean", self.ppl.mean), ("max", self.ppl.max)]))
        if self.judge is not None:
            panels.append(
                ("pairwise judge", [(k, self.judge.get(k, 0)) for k in ("wins_a", "wins_b", "ties")])
            )
        if not panels:
            panels = [("empty report", [])]
        fig, axes = plt.subplots(1, len(panels), figsize=(4 * len(panels), 3.2))
        if len(panels) == 1:
            axes = [axes]
        for ax, (title, rows) in zip(axes, panels):
            if rows:
                names, values = zip(*rows)
                ax.bar(range(len(values)), values, color="#4878a8")
                ax.set_xticks(range(len(values)))
                ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
            ax.set_title(title, fontsize=10)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        return path
