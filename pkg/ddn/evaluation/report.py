"""
Evaluation reports.

A report is rendered as a tab-separated table (one row per trial plus an
aggregate row) and a short human-readable summary whose log-likelihood line
reads ``mean±std`` with the unbiased (n - 1) standard deviation.
"""
import io
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Dict, List, Optional

import agate
import numpy as np

from ddn.__version__ import version
from ddn.exceptions import exception_handler


def _number(value: Optional[float]) -> Optional[Decimal]:
    if value is None or not math.isfinite(value):
        return None
    return Decimal(f"{value:.9g}")


def mean_std(values: List[float]) -> Dict[str, float]:
    """Mean and unbiased standard deviation; std is NaN with fewer than two values."""
    array = np.asarray(values, dtype=np.float64)
    if array.size == 0:
        return {"mean": math.nan, "std": math.nan}
    std = float(np.std(array, ddof=1)) if array.size >= 2 else math.nan
    return {"mean": float(np.mean(array)), "std": std}


def format_mean_std(values: List[float], digits: int = 2) -> str:
    """``mean±std``; a single value reads ``mean±0`` and is marked as one trial."""
    stats = mean_std(values)
    if math.isnan(stats["mean"]):
        return "n/a"
    if math.isnan(stats["std"]):
        return f"{stats['mean']:.{digits}f}±{0.0:.{digits}f} (single trial)"
    return f"{stats['mean']:.{digits}f}±{stats['std']:.{digits}f}"


@dataclass
class TrialRecord:
    trial: int
    seed: int
    log_likelihood: Optional[float] = None
    sse: Optional[float] = None
    sse_by_condition: Dict[float, float] = field(default_factory=dict)
    entropy: Optional[float] = None
    failed: bool = False
    reason: str = ""

    def brief(self) -> str:
        parts = []
        if self.log_likelihood is not None:
            parts.append(f"LL={self.log_likelihood:.4f}")
        if self.sse is not None:
            parts.append(f"SSE={self.sse:.6f}")
        return " ".join(parts) or "no metrics"


@dataclass
class EvalReport:
    label: str
    trials: List[TrialRecord] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.metadata.setdefault("version", version)

    @property
    def succeeded(self) -> List[TrialRecord]:
        return sorted((t for t in self.trials if not t.failed), key=lambda t: t.trial)

    @property
    def failed(self) -> List[TrialRecord]:
        return sorted((t for t in self.trials if t.failed), key=lambda t: t.trial)

    def _values(self, attribute: str) -> List[float]:
        return [getattr(t, attribute) for t in self.succeeded if getattr(t, attribute) is not None]

    @property
    def log_likelihoods(self) -> List[float]:
        return self._values("log_likelihood")

    @property
    def sses(self) -> List[float]:
        return self._values("sse")

    @property
    def entropies(self) -> List[float]:
        return self._values("entropy")

    def summary_stats(self) -> Dict[str, Dict[str, float]]:
        return {
            "log_likelihood": mean_std(self.log_likelihoods),
            "sse": mean_std(self.sses),
            "entropy": mean_std(self.entropies),
        }

    def table(self) -> agate.Table:
        column_names = ["label", "trial", "seed", "status", "log_likelihood", "sse", "entropy"]
        column_types = [agate.Text(), agate.Text(), agate.Text(), agate.Text(), agate.Number(), agate.Number(), agate.Number()]
        rows = [
            [
                self.label,
                str(t.trial),
                str(t.seed),
                "failed" if t.failed else "ok",
                _number(t.log_likelihood),
                _number(t.sse),
                _number(t.entropy),
            ]
            for t in sorted(self.trials, key=lambda t: t.trial)
        ]
        stats = self.summary_stats()
        for name in ("mean", "std"):
            rows.append(
                [
                    self.label,
                    name,
                    "",
                    "",
                    _number(stats["log_likelihood"][name]),
                    _number(stats["sse"][name]),
                    _number(stats["entropy"][name]),
                ]
            )
        return agate.Table(rows, column_names, column_types)

    def to_tsv(self) -> str:
        return table_to_tsv(self.table())

    def summary(self) -> str:
        lines = [f"{self.label}: {len(self.succeeded)} of {len(self.trials)} trials succeeded"]
        if self.log_likelihoods:
            lines.append(f"  test log-likelihood: {format_mean_std(self.log_likelihoods)}")
        if self.sses:
            lines.append(f"  mean SSE: {format_mean_std(self.sses, digits=6)}")
        if self.entropies:
            lines.append(f"  head entropy: {format_mean_std(self.entropies, digits=4)}")
        for t in self.failed:
            lines.append(f"  FLAGGED trial {t.trial} failed: {t.reason}")
        return "\n".join(lines) + "\n"

    def write(self, path: str) -> None:
        with exception_handler(f"writing report {path}"):
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(self.to_tsv())
            with open(f"{path}.summary.txt", "w", encoding="utf-8") as f:
                f.write(self.summary())


def comparison_table(reports: List[EvalReport], metric: str) -> agate.Table:
    """One row per report: label, trial count and the ``mean±std`` of ``metric``."""
    rows = []
    for report in reports:
        values = getattr(report, metric)
        stats = mean_std(values)
        rows.append([report.label, str(len(values)), _number(stats["mean"]), _number(stats["std"]), format_mean_std(values, 4)])
    return agate.Table(
        rows,
        ["label", "trials", "mean", "std", "mean_std"],
        [agate.Text(), agate.Text(), agate.Number(), agate.Number(), agate.Text()],
    )


def table_to_tsv(table: agate.Table) -> str:
    buffer = io.StringIO()
    table.to_csv(buffer, delimiter="\t", lineterminator="\n")
    return buffer.getvalue()
