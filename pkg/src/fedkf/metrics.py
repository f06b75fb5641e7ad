"""Evaluation metrics: distance RMSE and RSSI percent accuracy."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

REPORT_COLUMNS = ("mode", "distance_m", "rmse_m", "mean_accuracy_pct", "samples")


class MetricShapeError(ValueError):
    pass


def rmse(predicted: Sequence[float], observed: Sequence[float]) -> float:
    """Root-mean-square error between paired samples."""
    p = np.asarray(predicted, dtype=float)
    o = np.asarray(observed, dtype=float)
    if p.shape != o.shape or p.ndim != 1 or p.size == 0:
        raise MetricShapeError(f"need equal non-empty 1-D inputs, got {p.shape} and {o.shape}")
    return float(np.sqrt(np.sum((p - o) ** 2) / p.size))


def rssi_accuracy_raw(theoretical: float, measured: float) -> float:
    """Percent accuracy ``(1 - |(theoretical - measured) / theoretical|) * 100``; may be negative."""
    if theoretical == 0:
        raise ZeroDivisionError("theoretical RSSI must be non-zero")
    return (1.0 - abs((theoretical - measured) / theoretical)) * 100.0


def rssi_accuracy(theoretical: float, measured: float) -> float:
    """Same as :func:`rssi_accuracy_raw`, clamped at 0 %."""
    return max(0.0, rssi_accuracy_raw(theoretical, measured))


@dataclass
class MetricReport:
    mode: str
    per_distance_rmse: dict[float, float]
    per_distance_accuracy: dict[float, float]
    per_distance_samples: dict[float, int]
    mean_rmse: float
    mean_accuracy: float
    mean_accuracy_raw: float
    samples: int
    per_round_rmse: list[tuple[int, float]] = field(default_factory=list)

    def rows(self) -> list[tuple]:
        out = [
            (self.mode, d, self.per_distance_rmse[d], self.per_distance_accuracy[d], self.per_distance_samples[d])
            for d in sorted(self.per_distance_rmse)
        ]
        out.append((self.mode, "all", self.mean_rmse, self.mean_accuracy, self.samples))
        return out


def report(traces, burn_in: int = 0, mode: str | None = None) -> MetricReport:
    """Aggregate a run's traces, skipping the first ``burn_in`` rounds.

    RMSE is computed per known (true) link distance, then averaged across
    distances. Accuracy compares the noiseless model RSSI at the true
    distance with the filtered RSSI, averaged over rounds and links.
    """
    if not traces:
        raise MetricShapeError("no traces to report on")
    est = defaultdict(list)
    truth = defaultdict(list)
    acc = defaultdict(list)
    raw_acc = []
    per_round = []
    for tr in traces:
        if tr.k < burn_in:
            continue
        round_est, round_true = [], []
        for link in tr.links:
            key = round(link.true_distance, 9)
            est[key].append(link.est_distance)
            truth[key].append(link.true_distance)
            a = rssi_accuracy_raw(link.theoretical_rssi, link.filtered_rssi)
            acc[key].append(max(0.0, a))
            raw_acc.append(a)
            round_est.append(link.est_distance)
            round_true.append(link.true_distance)
        if round_est:
            per_round.append((tr.k, rmse(round_est, round_true)))
    if not raw_acc:
        raise MetricShapeError("no samples after burn-in")
    per_rmse = {d: rmse(est[d], truth[d]) for d in est}
    per_acc = {d: float(np.mean(acc[d])) for d in acc}
    per_n = {d: len(est[d]) for d in est}
    return MetricReport(
        mode=mode or traces[0].mode,
        per_distance_rmse=per_rmse,
        per_distance_accuracy=per_acc,
        per_distance_samples=per_n,
        mean_rmse=float(np.mean(list(per_rmse.values()))),
        mean_accuracy=float(np.mean([a for v in acc.values() for a in v])),
        mean_accuracy_raw=float(np.mean(raw_acc)),
        samples=len(raw_acc),
        per_round_rmse=per_round,
    )


def format_value(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)
