"""CSV rendering for traces and metric reports.

Every file starts with a ``#`` comment line carrying the config digest and
seed, then a header row. Floats are written with ``repr`` so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import io
import math

from .config import ExperimentConfig
from .metrics import REPORT_COLUMNS, MetricReport, format_value

TRACE_COLUMNS = (
    "round",
    "fog_id",
    "raw_rssi_dbm",
    "filtered_rssi_dbm",
    "est_distance_m",
    "true_distance_m",
    "fix_x_m",
    "fix_y_m",
    "rejections",
)


def provenance_line(config: ExperimentConfig) -> str:
    return f"# config_sha256={config.digest()} seed={config.seed}\n"


def _render(config: ExperimentConfig, header, rows) -> str:
    buf = io.StringIO()
    buf.write(provenance_line(config))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def trace_rows(traces, edge_id: str):
    for tr in traces:
        fix = tr.fixes.get(edge_id)
        fx, fy = (float(fix.p[0]), float(fix.p[1])) if fix is not None else (math.nan, math.nan)
        rejections = ";".join(str(r) for r in tr.rejections)
        links = [l for l in tr.links if l.edge_id == edge_id]
        if not links:
            yield (tr.k, "", "", "", "", "", fx, fy, rejections)
        for link in links:
            yield (
                tr.k,
                link.fog_id,
                link.raw_rssi,
                link.filtered_rssi,
                link.est_distance,
                link.true_distance,
                fx,
                fy,
                rejections,
            )


def render_trace(config: ExperimentConfig, traces, edge_id: str) -> str:
    return _render(config, TRACE_COLUMNS, trace_rows(traces, edge_id))


def render_metrics(config: ExperimentConfig, reports: list[MetricReport]) -> str:
    rows = [row for r in reports for row in r.rows()]
    return _render(config, REPORT_COLUMNS, rows)


def render_round_rmse(config: ExperimentConfig, rep: MetricReport) -> str:
    return _render(config, ("mode", "round", "rmse_m"), ((rep.mode, k, v) for k, v in rep.per_round_rmse))


def comparison_table(reports: list[MetricReport]) -> str:
    lines = [f"{'mode':<6}{'mean RMSE (m)':>16}{'mean accuracy (%)':>20}{'samples':>10}"]
    for r in reports:
        lines.append(f"{r.mode.upper():<6}{r.mean_rmse:>16.4f}{r.mean_accuracy:>20.2f}{r.samples:>10d}")
    return "\n".join(lines)
