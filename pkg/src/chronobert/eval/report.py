"""Flat-file reporting: metrics.csv, report.md, att_pca.csv, lengths.csv.

All writers are deterministic byte-for-byte given the same inputs: fixed
column orders, fixed row orders, ``repr``-exact floats in CSVs, and fixed
rounding in the human-readable report.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .experiment import MetricReport

METRICS_HEADER = ("task", "model", "fraction", "fold", "auc", "pr_auc")
OMITTED_BASELINE_NOTE = (
    "The gradient-boosted-tree column is omitted by design; this package has "
    "no tree-learner dependency.")


def format_mean_std(mean: float, std: float) -> str:
    """Percent with one decimal, e.g. ``80.7±0.6%``."""
    return f"{100.0 * mean:.1f}±{100.0 * std:.1f}%"


def metric_rows(reports) -> list[tuple]:
    """Flatten reports to (task, model, fraction, fold, auc, pr_auc) tuples."""
    rows = []
    for report in reports:
        for fold, (auc, pr) in enumerate(zip(report.fold_aucs, report.fold_pr_aucs)):
            rows.append((report.task, report.model, report.fraction, fold, auc, pr))
    return rows


def metrics_csv_bytes(reports) -> bytes:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for task, model, fraction, fold, auc, pr in metric_rows(reports):
        writer.writerow([task, model, repr(float(fraction)), fold,
                         repr(float(auc)), repr(float(pr))])
    return out.getvalue().encode()


def write_metrics_csv(reports, path) -> Path:
    path = Path(path)
    path.write_bytes(metrics_csv_bytes(reports))
    return path


def _grid_lines(reports: list[MetricReport], title: str) -> list[str]:
    lines = [f"## {title}", "",
             "| model | fraction | AUC | PR-AUC |",
             "| --- | --- | --- | --- |"]
    for report in reports:
        auc = format_mean_std(*report.auc_summary())
        pr = format_mean_std(*report.pr_auc_summary())
        lines.append(f"| {report.model} | {report.fraction:g} | {auc} | {pr} |")
    lines.append("")
    return lines


def report_markdown(reports, title: str = "Evaluation report") -> str:
    """Per-task grids of mean±std scores, rows in the order reports were made."""
    lines = [f"# {title}", ""]
    by_task: dict[str, list[MetricReport]] = {}
    for report in reports:
        by_task.setdefault(report.task, []).append(report)
    for task, task_reports in by_task.items():
        lines.extend(_grid_lines(task_reports, task))
    lines.append(OMITTED_BASELINE_NOTE)
    lines.append("")
    return "\n".join(lines)


def write_report_md(reports, path, title: str = "Evaluation report") -> Path:
    path = Path(path)
    path.write_text(report_markdown(reports, title))
    return path


def write_att_pca_csv(coordinates, path) -> Path:
    """``(token, x, y)`` rows for the interval-embedding projection."""
    path = Path(path)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("token", "x", "y"))
    for token, x, y in coordinates:
        writer.writerow([token, repr(float(x)), repr(float(y))])
    path.write_bytes(out.getvalue().encode())
    return path


def write_lengths_csv(rows, path) -> Path:
    """``(task, variant, median, p95)`` sequence-length summary."""
    path = Path(path)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("task", "variant", "median", "p95"))
    for row in rows:
        writer.writerow([row["task"], row["variant"],
                         repr(float(row["median"])), repr(float(row["p95"]))])
    path.write_bytes(out.getvalue().encode())
    return path
