"""Deterministic flat-file reporting."""

import csv

from chronobert.eval import (
    MetricReport,
    OMITTED_BASELINE_NOTE,
    format_mean_std,
    metric_rows,
    metrics_csv_bytes,
    report_markdown,
    write_att_pca_csv,
    write_lengths_csv,
    write_metrics_csv,
    write_report_md,
)

GAP = MetricReport(task="gap_signal", model="CEHR-BERT", fraction=1.0,
                   fold_aucs=(0.8, 0.9), fold_pr_aucs=(0.7, 0.75),
                   fold_digests=("a", "b"))
GAP_LR = MetricReport(task="gap_signal", model="LR", fraction=1.0,
                      fold_aucs=(0.6, 0.64), fold_pr_aucs=(0.5, 0.52),
                      fold_digests=("a", "b"))
TYPE = MetricReport(task="type_signal", model="CEHR-BERT", fraction=0.05,
                    fold_aucs=(0.55,), fold_pr_aucs=(0.5,), fold_digests=("c",))


class TestFormatting:
    def test_percent_with_one_decimal(self):
        assert format_mean_std(0.807, 0.006) == "80.7±0.6%"

    def test_rounding_not_truncation(self):
        assert format_mean_std(0.8075, 0.0) == "80.8±0.0%"


class TestMetricsCsv:
    def test_rows_flatten_fold_by_fold(self):
        rows = metric_rows([GAP, TYPE])
        assert rows == [
            ("gap_signal", "CEHR-BERT", 1.0, 0, 0.8, 0.7),
            ("gap_signal", "CEHR-BERT", 1.0, 1, 0.9, 0.75),
            ("type_signal", "CEHR-BERT", 0.05, 0, 0.55, 0.5),
        ]

    def test_exact_bytes(self):
        expected = (b"task,model,fraction,fold,auc,pr_auc\n"
                    b"type_signal,CEHR-BERT,0.05,0,0.55,0.5\n")
        assert metrics_csv_bytes([TYPE]) == expected

    def test_floats_survive_a_round_trip(self, tmp_path):
        report = MetricReport(task="t", model="m", fraction=1 / 3,
                              fold_aucs=(0.1234567890123,), fold_pr_aucs=(2 / 7,))
        path = write_metrics_csv([report], tmp_path / "metrics.csv")
        with open(path, newline="") as fh:
            row = list(csv.DictReader(fh))[0]
        assert float(row["fraction"]) == 1 / 3
        assert float(row["auc"]) == 0.1234567890123
        assert float(row["pr_auc"]) == 2 / 7


class TestReportMarkdown:
    def test_groups_rows_by_task(self):
        text = report_markdown([GAP, GAP_LR, TYPE], title="Planted signals")
        lines = text.splitlines()
        assert lines[0] == "# Planted signals"
        gap_at = lines.index("## gap_signal")
        type_at = lines.index("## type_signal")
        assert gap_at < type_at
        assert "| CEHR-BERT | 1 | 85.0±7.1% | 72.5±3.5% |" in lines[gap_at:type_at]
        assert "| LR | 1 | 62.0±2.8% | 51.0±1.4% |" in lines[gap_at:type_at]

    def test_single_fold_cells_report_zero_spread(self):
        text = report_markdown([TYPE])
        assert "| CEHR-BERT | 0.05 | 55.0±0.0% | 50.0±0.0% |" in text

    def test_mentions_the_omitted_tree_column(self, tmp_path):
        path = write_report_md([GAP], tmp_path / "report.md")
        assert OMITTED_BASELINE_NOTE in path.read_text()


class TestAuxiliaryCsvs:
    def test_projection_rows(self, tmp_path):
        coords = [("VS", 0.5, -0.25), ("LT", -1.0, 0.125)]
        path = write_att_pca_csv(coords, tmp_path / "att_pca.csv")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows == [["token", "x", "y"], ["VS", "0.5", "-0.25"], ["LT", "-1.0", "0.125"]]

    def test_length_rows(self, tmp_path):
        rows = [{"task": "gap_signal", "variant": "cehr", "median": 40.0, "p95": 71.5}]
        path = write_lengths_csv(rows, tmp_path / "lengths.csv")
        with open(path, newline="") as fh:
            out = list(csv.reader(fh))
        assert out == [["task", "variant", "median", "p95"],
                       ["gap_signal", "cehr", "40.0", "71.5"]]
