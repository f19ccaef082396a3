"""Evaluation arithmetic and the report/verdict file formats."""

from __future__ import annotations

import io

import pytest

from sigmine.dataset import CATEGORIES, ParseError
from sigmine.metrics import (
    ConfusionMatrix,
    MetricsError,
    comparison_table,
    evaluate,
    read_eval_report,
    read_verdicts,
    write_eval_report,
    write_verdicts,
)


class TestEvaluate:
    def test_detection_ignores_category_recall_does_not(self):
        # one attack called the wrong attack, one normal flagged: both count
        # as "detected"/"false alarm", but DoS recall is still zero
        report = evaluate(["DoS", "Normal"], ["Probe", "DoS"], "demo")
        assert report.detection_rate == 1.0
        assert report.false_alarm_rate == 1.0
        assert report.per_category_recall["DoS"] == 0.0
        assert set(report.degenerate) == {"recall:Probe", "recall:R2L", "recall:U2R"}

    def test_mixed_batch(self):
        truth = ["Normal", "Normal", "Normal", "DoS", "DoS", "Probe", "R2L"]
        pred = ["Normal", "DoS", "Normal", "DoS", "Normal", "Probe", "Probe"]
        report = evaluate(truth, pred, "demo")
        assert report.n_records == 7
        assert report.detection_rate == pytest.approx(3 / 4)
        assert report.false_alarm_rate == pytest.approx(1 / 3)
        assert report.per_category_recall["DoS"] == pytest.approx(1 / 2)
        assert report.per_category_recall["Probe"] == 1.0
        assert report.per_category_recall["R2L"] == 0.0
        assert report.confusion.row("Normal") == (2, 1, 0, 0, 0)
        assert report.confusion.total() == 7

    def test_all_normal_truth_degenerates_detection(self):
        report = evaluate(["Normal", "Normal"], ["Normal", "DoS"], "demo")
        assert report.detection_rate == 0.0
        assert "detection_rate" in report.degenerate
        assert report.false_alarm_rate == 0.5

    def test_all_attack_truth_degenerates_false_alarms(self):
        report = evaluate(["DoS"], ["DoS"], "demo")
        assert report.false_alarm_rate == 0.0
        assert "false_alarm_rate" in report.degenerate

    def test_input_validation(self):
        with pytest.raises(MetricsError, match="length"):
            evaluate(["DoS"], [], "demo")
        with pytest.raises(MetricsError, match="truth"):
            evaluate(["dos"], ["DoS"], "demo")
        with pytest.raises(MetricsError, match="prediction"):
            evaluate(["DoS"], ["Smurf"], "demo")

    def test_empty_input_is_fully_degenerate(self):
        report = evaluate([], [], "demo")
        assert report.n_records == 0
        assert len(report.degenerate) == 2 + len(CATEGORIES)


class TestConfusionMatrix:
    def test_shape_enforced(self):
        with pytest.raises(MetricsError):
            ConfusionMatrix(((1, 2), (3, 4)))

    def test_row_lookup(self):
        counts = tuple(
            tuple(10 * i + j for j in range(5)) for i in range(5)
        )
        cm = ConfusionMatrix(counts)
        assert cm.row("DoS") == counts[CATEGORIES.index("DoS")]


class TestReportIo:
    def test_json_round_trip(self, tmp_path):
        report = evaluate(
            ["Normal", "DoS", "Probe", "R2L", "U2R", "DoS"],
            ["Normal", "DoS", "DoS", "R2L", "Normal", "DoS"],
            "rules",
        )
        path = tmp_path / "report.json"
        write_eval_report(report, path)
        assert read_eval_report(path) == report

    def test_stream_round_trip(self):
        report = evaluate(["DoS", "Normal"], ["DoS", "Normal"], "classifier")
        buf = io.StringIO()
        write_eval_report(report, buf)
        assert read_eval_report(io.StringIO(buf.getvalue())) == report


class TestVerdictIo:
    VERDICTS = [(0, "DoS", 1000001), (1, "Normal", None), (2, "Probe", 1000007)]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "verdicts.tsv"
        write_verdicts(self.VERDICTS, path)
        assert read_verdicts(path) == self.VERDICTS

    def test_layout(self):
        buf = io.StringIO()
        write_verdicts(self.VERDICTS, buf)
        assert buf.getvalue().splitlines()[1] == "1\tNormal\t-"

    def test_read_errors(self):
        with pytest.raises(ParseError, match="expected 3 fields"):
            read_verdicts(["0\tDoS"])
        with pytest.raises(ParseError, match="bad index"):
            read_verdicts(["zero\tDoS\t-"])
        with pytest.raises(ParseError, match="unknown category"):
            read_verdicts(["0\tdos\t-"])
        with pytest.raises(ParseError, match="bad sid"):
            read_verdicts(["0\tDoS\tx"])

    def test_blank_lines_skipped(self):
        assert read_verdicts(["", "0\tU2R\t-", ""]) == [(0, "U2R", None)]


class TestComparisonTable:
    def test_format(self):
        a = evaluate(["DoS", "Normal"], ["DoS", "Normal"], "classifier")
        b = evaluate(["DoS", "Normal"], ["Normal", "DoS"], "rules")
        text = comparison_table([a, b])
        lines = text.splitlines()
        assert lines[0].split("\t")[:4] == [
            "source",
            "n_records",
            "detection_rate",
            "false_alarm_rate",
        ]
        assert lines[1].split("\t")[:4] == ["classifier", "2", "1.0000", "0.0000"]
        assert lines[2].split("\t")[:4] == ["rules", "2", "0.0000", "1.0000"]
        assert len(lines[0].split("\t")) == 4 + len(CATEGORIES)
