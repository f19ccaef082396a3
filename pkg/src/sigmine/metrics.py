"""Detector evaluation: detection rate, false alarm rate, confusion matrix.

Truth and predictions are category strings. Degenerate 0/0 rates come back
as 0.0 and the affected metric names are flagged on the report rather than
silently blending in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

from .dataset import CATEGORIES, ParseError

Verdict = tuple[int, str, int | None]


class MetricsError(ValueError):
    """Invalid evaluation input."""


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i][j] = records of true category i predicted as category j,
    both indexed in CATEGORIES order."""

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        k = len(CATEGORIES)
        if len(self.counts) != k or any(len(row) != k for row in self.counts):
            raise MetricsError(f"confusion matrix must be {k}x{k}")

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def row(self, category: str) -> tuple[int, ...]:
        return self.counts[CATEGORIES.index(category)]


@dataclass(frozen=True)
class EvaluationReport:
    source: str
    n_records: int
    detection_rate: float
    false_alarm_rate: float
    per_category_recall: Mapping[str, float]
    confusion: ConfusionMatrix
    degenerate: tuple[str, ...]


def evaluate(
    truth: Sequence[str], predicted: Sequence[str], source: str
) -> EvaluationReport:
    """Score predictions against ground truth.

    Detection rate is the fraction of attack records given any non-Normal
    verdict (the exact category does not matter there); false alarm rate is
    the fraction of normal records flagged. Per-category recall does demand
    the exact category. Every rate whose denominator is zero is reported as
    0.0 and listed in `degenerate`.
    """
    if len(truth) != len(predicted):
        raise MetricsError("truth and predictions differ in length")
    for seq, what in ((truth, "truth"), (predicted, "prediction")):
        for c in seq:
            if c not in CATEGORIES:
                raise MetricsError(f"unknown {what} category {c!r}")

    k = len(CATEGORIES)
    idx = {c: i for i, c in enumerate(CATEGORIES)}
    grid = [[0] * k for _ in range(k)]
    for t, p in zip(truth, predicted):
        grid[idx[t]][idx[p]] += 1
    confusion = ConfusionMatrix(tuple(tuple(row) for row in grid))

    degenerate: list[str] = []

    n_attacks = sum(1 for t in truth if t != "Normal")
    detected = sum(
        1 for t, p in zip(truth, predicted) if t != "Normal" and p != "Normal"
    )
    if n_attacks:
        detection_rate = detected / n_attacks
    else:
        detection_rate = 0.0
        degenerate.append("detection_rate")

    n_normal = len(truth) - n_attacks
    false_alarms = sum(
        1 for t, p in zip(truth, predicted) if t == "Normal" and p != "Normal"
    )
    if n_normal:
        false_alarm_rate = false_alarms / n_normal
    else:
        false_alarm_rate = 0.0
        degenerate.append("false_alarm_rate")

    recall: dict[str, float] = {}
    for c in CATEGORIES:
        i = idx[c]
        denom = sum(grid[i])
        if denom:
            recall[c] = grid[i][i] / denom
        else:
            recall[c] = 0.0
            degenerate.append(f"recall:{c}")

    return EvaluationReport(
        source,
        len(truth),
        detection_rate,
        false_alarm_rate,
        recall,
        confusion,
        tuple(degenerate),
    )


def report_to_jsonable(report: EvaluationReport) -> dict:
    return {
        "source": report.source,
        "n_records": report.n_records,
        "detection_rate": report.detection_rate,
        "false_alarm_rate": report.false_alarm_rate,
        "per_category_recall": dict(report.per_category_recall),
        "confusion": {
            "categories": list(CATEGORIES),
            "counts": [list(row) for row in report.confusion.counts],
        },
        "degenerate": list(report.degenerate),
    }


def report_from_jsonable(data: Mapping) -> EvaluationReport:
    return EvaluationReport(
        str(data["source"]),
        int(data["n_records"]),
        float(data["detection_rate"]),
        float(data["false_alarm_rate"]),
        {c: float(v) for c, v in data["per_category_recall"].items()},
        ConfusionMatrix(tuple(tuple(int(x) for x in row) for row in data["confusion"]["counts"])),
        tuple(data["degenerate"]),
    )


def write_eval_report(report: EvaluationReport, sink: str | Path | TextIO) -> None:
    text = json.dumps(report_to_jsonable(report), sort_keys=True, separators=(",", ":"))
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text + "\n", encoding="utf-8")
    else:
        sink.write(text + "\n")


def read_eval_report(source: str | Path | TextIO) -> EvaluationReport:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    return report_from_jsonable(json.loads(text))


def write_verdicts(verdicts: Sequence[Verdict], sink: str | Path | TextIO) -> None:
    """One line per record: index, verdict category, sid or '-'."""

    def _emit(fh: TextIO) -> None:
        for index, category, sid in verdicts:
            sid_s = "-" if sid is None else str(sid)
            fh.write(f"{index}\t{category}\t{sid_s}\n")

    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            _emit(fh)
    else:
        _emit(sink)


def read_verdicts(source: str | Path | TextIO | Iterable[str]) -> list[Verdict]:
    """Inverse of write_verdicts."""
    if isinstance(source, (str, Path)):
        lines: Iterable[str] = Path(source).read_text(encoding="utf-8").splitlines()
    elif hasattr(source, "read"):
        lines = source.read().splitlines()  # type: ignore[union-attr]
    else:
        lines = source
    out: list[Verdict] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"verdict line {lineno}: expected 3 fields")
        try:
            index = int(parts[0])
        except ValueError:
            raise ParseError(f"verdict line {lineno}: bad index {parts[0]!r}") from None
        category = parts[1]
        if category not in CATEGORIES:
            raise ParseError(f"verdict line {lineno}: unknown category {category!r}")
        if parts[2] == "-":
            sid: int | None = None
        else:
            try:
                sid = int(parts[2])
            except ValueError:
                raise ParseError(f"verdict line {lineno}: bad sid {parts[2]!r}") from None
        out.append((index, category, sid))
    return out


def comparison_table(reports: Sequence[EvaluationReport]) -> str:
    """Tab-separated side-by-side table of evaluation reports."""
    header = [
        "source",
        "n_records",
        "detection_rate",
        "false_alarm_rate",
        *(f"recall_{c}" for c in CATEGORIES),
    ]
    lines = ["\t".join(header)]
    for r in reports:
        row = [
            r.source,
            str(r.n_records),
            f"{r.detection_rate:.4f}",
            f"{r.false_alarm_rate:.4f}",
            *(f"{r.per_category_recall[c]:.4f}" for c in CATEGORIES),
        ]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
