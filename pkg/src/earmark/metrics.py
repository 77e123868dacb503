"""Binary confusion counts and recall / precision / F1 / accuracy.

Conventional definitions are used and printed as a footnote on every
report: recall = TP/(TP+FN), precision = TP/(TP+FP). Any 0/0 case yields
0.0 and is flagged as degenerate instead of raising.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ValidationError

REPORT_FOOTNOTE = "recall = TP/(TP+FN), precision = TP/(TP+FP), f1 = 2RP/(R+P)"


@dataclass
class ConfusionCounts:
    n_tp: int = 0
    n_fp: int = 0
    n_fn: int = 0
    n_tn: int = 0

    def __post_init__(self):
        if min(self.n_tp, self.n_fp, self.n_fn, self.n_tn) < 0:
            raise ValidationError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.n_tp + self.n_fp + self.n_fn + self.n_tn

    def merge(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.n_tp + other.n_tp, self.n_fp + other.n_fp,
                               self.n_fn + other.n_fn, self.n_tn + other.n_tn)


def accumulate(c: ConfusionCounts, predicted: int, actual: int) -> ConfusionCounts:
    """Return counts with the (predicted, actual) pair tallied; 1 = positive."""
    if predicted not in (0, 1) or actual not in (0, 1):
        raise ValidationError(f"labels must be binary, got ({predicted}, {actual})")
    return c.merge(ConfusionCounts(
        n_tp=int(predicted == 1 and actual == 1),
        n_fp=int(predicted == 1 and actual == 0),
        n_fn=int(predicted == 0 and actual == 1),
        n_tn=int(predicted == 0 and actual == 0),
    ))


def _ratio(num: int, den: int) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def recall(c: ConfusionCounts) -> float:
    return _ratio(c.n_tp, c.n_tp + c.n_fn)[0]


def precision(c: ConfusionCounts) -> float:
    return _ratio(c.n_tp, c.n_tp + c.n_fp)[0]


def f1_from_rates(r: float, p: float) -> float:
    """Harmonic mean 2RP/(R+P); 0.0 when both rates are zero."""
    if r + p == 0.0:
        return 0.0
    return 2.0 * r * p / (r + p)


def f1(c: ConfusionCounts) -> float:
    return f1_from_rates(recall(c), precision(c))


def accuracy(c: ConfusionCounts) -> float:
    return _ratio(c.n_tp + c.n_tn, c.total)[0]


def report(c: ConfusionCounts, model_name: str = "model") -> dict:
    """All metrics plus degenerate-denominator flags, JSON-friendly."""
    r, r_deg = _ratio(c.n_tp, c.n_tp + c.n_fn)
    p, p_deg = _ratio(c.n_tp, c.n_tp + c.n_fp)
    a, a_deg = _ratio(c.n_tp + c.n_tn, c.total)
    flags = [name for name, deg in (("recall", r_deg), ("precision", p_deg),
                                    ("accuracy", a_deg)) if deg]
    if r + p == 0.0:
        flags.append("f1")
    return {
        "model": model_name,
        "recall": r,
        "precision": p,
        "f1": f1_from_rates(r, p),
        "accuracy": a,
        "counts": {"tp": c.n_tp, "fp": c.n_fp, "fn": c.n_fn, "tn": c.n_tn},
        "degenerate_flags": flags,
    }


def format_table(reports: list[dict]) -> str:
    """Aligned text table, one row per report: Model / Recall / Precision / F1."""
    header = ("Model", "Recall", "Precision", "F1")
    rows = [(rep["model"], f"{100 * rep['recall']:.2f}%", f"{100 * rep['precision']:.2f}%",
             f"{100 * rep['f1']:.2f}%") for rep in reports]
    widths = [max(len(header[i]), *(len(row[i]) for row in rows)) for i in range(4)]
    lines = ["  ".join(header[i].ljust(widths[i]) for i in range(4))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(4)))
    flagged = sorted({f for rep in reports for f in rep["degenerate_flags"]})
    if flagged:
        lines.append(f"note: 0/0 denominators reported as 0.0 for: {', '.join(flagged)}")
    lines.append(f"note: {REPORT_FOOTNOTE}")
    return "\n".join(lines)


def format_json(reports: list[dict]) -> str:
    return json.dumps(reports if len(reports) != 1 else reports[0], indent=2, sort_keys=True)
