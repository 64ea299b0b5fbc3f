"""Regression and classification metrics, and the actual/predicted/error table."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyInput, LengthMismatch, SingleClass
from .preprocess import pearson_r


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if a.shape != p.shape:
        raise LengthMismatch(f"{a.size} actual vs {p.size} predicted values")
    if a.size == 0:
        raise EmptyInput("metric of empty sequences")
    return a, p


def mae(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def rmse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return math.sqrt(float(np.mean((a - p) ** 2)))


def r_squared(actual, predicted) -> float:
    """1 - SSE/SST; 0 when the actual values are constant."""
    a, p = _pair(actual, predicted)
    sst = float(((a - a.mean()) ** 2).sum())
    if sst == 0.0:
        return 0.0
    return 1.0 - float(((a - p) ** 2).sum()) / sst


def midranks(values) -> np.ndarray:
    """1-based ranks with ties sharing the average of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="mergesort")
    sv = v[order]
    ranks = np.empty(v.size)
    start = 0
    # group boundaries of equal sorted values
    bounds = np.flatnonzero(np.diff(sv) != 0) + 1
    for end in [*bounds, v.size]:
        ranks[order[start:end]] = 0.5 * (start + 1 + end)
        start = end
    return ranks


def roc_auc(labels, scores) -> float:
    """Mann-Whitney AUC by rank summation; tied scores count one half."""
    y = np.asarray(labels).astype(bool).ravel()
    s = np.asarray(scores, dtype=np.float64).ravel()
    if y.shape != s.shape:
        raise LengthMismatch(f"{y.size} labels vs {s.size} scores")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC-AUC needs both positive and negative labels")
    rank_sum = float(midranks(s)[y].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def classification_at_threshold(actual_kw, predicted_kw, threshold_kw: float = 0.0):
    """(precision, recall, f1) after labelling both sides as ``value > threshold_kw``."""
    a, p = _pair(actual_kw, predicted_kw)
    ya = a > threshold_kw
    yp = p > threshold_kw
    tp = int(np.sum(ya & yp))
    fp = int(np.sum(~ya & yp))
    fn = int(np.sum(ya & ~yp))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class EvaluationReport:
    mae: float
    rmse: float
    pearson_r: float
    r_squared: float
    auc: float
    precision: float
    recall: float
    f1: float
    n: int
    threshold_kw: float

    def rows(self) -> list[tuple[str, float]]:
        return list(asdict(self).items())


def evaluate(actual, predicted, threshold_kw: float = 0.0) -> EvaluationReport:
    a, p = _pair(actual, predicted)
    precision, recall, f1 = classification_at_threshold(a, p, threshold_kw)
    return EvaluationReport(
        mae=mae(a, p),
        rmse=rmse(a, p),
        pearson_r=pearson_r(a, p) if a.size >= 2 else 0.0,
        r_squared=r_squared(a, p),
        auc=roc_auc(a > threshold_kw, p),
        precision=precision,
        recall=recall,
        f1=f1,
        n=int(a.size),
        threshold_kw=float(threshold_kw),
    )


def format_kw(value: float) -> str:
    """Three-decimal rendering; negative zero prints as 0.000."""
    text = f"{value:.3f}"
    return "0.000" if text == "-0.000" else text


@dataclass(frozen=True)
class ErrorTable:
    ids: tuple
    actual: np.ndarray
    predicted: np.ndarray

    @property
    def error(self) -> np.ndarray:
        return self.actual - self.predicted

    def __len__(self) -> int:
        return len(self.ids)

    def rows(self):
        return list(zip(self.ids, self.actual.tolist(), self.predicted.tolist(), self.error.tolist()))

    def formatted_rows(self) -> list[tuple[str, str, str, str]]:
        return [(str(i), format_kw(a), format_kw(p), format_kw(e)) for i, a, p, e in self.rows()]

    def render(self) -> str:
        """Right-aligned text in the column order id, Actual, Predicted, Error.

        Column widths follow the values, so a header label wider than its
        column overhangs to the left instead of padding every row.
        """
        header = ("", "Actual", "Predicted", "Error")
        body = self.formatted_rows()
        widths = [max([len(r[c]) for r in body], default=len(header[c])) for c in range(4)]
        lines = ["  ".join(v.rjust(w) for v, w in zip(header, widths))]
        for r in body:
            lines.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
        return "\n".join(lines) + "\n"


def error_table(ids, actual, predicted) -> ErrorTable:
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    ids = tuple(ids)
    if not (len(ids) == a.size == p.size):
        raise LengthMismatch(f"ids/actual/predicted lengths {len(ids)}/{a.size}/{p.size}")
    return ErrorTable(ids, a, p)
