"""Segmentation metrics under the LIP and ATR protocols.

All scores come from one confusion matrix with ground truth in rows and
predictions in columns. Classes absent from both ground truth and prediction
are left out of every mean.
"""

from __future__ import annotations

import pathlib
from collections.abc import Iterable, Sequence
from typing import Literal

import numpy as np
import numpy.typing as nty
from pydantic import BaseModel

from grnparse.errors import ContractViolation, DataError

__all__ = [
    "ConfusionMatrix",
    "MetricRow",
    "MetricsReport",
    "Protocol",
    "accumulate",
    "confusion_of",
    "report",
    "write_metrics_tsv",
]

Protocol = Literal["lip", "atr"]
MetricRow = tuple[str, str, str, float]
I64 = nty.NDArray[np.int64]
TSV_HEADER = "stage\tmetric\tcategory\tvalue\n"


class ConfusionMatrix:
    """Pixel counts ``counts[gt, pred]`` over ``c`` classes."""

    def __init__(self, c: int, counts: nty.ArrayLike | None = None) -> None:
        if c < 1:
            raise ContractViolation(f"confusion matrix needs c >= 1, got {c}")
        self.c = c
        self.counts = (
            np.zeros((c, c), dtype=np.int64)
            if counts is None
            else np.array(counts, dtype=np.int64)
        )
        if self.counts.shape != (c, c) or (self.counts < 0).any():
            raise ContractViolation(f"counts must be non-negative [{c}×{c}]")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def update(self, pred: nty.ArrayLike, gt: nty.ArrayLike) -> ConfusionMatrix:
        """Adds one pair of label maps in place."""
        p, g = np.asarray(pred), np.asarray(gt)
        if p.shape != g.shape:
            raise ContractViolation(f"prediction {p.shape} and ground truth {g.shape} differ")
        if p.size == 0:
            raise ContractViolation("cannot accumulate empty label maps")
        for name, y in (("prediction", p), ("ground truth", g)):
            if y.min() < 0 or y.max() >= self.c:
                raise DataError(
                    f"{name} ids must lie in [0, {self.c}), got [{y.min()}, {y.max()}]"
                )
        index = self.c * g.astype(np.int64).ravel() + p.astype(np.int64).ravel()
        self.counts += np.bincount(index, minlength=self.c**2).reshape(self.c, self.c)
        return self

    def merge(self, other: ConfusionMatrix) -> ConfusionMatrix:
        if other.c != self.c:
            raise ContractViolation(f"cannot merge c={self.c} with c={other.c}")
        return ConfusionMatrix(self.c, self.counts + other.counts)

    def copy(self) -> ConfusionMatrix:
        return ConfusionMatrix(self.c, self.counts)


def accumulate(
    cm: ConfusionMatrix, pred: nty.ArrayLike, gt: nty.ArrayLike
) -> ConfusionMatrix:
    """Returns a new matrix with ``pred``/``gt`` counted; ``cm`` is unchanged."""
    return cm.copy().update(pred, gt)


def confusion_of(
    preds: Iterable[nty.ArrayLike], gts: Iterable[nty.ArrayLike], c: int
) -> ConfusionMatrix:
    cm = ConfusionMatrix(c)
    for pred, gt in zip(preds, gts, strict=True):
        cm.update(pred, gt)
    return cm


class MetricsReport(BaseModel):
    """Scores of one confusion matrix.

    Parameters:
        protocol: lip or atr.
        iou: per-class IoU, ``None`` for classes absent from both sides.
        pixel_accuracy: correct pixels over all pixels.
        mean_accuracy: mean recall over classes present in the ground truth.
        mean_iou: mean of the defined per-class IoUs.
        foreground_accuracy: accuracy over ground-truth foreground pixels (atr).
        avg_precision: mean precision over present foreground classes (atr).
        avg_recall: mean recall over present foreground classes (atr).
        avg_f1: mean F1 over present foreground classes (atr).
    """

    protocol: Protocol
    iou: list[float | None]
    pixel_accuracy: float
    mean_accuracy: float
    mean_iou: float
    foreground_accuracy: float | None = None
    avg_precision: float | None = None
    avg_recall: float | None = None
    avg_f1: float | None = None

    def aggregates(self) -> dict[str, float]:
        names = ["pixel_accuracy", "mean_accuracy", "mean_iou"]
        if self.protocol == "atr":
            names += ["foreground_accuracy", "avg_precision", "avg_recall", "avg_f1"]
        return {name: float(getattr(self, name)) for name in names}

    def rows(self, stage: str, names: Sequence[str]) -> list[MetricRow]:
        """Per-class IoU rows followed by aggregate rows."""
        rows: list[MetricRow] = [
            (stage, "iou", names[k], value)
            for k, value in enumerate(self.iou)
            if value is not None
        ]
        rows += [(stage, name, "all", v) for name, v in self.aggregates().items()]
        return rows


def _ratio(num: I64, den: I64) -> nty.NDArray[np.float64]:
    out = np.zeros(num.shape, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def report(cm: ConfusionMatrix, protocol: Protocol = "lip") -> MetricsReport:
    """Computes the scores of ``protocol`` from ``cm``."""
    if protocol not in ("lip", "atr"):
        raise ContractViolation(f"unknown protocol {protocol!r}")
    total = cm.total
    if total == 0:
        raise ContractViolation("cannot report on an empty confusion matrix")
    counts = cm.counts
    diag = np.diag(counts)
    rows, cols = counts.sum(axis=1), counts.sum(axis=0)
    present = (rows + cols) > 0
    union = rows + cols - diag
    iou = _ratio(diag, union)
    recall = _ratio(diag, rows)
    result = MetricsReport(
        protocol=protocol,
        iou=[float(iou[k]) if present[k] else None for k in range(cm.c)],
        pixel_accuracy=float(diag.sum() / total),
        mean_accuracy=float(recall[rows > 0].mean()),
        mean_iou=float(iou[present].mean()),
    )
    if protocol == "atr":
        fg_total = rows[1:].sum()
        precision = _ratio(diag, cols)
        denom = precision + recall
        f1 = np.zeros_like(denom)
        np.divide(2 * precision * recall, denom, out=f1, where=denom > 0)
        fg = present.copy()
        fg[0] = False
        fg_acc = float(diag[1:].sum() / fg_total) if fg_total else 1.0
        result.foreground_accuracy = fg_acc
        if fg.any():
            result.avg_precision = float(precision[fg].mean())
            result.avg_recall = float(recall[fg].mean())
            result.avg_f1 = float(f1[fg].mean())
        else:
            result.avg_precision = result.avg_recall = result.avg_f1 = 1.0
    return result


def write_metrics_tsv(
    path: str | pathlib.Path, rows: Iterable[MetricRow]
) -> pathlib.Path:
    """``stage<TAB>metric<TAB>category<TAB>value`` with six decimals."""
    path = pathlib.Path(path)
    lines = [TSV_HEADER]
    lines += [f"{s}\t{m}\t{cat}\t{v:.6f}\n" for s, m, cat, v in rows]
    path.write_text("".join(lines))
    return path


if __name__ == "__main__":
    gt = np.array([[0, 0, 1, 1]] * 4)
    pred = gt.copy()
    pred[0] = 1 - pred[0]
    print(report(confusion_of([pred], [gt], 2), "atr"))
