import numpy as np
import pytest

from grnparse.errors import ContractViolation, DataError
from grnparse.metrics import (
    ConfusionMatrix,
    accumulate,
    confusion_of,
    report,
    write_metrics_tsv,
)

GT = np.array([[0, 0, 1, 1], [2, 2, 0, 0]])
PRED = np.array([[0, 1, 1, 1], [2, 0, 0, 0]])


@pytest.fixture
def cm() -> ConfusionMatrix:
    return confusion_of([PRED], [GT], 3)


def test_confusion_counts(cm: ConfusionMatrix) -> None:
    np.testing.assert_array_equal(cm.counts, [[3, 1, 0], [0, 2, 0], [1, 0, 1]])
    assert cm.total == 8


def test_lip_scores(cm: ConfusionMatrix) -> None:
    r = report(cm, "lip")
    assert r.pixel_accuracy == pytest.approx(0.75)
    assert r.iou == pytest.approx([0.6, 2 / 3, 0.5])
    assert r.mean_iou == pytest.approx((0.6 + 2 / 3 + 0.5) / 3)
    assert r.mean_accuracy == pytest.approx((0.75 + 1 + 0.5) / 3)
    assert r.foreground_accuracy is None
    assert set(r.aggregates()) == {"pixel_accuracy", "mean_accuracy", "mean_iou"}


def test_atr_scores(cm: ConfusionMatrix) -> None:
    r = report(cm, "atr")
    assert r.foreground_accuracy == pytest.approx(0.75)
    assert r.avg_precision == pytest.approx((2 / 3 + 1) / 2)
    assert r.avg_recall == pytest.approx(0.75)
    assert r.avg_f1 == pytest.approx((0.8 + 2 / 3) / 2)
    assert len(r.aggregates()) == 7


def test_absent_classes_are_skipped() -> None:
    r = report(confusion_of([PRED], [GT], 4), "lip")
    assert r.iou[3] is None
    assert r.mean_iou == pytest.approx((0.6 + 2 / 3 + 0.5) / 3)


def test_perfect_prediction() -> None:
    r = report(confusion_of([GT], [GT], 3), "atr")
    assert r.pixel_accuracy == r.mean_iou == r.avg_f1 == 1.0


def test_background_only() -> None:
    zeros = np.zeros((2, 2), dtype=int)
    r = report(confusion_of([zeros], [zeros], 3), "atr")
    assert r.iou == [1.0, None, None]
    assert r.foreground_accuracy == 1.0
    assert r.avg_precision == r.avg_recall == r.avg_f1 == 1.0


def test_accumulate_and_merge(cm: ConfusionMatrix) -> None:
    doubled = accumulate(cm, PRED, GT)
    assert cm.total == 8
    assert doubled.total == 16
    np.testing.assert_array_equal(cm.merge(cm).counts, doubled.counts)
    assert report(doubled).mean_iou == pytest.approx(report(cm).mean_iou)
    with pytest.raises(ContractViolation):
        cm.merge(ConfusionMatrix(4))


def test_confusion_errors() -> None:
    cm = ConfusionMatrix(3)
    with pytest.raises(ContractViolation):
        report(cm)
    with pytest.raises(ContractViolation):
        cm.update(PRED, GT[:, :2])
    with pytest.raises(DataError):
        cm.update(PRED + 1, GT)
    with pytest.raises(ContractViolation):
        ConfusionMatrix(2, [[1, -1], [0, 0]])
    with pytest.raises(ValueError):
        confusion_of([PRED, PRED], [GT], 3)


def test_metric_rows_and_tsv(tmp_path, cm: ConfusionMatrix) -> None:
    rows = report(cm, "lip").rows("baseline", ["background", "head", "torso"])
    assert rows[:3] == [
        ("baseline", "iou", "background", pytest.approx(0.6)),
        ("baseline", "iou", "head", pytest.approx(2 / 3)),
        ("baseline", "iou", "torso", pytest.approx(0.5)),
    ]
    path = write_metrics_tsv(tmp_path / "metrics.tsv", rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "stage\tmetric\tcategory\tvalue"
    assert lines[2] == "baseline\tiou\thead\t0.666667"
    assert lines[-1] == "baseline\tmean_iou\tall\t0.588889"
