"""Central finite-difference gradient checking."""

from __future__ import annotations

from collections.abc import Callable, Mapping

import numpy as np
from pydantic import BaseModel, Field

from grnparse.autodiff.tensor import ComputationRecord, Tensor, backward, no_grad, trace
from grnparse.config import logger
from grnparse.errors import CheckError, ContractViolation

__all__ = ["GradCheckReport", "grad_check", "relative_error"]


class GradCheckReport(BaseModel):
    """Per-parameter outcome of :func:`grad_check`.

    Parameters:
        errors: max relative error over the checked entries of each parameter.
        checked: number of entries compared.
        kinks: entries skipped because a perturbation crossed a ReLU kink.
    """

    errors: dict[str, float] = Field(default_factory=dict)
    checked: dict[str, int] = Field(default_factory=dict)
    kinks: dict[str, int] = Field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_error <= tolerance

    def lines(self) -> list[str]:
        return [
            f"{name}\t{self.errors[name]:.3e}\tchecked={self.checked[name]}"
            f"\tkinks={self.kinks[name]}"
            for name in self.errors
        ]


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    """``|a - n| / max(floor, |a| + |n|)``."""
    return abs(analytic - numeric) / max(floor, abs(analytic) + abs(numeric))


def _relu_signature(record: ComputationRecord) -> list[np.ndarray]:
    return [node.saved["mask"] for node in record if node.op == "relu"]


def _same_signature(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    h: float = 1e-5,
    max_entries: int | None = None,
    seed: int = 0,
    floor: float = 1e-8,
) -> GradCheckReport:
    """Compares backward gradients against central differences.

    Args:
        f: deterministic function of ``params`` returning a scalar tensor.
        params: the leaves to check; their ``grad`` is overwritten.
        h: finite-difference step.
        max_entries: check at most this many entries per parameter, drawn
            with ``seed``; ``None`` checks every entry.
        seed: sampling seed.
        floor: lower bound of the relative-error denominator.
    """
    for p in params.values():
        p.zero_grad()
        p.requires_grad = True
    with trace() as base_record:
        loss = f()
    if loss.ndim != 0:
        raise ContractViolation(f"grad_check needs a scalar function, got {loss.shape}")
    base_value = loss.item()
    base_signature = _relu_signature(base_record)
    backward(loss)
    with no_grad():
        repeat = f().item()
    if repeat != base_value:
        raise CheckError("function under check is not deterministic")

    rng = np.random.default_rng(seed)
    report = GradCheckReport()

    def _evaluate() -> tuple[float, bool]:
        with trace() as record, no_grad():
            value = f().item()
        return value, _same_signature(_relu_signature(record), base_signature)

    for name, p in params.items():
        analytic = p.grad if p.grad is not None else np.zeros(p.shape)
        flat = p.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        worst, kinks = 0.0, 0
        for i in indices:
            original = flat[i]
            flat[i] = original + h
            plus, plus_ok = _evaluate()
            flat[i] = original - h
            minus, minus_ok = _evaluate()
            flat[i] = original
            if not (plus_ok and minus_ok):
                kinks += 1
                continue
            numeric = (plus - minus) / (2 * h)
            err = relative_error(float(analytic.reshape(-1)[i]), numeric, floor)
            worst = max(worst, err)
        report.errors[name] = worst
        report.checked[name] = int(indices.size) - kinks
        report.kinks[name] = kinks
        if kinks:
            logger.warning(f"{name}: skipped {kinks} entries at ReLU kinks")
        logger.debug(f"{name}: max rel err {worst:.3e}")
    return report
