"""Differentiable tensor operations.

Every op checks its shapes and raises :class:`~grnparse.errors.ContractViolation`
naming them; there is no implicit broadcasting.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import numpy.typing as nty
from scipy.special import logsumexp  # type: ignore[import]

from grnparse.autodiff.tensor import Array, Tensor, make_result
from grnparse.errors import ContractViolation, DataError, NumericError

__all__ = [
    "add",
    "bias_add",
    "channel_scale",
    "cross_entropy_pixelwise",
    "gap",
    "matmul",
    "mul",
    "project_rows",
    "relu",
    "reshape",
    "row_softmax",
    "scale",
    "softmax",
    "total",
    "transpose",
]


def _expect_rank(t: Tensor, rank: int, op: str) -> None:
    if t.ndim != rank:
        raise ContractViolation(f"{op} expects a rank-{rank} tensor, got shape {t.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product ``a [m×k] × b [k×n]``."""
    _expect_rank(a, 2, "matmul")
    _expect_rank(b, 2, "matmul")
    if a.shape[1] != b.shape[0]:
        raise ContractViolation(f"matmul inner dimensions differ: {a.shape} × {b.shape}")

    def _backward(g: Array) -> tuple[Array, Array]:
        return g @ b.data.T, a.data.T @ g

    return make_result("matmul", a.data @ b.data, (a, b), _backward)


def transpose(a: Tensor) -> Tensor:
    _expect_rank(a, 2, "transpose")
    return make_result(
        "transpose", a.data.T.copy(), (a,), lambda g: (g.T.copy(),)
    )


def reshape(t: Tensor, new_shape: Sequence[int]) -> Tensor:
    """Row-major reshape; the element count must be preserved."""
    new_shape = tuple(int(s) for s in new_shape)
    if int(np.prod(new_shape)) != t.data.size or any(s <= 0 for s in new_shape):
        raise ContractViolation(f"cannot reshape {t.shape} into {new_shape}")
    old_shape = t.shape
    return make_result(
        "reshape",
        t.data.reshape(new_shape).copy(),
        (t,),
        lambda g: (g.reshape(old_shape),),
    )


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ContractViolation(f"add needs equal shapes, got {a.shape} and {b.shape}")
    return make_result("add", a.data + b.data, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise product of equally shaped tensors."""
    if a.shape != b.shape:
        raise ContractViolation(f"mul needs equal shapes, got {a.shape} and {b.shape}")
    return make_result(
        "mul", a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data)
    )


def scale(t: Tensor, factor: float) -> Tensor:
    """Multiplies by a constant."""
    return make_result("scale", t.data * factor, (t,), lambda g: (g * factor,))


def total(t: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    shape = t.shape
    return make_result(
        "total",
        np.array(t.data.sum()),
        (t,),
        lambda g: (np.full(shape, float(g)),),
    )


def relu(t: Tensor) -> Tensor:
    mask = t.data > 0
    return make_result(
        "relu", np.where(mask, t.data, 0.0), (t,), lambda g: (g * mask,), mask=mask
    )


def _softmax_rows(x: Array) -> Array:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_finite(t: Tensor, op: str) -> None:
    if not np.all(np.isfinite(t.data)):
        raise NumericError(f"{op} received non-finite values")


def softmax(v: Tensor) -> Tensor:
    """Softmax of a vector, computed with max-subtraction."""
    _expect_rank(v, 1, "softmax")
    if v.shape[0] < 1:
        raise ContractViolation("softmax needs at least one element")
    _check_finite(v, "softmax")
    y = _softmax_rows(v.data)

    def _backward(g: Array) -> tuple[Array]:
        return (y * (g - np.dot(g, y)),)

    return make_result("softmax", y, (v,), _backward)


def row_softmax(m: Tensor) -> Tensor:
    """Softmax applied independently to every row of a matrix."""
    _expect_rank(m, 2, "row_softmax")
    _check_finite(m, "row_softmax")
    y = _softmax_rows(m.data)

    def _backward(g: Array) -> tuple[Array]:
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return make_result("row_softmax", y, (m,), _backward)


def gap(m: Tensor) -> Tensor:
    """Global average pooling: mean of every row of ``m [c×d]``."""
    _expect_rank(m, 2, "gap")
    c, d = m.shape
    if d < 1:
        raise ContractViolation(f"gap needs d >= 1, got shape {m.shape}")
    return make_result(
        "gap",
        m.data.mean(axis=1),
        (m,),
        lambda g: (np.repeat(g[:, None] / d, d, axis=1),),
    )


def channel_scale(weights: Tensor, t: Tensor) -> Tensor:
    """Multiplies slice ``t[i]`` by ``weights[i]``."""
    _expect_rank(weights, 1, "channel_scale")
    if t.ndim < 1 or t.shape[0] != weights.shape[0]:
        raise ContractViolation(
            f"channel_scale needs {weights.shape[0]} leading channels, got {t.shape}"
        )
    expand = (slice(None),) + (None,) * (t.ndim - 1)
    w = weights.data[expand]
    other_axes = tuple(range(1, t.ndim))

    def _backward(g: Array) -> tuple[Array, Array]:
        return (g * t.data).sum(axis=other_axes), g * w

    return make_result("channel_scale", w * t.data, (weights, t), _backward)


def bias_add(t: Tensor, bias: Tensor) -> Tensor:
    """Adds ``bias[i]`` to every element of slice ``t[i]``."""
    _expect_rank(bias, 1, "bias_add")
    if t.ndim < 1 or t.shape[0] != bias.shape[0]:
        raise ContractViolation(
            f"bias_add needs {bias.shape[0]} leading channels, got {t.shape}"
        )
    expand = (slice(None),) + (None,) * (t.ndim - 1)
    other_axes = tuple(range(1, t.ndim))
    return make_result(
        "bias_add",
        t.data + bias.data[expand],
        (t, bias),
        lambda g: (g, g.sum(axis=other_axes)),
    )


def project_rows(x: Tensor, omega: Tensor) -> Tensor:
    """Row ``i`` of ``x [c×n]`` times its own matrix ``omega[i] [n×d]``."""
    _expect_rank(x, 2, "project_rows")
    _expect_rank(omega, 3, "project_rows")
    if omega.shape[:2] != x.shape:
        raise ContractViolation(
            f"project_rows needs omega [c×n×d] matching x {x.shape}, got {omega.shape}"
        )

    def _backward(g: Array) -> tuple[Array, Array]:
        return (
            np.einsum("cd,cnd->cn", g, omega.data),
            np.einsum("cn,cd->cnd", x.data, g),
        )

    out = np.einsum("cn,cnd->cd", x.data, omega.data)
    return make_result("project_rows", out, (x, omega), _backward)


def cross_entropy_pixelwise(logits: Tensor, labels: nty.ArrayLike) -> Tensor:
    """Mean over pixels of ``-log softmax(logits)[label]``.

    Args:
        logits: class scores [c×H×W].
        labels: integer class ids [H×W] in ``[0, c)``.
    """
    _expect_rank(logits, 3, "cross_entropy_pixelwise")
    y = np.asarray(labels)
    c = logits.shape[0]
    if y.shape != logits.shape[1:]:
        raise ContractViolation(
            f"labels {y.shape} do not match logits spatial size {logits.shape[1:]}"
        )
    if y.size and (y.min() < 0 or y.max() >= c):
        raise DataError(f"label ids must lie in [0, {c}), got [{y.min()}, {y.max()}]")
    y = y.astype(np.intp)
    n = y.size
    log_z = logsumexp(logits.data, axis=0)
    picked = np.take_along_axis(logits.data, y[None], axis=0)[0]
    loss = np.array((log_z - picked).sum() / n)

    def _backward(g: Array) -> tuple[Array]:
        grad = np.exp(logits.data - log_z[None])
        np.put_along_axis(
            grad, y[None], np.take_along_axis(grad, y[None], axis=0) - 1.0, axis=0
        )
        return (grad * (float(g) / n),)

    return make_result("cross_entropy", loss, (logits,), _backward)
