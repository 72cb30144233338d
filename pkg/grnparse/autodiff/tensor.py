"""Dense float64 tensors with reverse-mode differentiation.

Each forward op creates its result through :func:`make_result`, which attaches a
:class:`Node` holding the op name, the inputs and a closure returning the input
adjoints. :func:`backward` orders the nodes reachable from a scalar loss
topologically and replays the closures in reverse::

    x = Tensor(np.ones(3), requires_grad=True)
    loss = ops.total(ops.mul(x, x))
    backward(loss)  # x.grad == 2 * x.data

:func:`trace` additionally records every node in execution order, and
:func:`scope` tags nodes with a dotted stage name; tests use both to inspect
the structure of a forward pass.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as nty

from grnparse.errors import ContractViolation, NumericError

__all__ = [
    "Array",
    "ComputationRecord",
    "Node",
    "Tensor",
    "backward",
    "grad_enabled",
    "make_result",
    "no_grad",
    "scope",
    "trace",
]

Array = nty.NDArray[np.float64]
BackwardFn = Callable[[Array], Sequence["Array | None"]]

_TRACE: ContextVar[ComputationRecord | None] = ContextVar("_TRACE", default=None)
_SCOPE: ContextVar[str] = ContextVar("_SCOPE", default="")
_GRAD: ContextVar[bool] = ContextVar("_GRAD", default=True)


class Tensor:
    """n-dimensional float64 array that can take part in differentiation.

    Args:
        data: values; copied into a C-contiguous float64 array.
        requires_grad: marks a leaf whose ``grad`` is populated by
            :func:`backward`.
        name: optional label, used in error messages and reports.
    """

    __slots__ = ("data", "requires_grad", "grad", "node", "name")

    def __init__(
        self,
        data: nty.ArrayLike,
        requires_grad: bool = False,
        name: str | None = None,
    ) -> None:
        self.data: Array = np.array(data, dtype=np.float64, order="C")
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self.node: Node | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def tracked(self) -> bool:
        """Whether adjoints have to flow into this tensor."""
        return self.requires_grad or self.node is not None

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractViolation(f"item() needs one element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> Array:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass(eq=False)
class Node:
    """One executed operation."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn
    scope: str = ""
    saved: dict[str, Any] = field(default_factory=dict)


class ComputationRecord:
    """Nodes in an order where every producer precedes its consumers."""

    def __init__(self, nodes: list[Node] | None = None) -> None:
        self.nodes: list[Node] = nodes if nodes is not None else []

    def __iter__(self) -> Iterator[Node]:
        return iter(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, index: int) -> Node:
        return self.nodes[index]

    @property
    def ops(self) -> list[str]:
        return [node.op for node in self.nodes]

    def find(self, op: str, scope_prefix: str = "") -> list[int]:
        """Returns positions of ``op`` nodes whose scope starts with the prefix."""
        return [
            i
            for i, node in enumerate(self.nodes)
            if node.op == op and node.scope.startswith(scope_prefix)
        ]


@contextmanager
def trace() -> Iterator[ComputationRecord]:
    """Records every node created inside the block, in execution order."""
    record = ComputationRecord()
    token = _TRACE.set(record)
    try:
        yield record
    finally:
        _TRACE.reset(token)


@contextmanager
def scope(name: str) -> Iterator[None]:
    """Tags nodes created inside the block with ``name`` (nested with dots)."""
    outer = _SCOPE.get()
    token = _SCOPE.set(f"{outer}.{name}" if outer else name)
    try:
        yield
    finally:
        _SCOPE.reset(token)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disables graph construction, for inference on frozen parameters."""
    token = _GRAD.set(False)
    try:
        yield
    finally:
        _GRAD.reset(token)


def grad_enabled() -> bool:
    return _GRAD.get()


def make_result(
    op: str,
    data: Array,
    inputs: Sequence[Tensor],
    backward_fn: BackwardFn,
    **saved: Any,
) -> Tensor:
    """Wraps the output of a forward op and records how to differentiate it."""
    if not np.all(np.isfinite(data)):
        raise NumericError(f"{op} produced non-finite values")
    out = Tensor(data)
    record = _TRACE.get()
    needs_node = _GRAD.get() and any(t.tracked for t in inputs)
    if needs_node or record is not None:
        node = Node(op, tuple(inputs), out, backward_fn, _SCOPE.get(), dict(saved))
        if needs_node:
            out.node = node
        if record is not None:
            record.nodes.append(node)
    return out


def _topological_order(loss: Tensor) -> list[Node]:
    order: list[Node] = []
    visited: set[int] = set()
    if loss.node is None:
        return order
    stack: list[tuple[Node, bool]] = [(loss.node, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.inputs:
            if parent.node is not None and id(parent.node) not in visited:
                stack.append((parent.node, False))
    return order


def backward(loss: Tensor) -> ComputationRecord:
    """Accumulates d(loss)/d(leaf) into ``grad`` of every reachable leaf.

    Leaf gradients accumulate across calls; reset them with
    :meth:`Tensor.zero_grad` between independent losses.

    Returns:
        The replayed record, producers first.
    """
    if loss.ndim != 0:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _topological_order(loss)
    if loss.requires_grad and loss.node is None:
        one = np.ones((), dtype=np.float64)
        loss.grad = one if loss.grad is None else loss.grad + one
        return ComputationRecord(order)

    adjoints: dict[int, Array] = {id(loss): np.ones((), dtype=np.float64)}
    for node in reversed(order):
        upstream = adjoints.pop(id(node.output), None)
        if upstream is None:
            continue
        for parent, grad in zip(node.inputs, node.backward(upstream)):
            if grad is None or not parent.tracked:
                continue
            if parent.node is None:
                parent.grad = grad.copy() if parent.grad is None else parent.grad + grad
            elif id(parent) in adjoints:
                adjoints[id(parent)] = adjoints[id(parent)] + grad
            else:
                adjoints[id(parent)] = grad
    return ComputationRecord(order)
