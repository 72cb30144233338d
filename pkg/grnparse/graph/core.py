"""Graph model value type and the graph-convolution primitive."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from grnparse.autodiff import ops
from grnparse.autodiff.tensor import Tensor
from grnparse.errors import ContractViolation, NumericError

__all__ = ["GraphModel", "data_adjacency", "graph_convolve", "symmetrize"]

Level = Literal["low", "high"]


@dataclass(frozen=True)
class GraphModel:
    """Node features ``X [n×d]`` and adjacency ``A [n×n]`` at one semantic level."""

    X: Tensor
    A: Tensor
    level: Level = "low"

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.A.ndim != 2:
            raise ContractViolation(
                f"graph needs X [n×d] and A [n×n], got {self.X.shape} and {self.A.shape}"
            )
        n = self.X.shape[0]
        if self.A.shape != (n, n):
            raise ContractViolation(f"adjacency {self.A.shape} does not fit {n} nodes")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def graph_convolve(
    g: GraphModel, W: Tensor, apply_nonlinearity: bool = True
) -> Tensor:
    """``relu(A·X·W)``, or ``A·X·W`` without the nonlinearity."""
    if W.ndim != 2 or W.shape[0] != g.d:
        raise ContractViolation(f"weights {W.shape} do not fit node features {g.X.shape}")
    z = ops.matmul(ops.matmul(g.A, g.X), W)
    return ops.relu(z) if apply_nonlinearity else z


def symmetrize(A: Tensor) -> Tensor:
    """``(A + Aᵀ) / 2``."""
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation(f"symmetrize needs a square matrix, got {A.shape}")
    return ops.scale(ops.add(A, ops.transpose(A)), 0.5)


def data_adjacency(X: Tensor) -> Tensor:
    """Row-wise softmax of the feature similarity ``X·Xᵀ``."""
    if X.ndim != 2 or X.shape[0] < 1:
        raise ContractViolation(f"data_adjacency needs X [n×d] with n >= 1, got {X.shape}")
    if not np.all(np.isfinite(X.data)):
        raise NumericError("data_adjacency received non-finite features")
    return ops.row_softmax(ops.matmul(X, ops.transpose(X)))
