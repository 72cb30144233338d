"""Local consistency module.

Pixels of ``F [c'×w'×h']`` are projected onto ``c`` graph nodes, so relations
between all pixels are reasoned about at ``O(c²d)`` cost instead of pairwise::

    X_l = Ω_l1 × reshape(F, [c'×(w'h')]) × Ω_l2            [c×d]
    A_l = rowsoftmax(X_l·X_lᵀ)
    Z_l = relu(A_l·X_l·W_l)
    θ_l = softmax(GAP(Z_l + α·Z_g))        (α·Z_g only with global assistance)
    F_rectified = lift(θ_l) ⊙ F

``lift`` maps the ``c`` node weights onto the ``c'`` feature channels with the
transposed channel projection, ``Ω_l1ᵀ·θ_l``; with ``c == c'`` the identity
lift is available.
"""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass
from typing import Literal

import numpy as np

from grnparse.autodiff import ops
from grnparse.autodiff.tensor import Tensor, scope
from grnparse.errors import ConfigError, ContractViolation
from grnparse.graph.core import GraphModel, data_adjacency, graph_convolve
from grnparse.graph.gsm import gsm_weights

__all__ = [
    "LcmOutput",
    "LcmParams",
    "init_lcm",
    "lcm_forward",
    "lcm_weights",
    "lift_weights",
    "project_pixels_to_graph",
]

Lift = Literal["projection", "identity"]


@dataclass
class LcmParams:
    """Trainable tensors of the local consistency module.

    Attributes:
        omega_l1: channel projection [c×c'].
        omega_l2: spatial projection [(w'·h')×d].
        W_l: graph weights [d×d].
        alpha: weight of the global assistance, a fixed hyper-parameter.
        lift: how node weights reach the feature channels.
    """

    omega_l1: Tensor
    omega_l2: Tensor
    W_l: Tensor
    alpha: float = 1.0
    lift: Lift = "projection"

    def __post_init__(self) -> None:
        d = self.omega_l2.shape[1] if self.omega_l2.ndim == 2 else -1
        ranks = (self.omega_l1.ndim, self.omega_l2.ndim)
        if ranks != (2, 2) or self.W_l.shape != (d, d):
            raise ContractViolation(
                f"LCM shapes do not conform: omega_l1 {self.omega_l1.shape}, "
                f"omega_l2 {self.omega_l2.shape}, W_l {self.W_l.shape}"
            )
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ConfigError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.lift == "identity" and self.c != self.c_prime:
            raise ConfigError(
                f"identity lift needs c == c', got c={self.c}, c'={self.c_prime}"
            )

    @property
    def c(self) -> int:
        return self.omega_l1.shape[0]

    @property
    def c_prime(self) -> int:
        return self.omega_l1.shape[1]

    @property
    def d(self) -> int:
        return self.omega_l2.shape[1]

    @property
    def spatial(self) -> int:
        return self.omega_l2.shape[0]

    def named_parameters(self, prefix: str = "lcm") -> Iterator[tuple[str, Tensor]]:
        for name in ("omega_l1", "omega_l2", "W_l"):
            yield f"{prefix}.{name}", getattr(self, name)


def init_lcm(
    c: int,
    c_prime: int,
    spatial: int,
    d: int,
    rng: np.random.Generator,
    alpha: float = 1.0,
    lift: Lift = "projection",
) -> LcmParams:
    def _uniform(shape: tuple[int, int], fan_in: int) -> Tensor:
        bound = 1 / np.sqrt(fan_in)
        return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

    return LcmParams(
        omega_l1=_uniform((c, c_prime), c_prime),
        omega_l2=_uniform((spatial, d), spatial),
        W_l=_uniform((d, d), d),
        alpha=alpha,
        lift=lift,
    )


def project_pixels_to_graph(F: Tensor, p: LcmParams) -> GraphModel:
    """``X_l = Ω_l1 × φ_l(F) × Ω_l2`` with the similarity adjacency."""
    if F.ndim != 3 or F.shape[0] != p.c_prime:
        raise ContractViolation(f"F must have {p.c_prime} channels, got {F.shape}")
    c_prime, w, h = F.shape
    if w * h != p.spatial:
        raise ContractViolation(
            f"F spatial size {w}×{h} does not match omega_l2 rows {p.spatial}"
        )
    flat = ops.reshape(F, (c_prime, w * h))
    X = ops.matmul(ops.matmul(p.omega_l1, flat), p.omega_l2)
    return GraphModel(X, data_adjacency(X), "low")


def lcm_weights(Z_l: Tensor, alpha: float, Z_g: Tensor | None = None) -> Tensor:
    """Node weights, with global assistance when ``Z_g`` is given."""
    if Z_g is None:
        return gsm_weights(Z_l)
    if Z_g.shape != Z_l.shape:
        raise ContractViolation(f"Z_g {Z_g.shape} does not match Z_l {Z_l.shape}")
    return gsm_weights(ops.add(Z_l, ops.scale(Z_g, alpha)))


def lift_weights(theta_l: Tensor, p: LcmParams) -> Tensor:
    """Maps ``c`` node weights onto the ``c'`` channels of the feature map."""
    if p.lift == "identity":
        return theta_l
    return ops.reshape(
        ops.matmul(ops.transpose(p.omega_l1), ops.reshape(theta_l, (p.c, 1))),
        (p.c_prime,),
    )


@dataclass(frozen=True)
class LcmOutput:
    F_rectified: Tensor
    Z_l: Tensor
    theta_l: Tensor
    theta_lifted: Tensor
    graph: GraphModel


def lcm_forward(F: Tensor, p: LcmParams, Z_g: Tensor | None = None) -> LcmOutput:
    """Local consistency module on one feature map."""
    with scope("lcm"):
        graph = project_pixels_to_graph(F, p)
        Z_l = graph_convolve(graph, p.W_l)
        theta_l = lcm_weights(Z_l, p.alpha, Z_g)
        lifted = lift_weights(theta_l, p)
        rectified = ops.channel_scale(lifted, F)
    return LcmOutput(rectified, Z_l, theta_l, lifted, graph)
