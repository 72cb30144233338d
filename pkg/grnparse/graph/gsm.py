"""Global structure module.

Category channels of ``F_head [c×w×h]`` become the nodes of a low-level graph,
are pooled into ``n_high`` coarse body-region nodes by a trainable soft
assignment, reasoned over, decoupled back to the categories and turned into
channel weights::

    X_low   = [vec(F_i) × Ω_i]_i                     project_to_graph
    Z_low   = relu(A_low · X_low · W_low)
    C_agg   = rowsoftmax(A_low · X_low · V_low)      compute_aggregation
    X_high  = C_aggᵀ · X_low,  A_high = C_aggᵀ · A_low · C_agg
    Z_high  = relu(A_high · X_high · W_high)
    C_dec   = rowsoftmax(A_high · X_high · V_high)   compute_decoupling
    Ẑ_low   = C_decᵀ · Z_high, Â_low = C_decᵀ · A_high · C_dec
    Z_g     = Ẑ_low + Z_low
    θ_g     = softmax(GAP(Z_g)),  F_rectified = θ_g ⊙ F_head
"""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from grnparse.autodiff import ops
from grnparse.autodiff.tensor import Tensor, scope
from grnparse.errors import ContractViolation
from grnparse.graph.core import GraphModel, graph_convolve, symmetrize

__all__ = [
    "GsmOutput",
    "GsmParams",
    "aggregate",
    "compute_aggregation",
    "compute_decoupling",
    "decouple",
    "gsm_weights",
    "gsm_forward",
    "init_gsm",
    "project_to_graph",
]


@dataclass
class GsmParams:
    """Trainable tensors of the global structure module.

    Attributes:
        omega: per-category projections stacked as [c×(w·h)×d].
        A_low: category adjacency [c×c], kept symmetric.
        W_low: low-level graph weights [d×d].
        W_high: high-level graph weights [d×d].
        V_low: aggregation weights [d×n_high].
        V_high: decoupling weights [d×c].
        rescale_by_c: multiply θ_g by c so the weights average to one.
    """

    omega: Tensor
    A_low: Tensor
    W_low: Tensor
    W_high: Tensor
    V_low: Tensor
    V_high: Tensor
    rescale_by_c: bool = False

    def __post_init__(self) -> None:
        c, _, d = self.omega.shape
        n_high = self.V_low.shape[1]
        expected = {
            "A_low": (c, c),
            "W_low": (d, d),
            "W_high": (d, d),
            "V_low": (d, n_high),
            "V_high": (d, c),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ContractViolation(
                    f"GSM {name} must be {shape}, got {getattr(self, name).shape}"
                )
        if not n_high < c:
            raise ContractViolation(f"n_high ({n_high}) must be smaller than c ({c})")

    @property
    def c(self) -> int:
        return self.omega.shape[0]

    @property
    def d(self) -> int:
        return self.omega.shape[2]

    @property
    def n_high(self) -> int:
        return self.V_low.shape[1]

    @property
    def spatial(self) -> int:
        return self.omega.shape[1]

    def named_parameters(self, prefix: str = "gsm") -> Iterator[tuple[str, Tensor]]:
        for name in ("omega", "A_low", "W_low", "W_high", "V_low", "V_high"):
            yield f"{prefix}.{name}", getattr(self, name)

    def after_step(self) -> None:
        """Restores symmetry of ``A_low`` after an optimizer update."""
        self.A_low.data[...] = symmetrize(self.A_low.detach()).data


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> Tensor:
    bound = 1 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_gsm(
    c: int, spatial: int, d: int, n_high: int, rng: np.random.Generator
) -> GsmParams:
    """Uniform ±1/sqrt(fan_in) projections, ``A_low = I + 0.1/c`` off-diagonal."""
    a_low = np.full((c, c), 0.1 / c)
    np.fill_diagonal(a_low, 1.0)
    return GsmParams(
        omega=_uniform(rng, (c, spatial, d), spatial),
        A_low=Tensor(a_low, requires_grad=True),
        W_low=_uniform(rng, (d, d), d),
        W_high=_uniform(rng, (d, d), d),
        V_low=_uniform(rng, (d, n_high), d),
        V_high=_uniform(rng, (d, c), d),
    )


def project_to_graph(F_head: Tensor, p: GsmParams) -> GraphModel:
    """Node ``i`` is the flattened category map ``F_head[i]`` times ``Ω_i``."""
    if F_head.ndim != 3 or F_head.shape[0] != p.c:
        raise ContractViolation(
            f"F_head must have {p.c} category channels, got shape {F_head.shape}"
        )
    c, w, h = F_head.shape
    if w * h != p.spatial:
        raise ContractViolation(
            f"F_head spatial size {w}×{h} does not match omega rows {p.spatial}"
        )
    X = ops.project_rows(ops.reshape(F_head, (c, w * h)), p.omega)
    return GraphModel(X, p.A_low, "low")


def compute_aggregation(g: GraphModel, p: GsmParams) -> Tensor:
    """Soft assignment of low-level nodes to high-level nodes [n_low×n_high]."""
    if g.level != "low":
        raise ContractViolation(f"aggregation needs a low-level graph, got {g.level}")
    if g.n != p.c or g.d != p.d:
        raise ContractViolation(f"graph {g.X.shape} does not fit GSM c={p.c}, d={p.d}")
    return ops.row_softmax(ops.matmul(ops.matmul(g.A, g.X), p.V_low))


def aggregate(g: GraphModel, C: Tensor) -> GraphModel:
    """``X_high = Cᵀ·X_low``, ``A_high = Cᵀ·A_low·C``."""
    if C.ndim != 2 or C.shape[0] != g.n:
        raise ContractViolation(f"aggregation {C.shape} does not fit {g.n} nodes")
    Ct = ops.transpose(C)
    return GraphModel(ops.matmul(Ct, g.X), ops.matmul(ops.matmul(Ct, g.A), C), "high")


def compute_decoupling(g: GraphModel, p: GsmParams) -> Tensor:
    """Soft assignment of high-level nodes back to categories [n_high×n_low]."""
    if g.level != "high":
        raise ContractViolation(f"decoupling needs a high-level graph, got {g.level}")
    if g.d != p.d:
        raise ContractViolation(f"graph {g.X.shape} does not fit GSM d={p.d}")
    return ops.row_softmax(ops.matmul(ops.matmul(g.A, g.X), p.V_high))


def decouple(Z_high: Tensor, A_high: Tensor, C_dec: Tensor) -> tuple[Tensor, Tensor]:
    """``Ẑ_low = C_decᵀ·Z_high``, ``Â_low = C_decᵀ·A_high·C_dec``."""
    if C_dec.ndim != 2 or Z_high.ndim != 2 or C_dec.shape[0] != Z_high.shape[0]:
        raise ContractViolation(
            f"decoupling {C_dec.shape} does not fit high-level nodes {Z_high.shape}"
        )
    if A_high.shape != (C_dec.shape[0], C_dec.shape[0]):
        raise ContractViolation(f"A_high {A_high.shape} does not fit {C_dec.shape}")
    Ct = ops.transpose(C_dec)
    return ops.matmul(Ct, Z_high), ops.matmul(ops.matmul(Ct, A_high), C_dec)


@dataclass(frozen=True)
class GsmOutput:
    F_rectified_head: Tensor
    Z_g: Tensor
    theta_g: Tensor
    C_agg: Tensor
    C_dec: Tensor
    A_high: Tensor
    A_low_hat: Tensor


def gsm_weights(Z_g: Tensor, rescale_by_c: bool = False) -> Tensor:
    """``θ = softmax(GAP(Z))``, optionally multiplied by the node count."""
    theta = ops.softmax(ops.gap(Z_g))
    return ops.scale(theta, float(Z_g.shape[0])) if rescale_by_c else theta


def gsm_forward(F_head: Tensor, p: GsmParams) -> GsmOutput:
    """Full global structure module on one category feature map."""
    with scope("gsm"):
        low = project_to_graph(F_head, p)
        Z_low = graph_convolve(low, p.W_low)
        C_agg = compute_aggregation(low, p)
        high = aggregate(low, C_agg)
        Z_high = graph_convolve(high, p.W_high)
        C_dec = compute_decoupling(high, p)
        Z_low_hat, A_low_hat = decouple(Z_high, high.A, C_dec)
        Z_g = ops.add(Z_low_hat, Z_low)
        theta_g = gsm_weights(Z_g, p.rescale_by_c)
        rectified = ops.channel_scale(theta_g, F_head)
    return GsmOutput(rectified, Z_g, theta_g, C_agg, C_dec, high.A, A_low_hat)

