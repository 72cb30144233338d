"""Rectification network R-Net.

The rectifier reads an image together with a predicted mask and returns a
corrected mask. Its modules run in a fixed cascade, local before global::

    F          = backbone([image; mask])                [c'×H/4×W/4]
    θ_l        = LCM(F)
    F_head     = φ(lift(θ_l) ⊙ F)                      [c×H/4×W/4]
    θ_g, Z_g   = GSM(F_head)
    logits     = decoder(head(θ_g ⊙ F_head))            [c×H×W]

With ``two_pass_assist`` the node weights of the local module are recomputed
with the global features ``Z_g`` of the same pass and the cascade after the
backbone runs a second time.
"""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
import numpy.typing as nty
from pydantic import BaseModel, Field, model_validator

from grnparse.autodiff import ops
from grnparse.autodiff.tensor import Array, Tensor, no_grad, scope
from grnparse.errors import DataError
from grnparse.graph.gsm import GsmParams, gsm_forward, init_gsm
from grnparse.graph.lcm import (
    Lift,
    LcmParams,
    init_lcm,
    lcm_forward,
    lcm_weights,
    lift_weights,
)
from grnparse.nets.layers import (
    ConvLayer,
    Head,
    Network,
    decode,
    init_conv,
    init_decoder,
    init_head,
    run_stack,
)
from grnparse.nets.segnet import check_image
from grnparse.tech import PRESETS

__all__ = [
    "RectNetConfig",
    "RectNetParams",
    "RectifyOutput",
    "assemble_input",
    "init_rectnet",
    "one_hot",
    "rectify_forward",
    "rectify_mask",
]

IMAGE_CHANNELS = 3


class RectNetConfig(BaseModel):
    """R-Net shape and module switches.

    Parameters:
        c: number of categories.
        c_prime: backbone feature channels.
        d: graph node feature size.
        n_high: high-level node count of the global module.
        alpha: weight of the global features inside the local module.
        size: input side length; fixes the spatial projections.
        use_lcm: apply the local consistency module.
        use_gsm: apply the global structure module.
        two_pass_assist: recompute the local weights with the global features.
        lift: how the ``c`` local weights reach the ``c'`` backbone channels.
        rescale_by_c: multiply θ_g by ``c``.
        hard_mask: feed one-hot argmax masks instead of class probabilities.
    """

    c: int = Field(default=PRESETS.desk_c, ge=2)
    c_prime: int = Field(default=PRESETS.desk_c_prime, ge=1)
    d: int = Field(default=PRESETS.desk_d, ge=1)
    n_high: int = Field(default=PRESETS.desk_n_high, ge=1)
    alpha: float = Field(default=PRESETS.alpha, ge=0)
    size: int = Field(default=PRESETS.desk_size, ge=16)
    use_lcm: bool = True
    use_gsm: bool = True
    two_pass_assist: bool = True
    lift: Lift = "projection"
    rescale_by_c: bool = False
    hard_mask: bool = False

    @model_validator(mode="after")
    def _check(self) -> RectNetConfig:
        if self.size % 4:
            raise ValueError(f"size must be divisible by 4, got {self.size}")
        if self.use_gsm and not self.n_high < self.c:
            raise ValueError(f"n_high ({self.n_high}) must be smaller than c ({self.c})")
        if self.use_lcm and self.lift == "identity" and self.c != self.c_prime:
            raise ValueError(
                f"identity lift needs c == c_prime, got {self.c}, {self.c_prime}"
            )
        return self


@dataclass
class RectNetParams(Network):
    """Trainable tensors of R-Net; ``lcm``/``gsm`` are ``None`` when switched off."""

    config: RectNetConfig
    backbone: list[ConvLayer]
    lcm: LcmParams | None
    phi: list[ConvLayer]
    gsm: GsmParams | None
    head: Head
    decoder: list[ConvLayer]

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        for i, layer in enumerate(self.backbone):
            yield from layer.named_parameters(f"backbone.{i}")
        if self.lcm is not None:
            yield from self.lcm.named_parameters("lcm")
        for i, layer in enumerate(self.phi):
            yield from layer.named_parameters(f"phi.{i}")
        if self.gsm is not None:
            yield from self.gsm.named_parameters("gsm")
        yield from self.head.named_parameters("head")
        for i, layer in enumerate(self.decoder):
            yield from layer.named_parameters(f"decoder.{i}")

    def after_step(self) -> None:
        if self.gsm is not None:
            self.gsm.after_step()


def init_rectnet(
    config: RectNetConfig | None = None, rng: np.random.Generator | int = 0
) -> RectNetParams:
    config = config or RectNetConfig()
    rng = np.random.default_rng(rng)
    c, cp = config.c, config.c_prime
    spatial = (config.size // 4) ** 2
    backbone = [
        init_conv(IMAGE_CHANNELS + c, cp, rng),
        init_conv(cp, cp, rng, stride=2),
        init_conv(cp, cp, rng),
        init_conv(cp, cp, rng, stride=2),
    ]
    lcm = (
        init_lcm(c, cp, spatial, config.d, rng, config.alpha, config.lift)
        if config.use_lcm
        else None
    )
    phi = [init_conv(cp, cp, rng), init_conv(cp, c, rng, relu=False)]
    gsm = None
    if config.use_gsm:
        gsm = init_gsm(c, spatial, config.d, config.n_high, rng)
        gsm.rescale_by_c = config.rescale_by_c
    head = init_head(c, c, rng)
    decoder = init_decoder(c, cp, rng)
    return RectNetParams(config, backbone, lcm, phi, gsm, head, decoder)


def one_hot(labels: nty.ArrayLike, c: int) -> Array:
    """``[H×W]`` ids to a ``[c×H×W]`` one-hot distribution."""
    y = np.asarray(labels)
    if y.size and (y.min() < 0 or y.max() >= c):
        raise DataError(f"label ids must lie in [0, {c}), got [{y.min()}, {y.max()}]")
    return (np.arange(c)[:, None, None] == y[None]).astype(np.float64)


def assemble_input(image: nty.ArrayLike, mask_probs: nty.ArrayLike) -> Tensor:
    """Concatenates an image [3×H×W] and a class distribution [c×H×W], image first."""
    x = np.asarray(image, dtype=np.float64)
    m = np.asarray(mask_probs, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != IMAGE_CHANNELS:
        raise DataError(f"image must be [3×H×W], got {x.shape}")
    if m.ndim != 3 or m.shape[1:] != x.shape[1:]:
        raise DataError(f"mask {m.shape} does not match image {x.shape}")
    if not np.allclose(m.sum(axis=0), 1.0, rtol=0, atol=1e-5) or (m < 0).any():
        raise DataError("mask channels must form a distribution at every pixel")
    return Tensor(np.concatenate([x, m], axis=0))


@dataclass(frozen=True)
class RectifyOutput:
    """Logits and the diagnostics of one rectifier pass.

    ``theta_l``/``theta_g`` are ``None`` for a switched-off module.
    """

    logits: Tensor
    theta_l: Tensor | None
    theta_g: Tensor | None
    Z_g: Tensor | None


def _unit(n: int) -> Tensor:
    return Tensor(np.ones(n))


def rectify_forward(
    input: Tensor, p: RectNetParams, unit_weights: bool = False
) -> RectifyOutput:
    """One cascaded rectifier pass.

    Args:
        input: image and mask channels [(3+c)×H×W].
        p: parameters.
        unit_weights: replace θ_l and θ_g by ones; the graph modules are
            skipped and only the reweighting with ones remains.
    """
    config = p.config
    check_image(input, IMAGE_CHANNELS + config.c)
    with scope("backbone"):
        F = run_stack(p.backbone, input)

    if unit_weights:
        with scope("lcm"):
            F_local = ops.channel_scale(_unit(config.c_prime), F)
        with scope("phi"):
            F_head = run_stack(p.phi, F_local)
        with scope("gsm"):
            F_global = ops.channel_scale(_unit(config.c), F_head)
        theta_l = theta_g = Z_g = None
    else:
        theta_l = theta_g = Z_g = None
        Z_l = None
        F_local = F
        if p.lcm is not None:
            local = lcm_forward(F, p.lcm)
            F_local, theta_l, Z_l = local.F_rectified, local.theta_l, local.Z_l
        with scope("phi"):
            F_head = run_stack(p.phi, F_local)
        F_global = F_head
        if p.gsm is not None:
            glob = gsm_forward(F_head, p.gsm)
            F_global, theta_g, Z_g = glob.F_rectified_head, glob.theta_g, glob.Z_g

        if config.two_pass_assist and p.lcm is not None and p.gsm is not None:
            assert Z_l is not None and Z_g is not None
            with scope("assist"):
                with scope("lcm"):
                    theta_l = lcm_weights(Z_l, p.lcm.alpha, Z_g)
                    F_local = ops.channel_scale(lift_weights(theta_l, p.lcm), F)
                with scope("phi"):
                    F_head = run_stack(p.phi, F_local)
                glob = gsm_forward(F_head, p.gsm)
                F_global, theta_g, Z_g = glob.F_rectified_head, glob.theta_g, glob.Z_g

    with scope("head"):
        logits_low = p.head(F_global)
    with scope("decoder"):
        logits = decode(p.decoder, logits_low)
    return RectifyOutput(logits, theta_l, theta_g, Z_g)


def rectify_mask(
    image: nty.ArrayLike, mask_probs: nty.ArrayLike, p: RectNetParams
) -> tuple[nty.NDArray[np.uint8], RectifyOutput]:
    """Rectified label map of one sample under frozen parameters.

    With ``hard_mask`` the distribution is replaced by its one-hot argmax
    before it enters the network.
    """
    m = np.asarray(mask_probs, dtype=np.float64)
    if p.config.hard_mask:
        m = one_hot(np.argmax(m, axis=0), p.config.c)
    with no_grad():
        out = rectify_forward(assemble_input(image, m), p)
    return np.argmax(out.logits.data, axis=0).astype(np.uint8), out


if __name__ == "__main__":
    params = init_rectnet(RectNetConfig(size=16, c=4, c_prime=8, d=6, n_high=2))
    image = np.zeros((3, 16, 16))
    labels, out = rectify_mask(image, np.full((4, 16, 16), 0.25), params)
    print(np.bincount(labels.ravel()), out.theta_l, out.theta_g)
