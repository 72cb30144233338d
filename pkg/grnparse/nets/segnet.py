"""Segmentation network S-Net.

A small encoder with two stride-2 stages produces features at a quarter of
the input resolution, a 1×1 head maps them to ``c`` category channels
(``F_head``) and a decoder upsamples the category map back to ``H×W``.
Optionally the local and global graph modules reweight the encoder features
and ``F_head``, trained under full supervision like the rest of the network.
"""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
import numpy.typing as nty
from pydantic import BaseModel, Field, model_validator
from scipy.special import softmax

from grnparse.autodiff.tensor import Array, Tensor, no_grad, scope
from grnparse.errors import ContractViolation
from grnparse.graph.gsm import GsmParams, gsm_forward, init_gsm
from grnparse.graph.lcm import LcmParams, init_lcm, lcm_forward
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
from grnparse.tech import PRESETS

__all__ = [
    "SegNetConfig",
    "SegNetParams",
    "check_image",
    "init_segnet",
    "predict_mask",
    "seg_forward",
]


class SegNetConfig(BaseModel):
    """S-Net shape.

    Parameters:
        c: number of categories.
        c_prime: feature channels of the encoder.
        size: input side length; only binding when a graph module is used.
        with_lcm: reweight encoder features with the local consistency module.
        with_gsm: reweight ``F_head`` with the global structure module.
        d: graph node feature size.
        n_high: high-level node count of the global module.
        alpha: kept for symmetry with the rectifier; S-Net never passes ``Z_g``.
    """

    c: int = Field(default=PRESETS.desk_c, ge=2)
    c_prime: int = Field(default=PRESETS.desk_c_prime, ge=1)
    size: int = Field(default=PRESETS.desk_size, ge=16)
    with_lcm: bool = False
    with_gsm: bool = False
    d: int = Field(default=PRESETS.desk_d, ge=1)
    n_high: int = Field(default=PRESETS.desk_n_high, ge=1)
    alpha: float = Field(default=PRESETS.alpha, ge=0)

    @model_validator(mode="after")
    def _check(self) -> SegNetConfig:
        if self.size % 4:
            raise ValueError(f"size must be divisible by 4, got {self.size}")
        if self.with_gsm and not self.n_high < self.c:
            raise ValueError(f"n_high ({self.n_high}) must be smaller than c ({self.c})")
        return self


@dataclass
class SegNetParams(Network):
    config: SegNetConfig
    encoder: list[ConvLayer]
    head: Head
    decoder: list[ConvLayer]
    lcm: LcmParams | None = None
    gsm: GsmParams | None = None

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        for i, layer in enumerate(self.encoder):
            yield from layer.named_parameters(f"encoder.{i}")
        if self.lcm is not None:
            yield from self.lcm.named_parameters("lcm")
        yield from self.head.named_parameters("head")
        if self.gsm is not None:
            yield from self.gsm.named_parameters("gsm")
        for i, layer in enumerate(self.decoder):
            yield from layer.named_parameters(f"decoder.{i}")

    def after_step(self) -> None:
        if self.gsm is not None:
            self.gsm.after_step()


def init_segnet(
    config: SegNetConfig | None = None, rng: np.random.Generator | int = 0
) -> SegNetParams:
    """Returns freshly initialised S-Net parameters.

    Args:
        config: network shape, desk defaults when omitted.
        rng: generator or seed.
    """
    config = config or SegNetConfig()
    rng = np.random.default_rng(rng)
    c, cp = config.c, config.c_prime
    spatial = (config.size // 4) ** 2
    encoder = [
        init_conv(3, cp, rng),
        init_conv(cp, cp, rng, stride=2),
        init_conv(cp, cp, rng),
        init_conv(cp, cp, rng, stride=2),
    ]
    lcm = None
    if config.with_lcm:
        lcm = init_lcm(c, cp, spatial, config.d, rng, config.alpha)
    head = init_head(cp, c, rng)
    gsm = None
    if config.with_gsm:
        gsm = init_gsm(c, spatial, config.d, config.n_high, rng)
    decoder = init_decoder(c, cp, rng)
    return SegNetParams(config, encoder, head, decoder, lcm, gsm)


def check_image(image: Tensor, channels: int = 3) -> None:
    if image.ndim != 3 or image.shape[0] != channels:
        raise ContractViolation(f"expected [{channels}×H×W] input, got {image.shape}")
    _, h, w = image.shape
    if h < 16 or w < 16 or h % 4 or w % 4:
        raise ContractViolation(
            f"input side lengths must be >= 16 and divisible by 4, got {h}×{w}"
        )


def seg_forward(image: Tensor, p: SegNetParams) -> Tensor:
    """Per-pixel class logits [c×H×W] for one image [3×H×W]."""
    check_image(image)
    with scope("encoder"):
        F = run_stack(p.encoder, image)
    if p.lcm is not None:
        F = lcm_forward(F, p.lcm).F_rectified
    with scope("head"):
        F_head = p.head(F)
    if p.gsm is not None:
        F_head = gsm_forward(F_head, p.gsm).F_rectified_head
    with scope("decoder"):
        return decode(p.decoder, F_head)


def predict_mask(
    image: Tensor | nty.ArrayLike, p: SegNetParams
) -> tuple[Array, nty.NDArray[np.uint8]]:
    """Class distribution and label map of one image.

    Ties between equally likely classes resolve to the lowest class id.

    Returns:
        probs [c×H×W] summing to one over channels, labels [H×W].
    """
    x = image if isinstance(image, Tensor) else Tensor(image)
    with no_grad():
        logits = seg_forward(x, p).data
    return softmax(logits, axis=0), np.argmax(logits, axis=0).astype(np.uint8)


if __name__ == "__main__":
    params = init_segnet()
    probs, labels = predict_mask(np.zeros((3, 64, 64)), params)
    print(probs.shape, np.bincount(labels.ravel()))
