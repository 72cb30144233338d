"""Mini-batch training loops for S-Net and R-Net."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from typing import TypeVar

import numpy as np
import numpy.typing as nty
from pydantic import BaseModel, Field

from grnparse.autodiff import ops
from grnparse.autodiff.optim import SgdConfig, SgdState, poly_lr, sgd_step
from grnparse.autodiff.tensor import Tensor, backward
from grnparse.config import logger
from grnparse.data.augment import AugmentConfig, augment
from grnparse.errors import ConfigError
from grnparse.nets.layers import Network
from grnparse.nets.rectnet import (
    RectNetParams,
    assemble_input,
    one_hot,
    rectify_forward,
)
from grnparse.nets.segnet import SegNetParams, seg_forward
from grnparse.tech import PRESETS

__all__ = ["TrainingLog", "fit", "train_rectifier", "train_segmenter"]

T = TypeVar("T")
F64 = nty.NDArray[np.float64]
U8 = nty.NDArray[np.uint8]
LabeledImage = tuple[F64, U8]
RectifierTriple = tuple[F64, F64, U8]


class TrainingLog(BaseModel):
    """Mean training loss of every epoch.

    Parameters:
        stage: name used in log lines.
        epoch_losses: mean per-sample loss of each epoch.
        iterations: optimizer steps taken.
    """

    stage: str = "train"
    epoch_losses: list[float] = Field(default_factory=list)
    iterations: int = 0

    @property
    def initial(self) -> float:
        return self.epoch_losses[0]

    @property
    def final(self) -> float:
        return self.epoch_losses[-1]


def _optimizer(
    opt: SgdConfig | SgdState, epochs: int, steps_per_epoch: int
) -> SgdState:
    if isinstance(opt, SgdState):
        return opt
    return opt.state(max(1, epochs * steps_per_epoch))


def fit(
    net: Network,
    examples: Sequence[T],
    loss_fn: Callable[[T, np.random.Generator], Tensor],
    opt: SgdConfig | SgdState,
    epochs: int,
    batch_size: int = PRESETS.desk_batch_size,
    rng: np.random.Generator | int = 0,
    stage: str = "train",
) -> TrainingLog:
    """Runs SGD over shuffled mini-batches.

    Gradients of a batch are accumulated sample by sample and divided by the
    batch size before the optimizer step.

    Args:
        net: parameters to update in place.
        examples: training examples.
        loss_fn: scalar loss of one example.
        opt: optimizer settings, or a state to continue.
        epochs: passes over ``examples``; 0 leaves ``net`` untouched.
        batch_size: examples per optimizer step.
        rng: generator or seed for shuffling and ``loss_fn``.
        stage: name used in log lines.
    """
    if not examples:
        raise ConfigError(f"{stage}: cannot train on an empty corpus")
    if epochs < 0:
        raise ConfigError(f"{stage}: epochs must be >= 0, got {epochs}")
    if batch_size < 1:
        raise ConfigError(f"{stage}: batch_size must be >= 1, got {batch_size}")
    rng = np.random.default_rng(rng)
    log = TrainingLog(stage=stage)
    if epochs == 0:
        return log

    n = len(examples)
    steps = math.ceil(n / batch_size)
    state = _optimizer(opt, epochs, steps)
    params = net.parameters()
    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            net.zero_grad()
            batch_loss = 0.0
            for i in batch:
                loss = loss_fn(examples[i], rng)
                backward(loss)
                batch_loss += loss.item()
            grads = {
                name: (p.grad if p.grad is not None else np.zeros(p.shape)) / len(batch)
                for name, p in params.items()
            }
            lr = poly_lr(state)
            sgd_step(params, grads, state)
            net.after_step()
            epoch_loss += batch_loss
            logger.debug(
                f"{stage}: iter {state.iter} lr {lr:.6f} loss {batch_loss / len(batch):.6f}"
            )
        log.epoch_losses.append(epoch_loss / n)
        logger.info(f"{stage}: epoch {epoch + 1}/{epochs} loss {log.final:.6f}")
    log.iterations = epochs * steps
    net.zero_grad()
    return log


def train_segmenter(
    examples: Sequence[LabeledImage],
    p: SegNetParams,
    opt: SgdConfig | SgdState,
    epochs: int,
    augmentation: AugmentConfig | None = None,
    flip_lookup: nty.NDArray[np.intp] | None = None,
    batch_size: int = PRESETS.desk_batch_size,
    rng: np.random.Generator | int = 0,
    stage: str = "train-seg",
) -> TrainingLog:
    """Pixel-wise cross-entropy training of S-Net on ``(image, label)`` pairs.

    Args:
        examples: images [3×H×W] with their label maps [H×W].
        p: S-Net parameters, updated in place.
        opt: optimizer settings or state.
        epochs: passes over the data.
        augmentation: flips and rescaling; ``None`` trains on the raw pairs.
        flip_lookup: id permutation used by flips, identity when omitted.
        batch_size: examples per step.
        rng: generator or seed.
        stage: name used in log lines.
    """
    c = p.config.c
    lookup = flip_lookup if flip_lookup is not None else np.arange(c, dtype=np.intp)

    def _loss(example: LabeledImage, rng: np.random.Generator) -> Tensor:
        image, label = example
        if augmentation is not None and augmentation.enabled:
            image, label = augment(image, label, augmentation, lookup, rng)
        return ops.cross_entropy_pixelwise(seg_forward(Tensor(image), p), label)

    return fit(p, examples, _loss, opt, epochs, batch_size, rng, stage)


def train_rectifier(
    triples: Sequence[RectifierTriple],
    p: RectNetParams,
    opt: SgdConfig | SgdState,
    epochs: int,
    batch_size: int = PRESETS.desk_batch_size,
    rng: np.random.Generator | int = 0,
    stage: str = "train-rect",
) -> TrainingLog:
    """Trains R-Net to map ``(image, predicted mask)`` to the ground truth.

    Args:
        triples: image [3×H×W], predicted class distribution [c×H×W] and
            ground-truth label map [H×W].
        p: R-Net parameters, updated in place.
        opt: optimizer settings or state.
        epochs: passes over the data.
        batch_size: examples per step.
        rng: generator or seed.
        stage: name used in log lines.
    """
    c = p.config.c
    inputs = []
    for image, probs, target in triples:
        mask = one_hot(np.argmax(probs, axis=0), c) if p.config.hard_mask else probs
        inputs.append((assemble_input(image, mask), target))

    def _loss(example: tuple[Tensor, U8], rng: np.random.Generator) -> Tensor:
        x, target = example
        return ops.cross_entropy_pixelwise(rectify_forward(x, p).logits, target)

    return fit(p, inputs, _loss, opt, epochs, batch_size, rng, stage)
