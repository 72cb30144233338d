"""SGD with momentum, weight decay and the "poly" learning-rate schedule."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

from grnparse.autodiff.tensor import Array, Tensor
from grnparse.errors import ConfigError, ContractViolation
from grnparse.tech import PRESETS

__all__ = ["SgdConfig", "SgdState", "poly_lr", "sgd_step"]


class SgdConfig(BaseModel):
    """Optimizer hyper-parameters.

    Parameters:
        base_lr: learning rate at iteration 0.
        momentum: velocity decay in [0, 1).
        weight_decay: L2 coefficient added to every gradient.
        power: exponent of the poly schedule.
    """

    base_lr: float = Field(default=PRESETS.lr, gt=0)
    momentum: float = Field(default=PRESETS.momentum, ge=0, lt=1)
    weight_decay: float = Field(default=PRESETS.weight_decay, ge=0)
    power: float = Field(default=PRESETS.poly_power, gt=0)

    def state(self, max_iter: int) -> SgdState:
        return SgdState(
            base_lr=self.base_lr,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            power=self.power,
            max_iter=max_iter,
        )


@dataclass
class SgdState:
    """Mutable optimizer state; velocities are created lazily per parameter."""

    max_iter: int
    base_lr: float = PRESETS.lr
    momentum: float = PRESETS.momentum
    weight_decay: float = PRESETS.weight_decay
    power: float = PRESETS.poly_power
    iter: int = 0
    velocity: dict[str, Array] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be positive, got {self.max_iter}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")


def poly_lr(state: SgdState) -> float:
    """``base_lr * (1 - iter / max_iter) ** power``."""
    return state.base_lr * (1 - state.iter / state.max_iter) ** state.power


def sgd_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Array] | None,
    state: SgdState,
) -> None:
    """One momentum step, updating ``params`` in place.

    ``v <- momentum * v + grad + weight_decay * param``;
    ``param <- param - lr(iter) * v``.

    Args:
        params: named parameters.
        grads: named gradients; ``None`` takes each parameter's ``grad``
            (missing gradients count as zero).
        state: optimizer state, ``iter`` is incremented.
    """
    lr = poly_lr(state)
    if not lr > 0:
        raise ConfigError(
            f"learning rate {lr} is not positive at iter {state.iter}/{state.max_iter}"
        )
    for name, param in params.items():
        if grads is not None:
            grad = grads[name]
        else:
            grad = param.grad if param.grad is not None else np.zeros(param.shape)
        if grad.shape != param.shape:
            raise ContractViolation(
                f"gradient of {name!r} has shape {grad.shape}, parameter {param.shape}"
            )
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros(param.shape)
        v = state.momentum * v + grad + state.weight_decay * param.data
        state.velocity[name] = v
        param.data -= lr * v
    state.iter += 1
