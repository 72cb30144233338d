"""Convolution layers and parameter plumbing shared by S-Net and R-Net."""

from __future__ import annotations

import pathlib
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from grnparse.autodiff import checkpoint, conv, ops
from grnparse.autodiff.tensor import Array, Tensor
from grnparse.errors import FormatError

__all__ = [
    "ConvLayer",
    "Head",
    "Network",
    "decode",
    "init_conv",
    "init_decoder",
    "init_head",
    "run_stack",
]


@dataclass
class ConvLayer:
    """3×3 convolution with bias; ``relu`` applies the nonlinearity afterwards."""

    kernel: Tensor
    bias: Tensor
    stride: int = 1
    relu: bool = True

    @property
    def cin(self) -> int:
        return self.kernel.shape[1]

    @property
    def cout(self) -> int:
        return self.kernel.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        y = conv.conv2d(x, self.kernel, self.stride, self.bias)
        return ops.relu(y) if self.relu else y

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield f"{prefix}.kernel", self.kernel
        yield f"{prefix}.bias", self.bias


@dataclass
class Head:
    """1×1 convolution ``c_in → c_out``."""

    weight: Tensor
    bias: Tensor

    def __call__(self, x: Tensor) -> Tensor:
        return conv.conv1x1(x, self.weight, self.bias)

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield f"{prefix}.weight", self.weight
        yield f"{prefix}.bias", self.bias


def init_conv(
    cin: int, cout: int, rng: np.random.Generator, stride: int = 1, relu: bool = True
) -> ConvLayer:
    """He-uniform kernel, zero bias."""
    bound = np.sqrt(6 / (cin * 9))
    kernel = rng.uniform(-bound, bound, size=(cout, cin, 3, 3))
    return ConvLayer(
        Tensor(kernel, requires_grad=True),
        Tensor(np.zeros(cout), requires_grad=True),
        stride,
        relu,
    )


def init_head(cin: int, cout: int, rng: np.random.Generator) -> Head:
    bound = 1 / np.sqrt(cin)
    return Head(
        Tensor(rng.uniform(-bound, bound, size=(cout, cin)), requires_grad=True),
        Tensor(np.zeros(cout), requires_grad=True),
    )


def init_decoder(c: int, hidden: int, rng: np.random.Generator) -> list[ConvLayer]:
    """Two ×2 upsampling stages, each followed by a 3×3 convolution."""
    return [init_conv(c, hidden, rng), init_conv(hidden, c, rng, relu=False)]


def run_stack(layers: Iterable[ConvLayer], x: Tensor) -> Tensor:
    for layer in layers:
        x = layer(x)
    return x


def decode(layers: Sequence[ConvLayer], x: Tensor) -> Tensor:
    for layer in layers:
        x = layer(conv.upsample_nearest(x, 2))
    return x


class Network:
    """Mixin giving a parameter dataclass checkpoint and optimizer plumbing.

    Subclasses implement :meth:`named_parameters`.
    """

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        raise NotImplementedError

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    def after_step(self) -> None:
        """Hook run after every optimizer step."""

    def state_dict(self) -> dict[str, Array]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, Array]) -> None:
        params = self.parameters()
        if set(state) != set(params):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise FormatError(f"checkpoint mismatch: missing {missing}, unexpected {extra}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise FormatError(
                    f"checkpoint {name!r} has shape {state[name].shape}, expected {p.shape}"
                )
            p.data[...] = state[name]

    def save(self, path: str | pathlib.Path) -> pathlib.Path:
        return checkpoint.write_checkpoint(path, self.parameters())

    def load(self, path: str | pathlib.Path) -> None:
        self.load_state_dict(checkpoint.read_checkpoint(path))
