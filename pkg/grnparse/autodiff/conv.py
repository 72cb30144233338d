"""Convolutions and nearest-neighbour upsampling on ``[c×H×W]`` tensors.

``conv2d`` is a 3×3 cross-correlation with zero padding of 1, lowered to a
single matrix product over im2col patches::

    out[o, y, x] = sum_{i, ky, kx} kernel[o, i, ky, kx] * pad(input)[i, s*y + ky, s*x + kx]
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from grnparse.autodiff import ops
from grnparse.autodiff.tensor import Array, Tensor, make_result
from grnparse.errors import ContractViolation

__all__ = ["conv1x1", "conv2d", "output_size", "upsample_nearest"]


def output_size(size: int, stride: int) -> int:
    """Spatial size after a padded 3×3 convolution, ``ceil(size / stride)``."""
    return -(-size // stride)


def _im2col(x: Array, stride: int) -> Array:
    cin = x.shape[0]
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(padded, (3, 3), axis=(1, 2))[:, ::stride, ::stride]
    ho, wo = windows.shape[1:3]
    return windows.transpose(0, 3, 4, 1, 2).reshape(cin * 9, ho * wo)


def conv2d(
    input: Tensor,
    kernel: Tensor,
    stride: int = 1,
    bias: Tensor | None = None,
) -> Tensor:
    """3×3 convolution with same-padding.

    Args:
        input: feature map [cin×H×W], H and W at least 3.
        kernel: weights [cout×cin×3×3].
        stride: 1 or 2.
        bias: optional per-output-channel offset [cout].
    """
    if input.ndim != 3 or kernel.ndim != 4 or kernel.shape[2:] != (3, 3):
        raise ContractViolation(
            f"conv2d needs input [cin×H×W] and kernel [cout×cin×3×3], "
            f"got {input.shape} and {kernel.shape}"
        )
    cin, h, w = input.shape
    cout = kernel.shape[0]
    if kernel.shape[1] != cin:
        raise ContractViolation(
            f"conv2d channel mismatch: input {input.shape}, kernel {kernel.shape}"
        )
    if h < 3 or w < 3:
        raise ContractViolation(f"conv2d needs H, W >= 3, got {input.shape}")
    if stride not in (1, 2):
        raise ContractViolation(f"conv2d stride must be 1 or 2, got {stride}")
    if bias is not None and bias.shape != (cout,):
        raise ContractViolation(f"conv2d bias must be [{cout}], got {bias.shape}")

    ho, wo = output_size(h, stride), output_size(w, stride)
    cols = _im2col(input.data, stride)
    k2 = kernel.data.reshape(cout, cin * 9)
    out = (k2 @ cols).reshape(cout, ho, wo)
    if bias is not None:
        out = out + bias.data[:, None, None]

    def _backward(g: Array) -> tuple[Array, ...]:
        gm = g.reshape(cout, ho * wo)
        dkernel = (gm @ cols.T).reshape(kernel.shape)
        dcols = (k2.T @ gm).reshape(cin, 3, 3, ho, wo)
        dpad = np.zeros((cin, h + 2, w + 2))
        for ky in range(3):
            for kx in range(3):
                dpad[
                    :, ky : ky + stride * ho : stride, kx : kx + stride * wo : stride
                ] += dcols[:, ky, kx]
        dinput = dpad[:, 1:-1, 1:-1]
        if bias is None:
            return dinput, dkernel
        return dinput, dkernel, g.sum(axis=(1, 2))

    inputs = (input, kernel) if bias is None else (input, kernel, bias)
    return make_result("conv2d", out, inputs, _backward, stride=stride)


def conv1x1(input: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Per-pixel linear map ``weight [cout×cin]`` over channels."""
    if input.ndim != 3:
        raise ContractViolation(f"conv1x1 needs input [cin×H×W], got {input.shape}")
    cin, h, w = input.shape
    flat = ops.reshape(input, (cin, h * w))
    out = ops.reshape(ops.matmul(weight, flat), (weight.shape[0], h, w))
    return out if bias is None else ops.bias_add(out, bias)


def upsample_nearest(input: Tensor, factor: int = 2) -> Tensor:
    """Replicates every pixel into a ``factor×factor`` block."""
    if input.ndim != 3:
        raise ContractViolation(f"upsample_nearest needs [c×H×W], got {input.shape}")
    if factor != 2:
        raise ContractViolation(f"upsample_nearest supports factor 2, got {factor}")
    c, h, w = input.shape
    out = input.data.repeat(2, axis=1).repeat(2, axis=2)
    return make_result(
        "upsample_nearest",
        out,
        (input,),
        lambda g: (g.reshape(c, h, 2, w, 2).sum(axis=(2, 4)),),
    )
