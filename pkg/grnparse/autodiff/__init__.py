# flake8: noqa

from grnparse.autodiff.checkpoint import read_checkpoint, write_checkpoint
from grnparse.autodiff.conv import conv1x1, conv2d, upsample_nearest
from grnparse.autodiff.gradcheck import GradCheckReport, grad_check
from grnparse.autodiff.ops import (
    add,
    bias_add,
    channel_scale,
    cross_entropy_pixelwise,
    gap,
    matmul,
    mul,
    project_rows,
    relu,
    reshape,
    row_softmax,
    scale,
    softmax,
    total,
    transpose,
)
from grnparse.autodiff.optim import SgdConfig, SgdState, poly_lr, sgd_step
from grnparse.autodiff.tensor import (
    ComputationRecord,
    Tensor,
    backward,
    no_grad,
    scope,
    trace,
)


__all__ = [
    "ComputationRecord",
    "GradCheckReport",
    "SgdConfig",
    "SgdState",
    "Tensor",
    "add",
    "backward",
    "bias_add",
    "channel_scale",
    "conv1x1",
    "conv2d",
    "cross_entropy_pixelwise",
    "gap",
    "grad_check",
    "matmul",
    "mul",
    "no_grad",
    "poly_lr",
    "project_rows",
    "read_checkpoint",
    "relu",
    "reshape",
    "row_softmax",
    "scale",
    "scope",
    "sgd_step",
    "softmax",
    "total",
    "trace",
    "transpose",
    "upsample_nearest",
    "write_checkpoint",
]
