# flake8: noqa

from grnparse.nets.layers import ConvLayer, Head, Network
from grnparse.nets.rectnet import (
    RectNetConfig,
    RectNetParams,
    RectifyOutput,
    assemble_input,
    init_rectnet,
    one_hot,
    rectify_forward,
    rectify_mask,
)
from grnparse.nets.segnet import (
    SegNetConfig,
    SegNetParams,
    init_segnet,
    predict_mask,
    seg_forward,
)
from grnparse.nets.train import TrainingLog, fit, train_rectifier, train_segmenter


__all__ = [
    "ConvLayer",
    "Head",
    "Network",
    "RectNetConfig",
    "RectNetParams",
    "RectifyOutput",
    "SegNetConfig",
    "SegNetParams",
    "TrainingLog",
    "assemble_input",
    "fit",
    "init_rectnet",
    "init_segnet",
    "one_hot",
    "predict_mask",
    "rectify_forward",
    "rectify_mask",
    "seg_forward",
    "train_rectifier",
    "train_segmenter",
]
