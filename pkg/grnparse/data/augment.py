"""Training-time augmentation: horizontal flips, random scaling and cropping."""

from __future__ import annotations

import numpy as np
import numpy.typing as nty
from pydantic import BaseModel
from scipy import ndimage

from grnparse.errors import ConfigError, ContractViolation
from grnparse.tech import PRESETS

__all__ = ["AugmentConfig", "augment", "flip_sample", "scale_crop"]

F64 = nty.NDArray[np.float64]
U8 = nty.NDArray[np.uint8]


class AugmentConfig(BaseModel):
    """Augmentation switches.

    Parameters:
        flip: mirror half of the samples, swapping paired left/right ids.
        scale: rescale by a random factor, then crop or pad back to size.
        scale_range: factor bounds.
    """

    flip: bool = True
    scale: bool = True
    scale_range: tuple[float, float] = PRESETS.scale_range

    @property
    def enabled(self) -> bool:
        return self.flip or self.scale


def flip_sample(
    image: F64, label: U8, flip_lookup: nty.NDArray[np.intp]
) -> tuple[F64, U8]:
    """Mirrors left to right and exchanges paired ids through ``flip_lookup``."""
    if image.ndim != 3 or image.shape[1:] != label.shape:
        raise ContractViolation(f"image {image.shape} does not match label {label.shape}")
    mirrored = flip_lookup[label[:, ::-1]].astype(np.uint8)
    return np.ascontiguousarray(image[:, :, ::-1]), mirrored


def scale_crop(
    image: F64, label: U8, factor: float, rng: np.random.Generator
) -> tuple[F64, U8]:
    """Zooms by ``factor`` and crops (or zero-pads) back to the input size.

    Images are interpolated linearly, labels with nearest neighbour.
    """
    if factor <= 0:
        raise ConfigError(f"scale factor must be positive, got {factor}")
    _, h, w = image.shape
    zoomed = np.clip(ndimage.zoom(image, (1, factor, factor), order=1), 0, 1)
    zlabel = ndimage.zoom(label, factor, order=0)
    zh, zw = zlabel.shape
    out_image = np.zeros_like(image)
    out_label = np.zeros_like(label)
    # offsets of the crop window in the zoomed map, or of the zoomed map in the output
    dy = int(rng.integers(0, abs(zh - h) + 1))
    dx = int(rng.integers(0, abs(zw - w) + 1))
    src_y = slice(dy, dy + h) if zh >= h else slice(0, zh)
    src_x = slice(dx, dx + w) if zw >= w else slice(0, zw)
    dst_y = slice(0, h) if zh >= h else slice(dy, dy + zh)
    dst_x = slice(0, w) if zw >= w else slice(dx, dx + zw)
    out_image[:, dst_y, dst_x] = zoomed[:, src_y, src_x]
    out_label[dst_y, dst_x] = zlabel[src_y, src_x]
    return out_image, out_label


def augment(
    image: F64,
    label: U8,
    config: AugmentConfig,
    flip_lookup: nty.NDArray[np.intp],
    rng: np.random.Generator,
) -> tuple[F64, U8]:
    if config.flip and rng.random() < 0.5:
        image, label = flip_sample(image, label, flip_lookup)
    if config.scale:
        low, high = config.scale_range
        image, label = scale_crop(image, label, float(rng.uniform(low, high)), rng)
    return image, label
