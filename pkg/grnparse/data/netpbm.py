"""Binary PPM (P6) and PGM (P5) images with ``maxval`` 255, read and written by Pillow.

Images live in memory as float ``[3×H×W]`` arrays with values ``k/255``;
label maps are ``uint8 [H×W]`` arrays written as PGM gray values.
"""

from __future__ import annotations

import io
import pathlib

import numpy as np
import numpy.typing as nty
from PIL import Image

from grnparse.errors import FormatError

__all__ = [
    "decode_pgm",
    "decode_ppm",
    "encode_pgm",
    "encode_ppm",
    "image_to_rgb",
    "quantize",
    "read_image",
    "read_pgm",
    "read_ppm",
    "rgb_to_image",
    "write_image",
    "write_pgm",
    "write_ppm",
]

U8 = nty.NDArray[np.uint8]

CHANNELS = {"RGB": 3, "L": 1}


def _encode(pixels: U8) -> bytes:
    if not pixels.size:
        raise FormatError(f"empty image {pixels.shape}")
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(buf, format="PPM")
    return buf.getvalue()


def _decode(blob: bytes, mode: str) -> U8:
    """Decodes one binary netpbm image of ``mode``.

    Pillow accepts any ``maxval`` and ignores bytes after the raster; both are
    rejected here.
    """
    try:
        with Image.open(io.BytesIO(blob), formats=["PPM"]) as img:
            if img.mode != mode:
                raise FormatError(f"expected a {mode} image, got {img.mode}")
            w, h = img.size
            if w < 1 or h < 1:
                raise FormatError(f"empty image {w}×{h}")
            codec, _, offset, args = img.tile[0]
            rawmode = args if isinstance(args, str) else args[0]
            if codec != "raw" or rawmode != mode:
                raise FormatError("only maxval 255 is supported")
            size = w * h * CHANNELS[mode]
            if len(blob) - offset != size:
                raise FormatError(
                    f"raster has {len(blob) - offset} bytes, expected {size}"
                )
            return np.asarray(img, dtype=np.uint8).copy()
    except (OSError, ValueError, SyntaxError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"malformed netpbm image: {e}") from e


def encode_ppm(rgb: nty.ArrayLike) -> bytes:
    pixels = np.asarray(rgb)
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise FormatError(f"PPM needs uint8 [H×W×3], got {pixels.dtype} {pixels.shape}")
    return _encode(pixels)


def decode_ppm(blob: bytes) -> U8:
    return _decode(blob, "RGB")


def encode_pgm(gray: nty.ArrayLike) -> bytes:
    pixels = np.asarray(gray)
    if pixels.ndim != 2:
        raise FormatError(f"PGM needs [H×W], got {pixels.shape}")
    if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
        raise FormatError("PGM values must lie in [0, 255]")
    return _encode(pixels.astype(np.uint8))


def decode_pgm(blob: bytes) -> U8:
    return _decode(blob, "L")


def write_ppm(path: str | pathlib.Path, rgb: nty.ArrayLike) -> pathlib.Path:
    path = pathlib.Path(path)
    path.write_bytes(encode_ppm(rgb))
    return path


def read_ppm(path: str | pathlib.Path) -> U8:
    return decode_ppm(pathlib.Path(path).read_bytes())


def write_pgm(path: str | pathlib.Path, gray: nty.ArrayLike) -> pathlib.Path:
    path = pathlib.Path(path)
    path.write_bytes(encode_pgm(gray))
    return path


def read_pgm(path: str | pathlib.Path) -> U8:
    return decode_pgm(pathlib.Path(path).read_bytes())


def quantize(image: nty.ArrayLike) -> nty.NDArray[np.float64]:
    """Rounds values in [0, 1] to the nearest ``k/255``."""
    return np.round(np.clip(np.asarray(image, dtype=np.float64), 0, 1) * 255) / 255


def image_to_rgb(image: nty.ArrayLike) -> U8:
    """Float ``[3×H×W]`` in [0, 1] to ``uint8 [H×W×3]``."""
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != 3:
        raise FormatError(f"image must be [3×H×W], got {x.shape}")
    return np.round(np.clip(x, 0, 1) * 255).astype(np.uint8).transpose(1, 2, 0)


def rgb_to_image(rgb: U8) -> nty.NDArray[np.float64]:
    return rgb.transpose(2, 0, 1).astype(np.float64) / 255


def write_image(path: str | pathlib.Path, image: nty.ArrayLike) -> pathlib.Path:
    return write_ppm(path, image_to_rgb(image))


def read_image(path: str | pathlib.Path) -> nty.NDArray[np.float64]:
    return rgb_to_image(read_ppm(path))
