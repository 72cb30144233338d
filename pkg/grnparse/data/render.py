"""Stick-figure renderer.

A figure is a list of capsules (a segment with a radius, a disc when both
ends coincide) drawn back to front. Arms and legs share their colour across
sides, so telling left from right relies on the pose and on a face marker that
is only visible when the figure faces the camera. In a back view the limbs of
the anatomical left side appear on the image left.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as nty

from grnparse.data.netpbm import quantize
from grnparse.parts import PART

__all__ = ["Capsule", "Figure", "render_figure", "sample_pose"]

BASE_COLOR: dict[PART, tuple[float, float, float]] = {
    PART.HEAD: (0.93, 0.78, 0.62),
    PART.TORSO: (0.80, 0.22, 0.18),
    PART.CLOTHES: (0.74, 0.27, 0.22),
    PART.LEFT_ARM: (0.88, 0.70, 0.55),
    PART.RIGHT_ARM: (0.88, 0.70, 0.55),
    PART.LEFT_LEG: (0.20, 0.28, 0.62),
    PART.RIGHT_LEG: (0.20, 0.28, 0.62),
}
FACE_COLOR = (0.10, 0.08, 0.08)
LIMBS = (PART.LEFT_ARM, PART.RIGHT_ARM, PART.LEFT_LEG, PART.RIGHT_LEG)
Point = tuple[float, float]


@dataclass(frozen=True)
class Capsule:
    """Pixels whose centre lies within ``radius`` of the segment ``p0``–``p1``.

    Points are ``(row, col)`` in pixel units.
    """

    part: PART
    p0: Point
    p1: Point
    radius: float

    def mask(self, height: int, width: int) -> nty.NDArray[np.bool_]:
        rows, cols = np.mgrid[0:height, 0:width] + 0.5
        a = np.asarray(self.p0)
        ab = np.asarray(self.p1) - a
        length2 = float(ab @ ab)
        if length2 == 0:
            t = np.zeros_like(rows)
        else:
            t = np.clip(((rows - a[0]) * ab[0] + (cols - a[1]) * ab[1]) / length2, 0, 1)
        dr = rows - (a[0] + t * ab[0])
        dc = cols - (a[1] + t * ab[1])
        return dr**2 + dc**2 <= self.radius**2


@dataclass(frozen=True)
class Figure:
    """One rendered sample.

    Attributes:
        image: colours [3×H×W], quantized to ``k/255``.
        parts: top-most :class:`PART` per pixel [H×W].
        capsules: shapes in drawing order.
        back_view: the figure faces away from the camera.
    """

    image: nty.NDArray[np.float64]
    parts: nty.NDArray[np.uint8]
    capsules: tuple[Capsule, ...]
    back_view: bool


def _polar(origin: Point, angle: float, length: float) -> Point:
    return origin[0] + length * np.cos(angle), origin[1] + length * np.sin(angle)


def sample_pose(
    rng: np.random.Generator,
    size: int,
    p_missing: float = 0.1,
    p_back_view: float = 0.3,
) -> tuple[list[Capsule], bool]:
    """Draws a randomized pose in drawing order.

    Args:
        rng: generator.
        size: image side length.
        p_missing: probability that each limb is left out.
        p_back_view: probability of a back view.
    """
    s = size / 64 * rng.uniform(0.85, 1.1)
    cy = size / 2 + rng.uniform(-3, 3) * size / 64
    cx = size / 2 + rng.uniform(-5, 5) * size / 64
    back_view = bool(rng.random() < p_back_view)
    # image column direction of the anatomical left side
    left = -1.0 if back_view else 1.0

    neck = (cy - 12 * s, cx)
    hip = (cy + 6 * s, cx)
    limbs = {
        PART.LEFT_LEG: ((hip[0], cx + left * 3 * s), left, 18 * s, 3.2 * s),
        PART.RIGHT_LEG: ((hip[0], cx - left * 3 * s), -left, 18 * s, 3.2 * s),
        PART.LEFT_ARM: ((neck[0] + 2 * s, cx + left * 6 * s), left, 14 * s, 2.6 * s),
        PART.RIGHT_ARM: ((neck[0] + 2 * s, cx - left * 6 * s), -left, 14 * s, 2.6 * s),
    }
    present = {part: rng.random() >= p_missing for part in LIMBS}

    capsules = []
    for part in (PART.LEFT_LEG, PART.RIGHT_LEG):
        origin, side, length, radius = limbs[part]
        angle = side * rng.uniform(0.05, 0.45)
        if present[part]:
            end = _polar(origin, angle, length)
            capsules.append(Capsule(part, origin, end, radius))
    capsules.append(Capsule(PART.TORSO, neck, hip, 6 * s))
    capsules.append(Capsule(PART.CLOTHES, (cy + 1 * s, cx), (cy + 9 * s, cx), 7 * s))
    for part in (PART.LEFT_ARM, PART.RIGHT_ARM):
        origin, side, length, radius = limbs[part]
        angle = side * rng.uniform(0.3, 2.4)
        if present[part]:
            end = _polar(origin, angle, length)
            capsules.append(Capsule(part, origin, end, radius))
    head = (cy - 18.5 * s, cx)
    capsules.append(Capsule(PART.HEAD, head, head, 5.5 * s))
    return capsules, back_view


def render_figure(
    rng: np.random.Generator,
    size: int,
    p_missing: float = 0.1,
    p_back_view: float = 0.3,
    jitter: float = 0.05,
    background_level: float = 0.35,
) -> Figure:
    """Renders one figure on a noise background."""
    capsules, back_view = sample_pose(rng, size, p_missing, p_back_view)
    image = rng.uniform(0, background_level, size=(3, size, size))
    parts = np.zeros((size, size), dtype=np.uint8)
    for capsule in capsules:
        mask = capsule.mask(size, size)
        color = np.clip(
            np.asarray(BASE_COLOR[capsule.part]) + rng.uniform(-jitter, jitter, 3), 0, 1
        )
        image[:, mask] = color[:, None]
        parts[mask] = capsule.part
    if not back_view:
        head = capsules[-1]
        for side in (-1, 1):
            y0, x0 = head.p0
            eye = (y0 - 0.2 * head.radius, x0 + side * 0.4 * head.radius)
            marker = Capsule(PART.HEAD, eye, eye, max(0.8, 0.22 * head.radius))
            image[:, marker.mask(size, size)] = np.asarray(FACE_COLOR)[:, None]
    image += rng.normal(0, 0.02, size=image.shape)
    return Figure(quantize(image), parts, tuple(capsules), back_view)


if __name__ == "__main__":
    figure = render_figure(np.random.default_rng(0), 64)
    print(figure.back_view, np.bincount(figure.parts.ravel(), minlength=len(PART)))
