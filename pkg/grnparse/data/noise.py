"""Controlled corruption of label maps.

Two error types are injected:

- global structure errors swap whole paired parts, e.g. every left-arm pixel
  becomes right-arm and the other way round;
- local consistency errors relabel small discs inside a part to the category
  that part is most easily confused with.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
import numpy.typing as nty
from pydantic import BaseModel, Field
from scipy import ndimage

from grnparse.errors import ConfigError, ContractViolation
from grnparse.parts import CategoryTable

__all__ = [
    "NoiseConfig",
    "corrupt",
    "disc_footprint",
    "inject_global_error",
    "inject_local_error",
]

U8 = nty.NDArray[np.uint8]


class NoiseConfig(BaseModel):
    """Corruption strength.

    Parameters:
        p_swap: probability of swapping each left/right pair.
        k_spots: number of local discs per label map.
        radius: disc radius in pixels.
    """

    p_swap: float = Field(default=0.5, ge=0, le=1)
    k_spots: int = Field(default=3, ge=0)
    radius: float = Field(default=3.0, ge=0)


def _check_label(label: nty.ArrayLike) -> U8:
    y = np.asarray(label)
    if y.ndim != 2:
        raise ContractViolation(f"label must be [H×W], got {y.shape}")
    return y.astype(np.uint8)


def inject_global_error(
    label: nty.ArrayLike,
    pairs: Sequence[tuple[int, int]],
    p_swap: float,
    rng: np.random.Generator,
) -> U8:
    """Swaps every pair of ids with probability ``p_swap``.

    One uniform number is drawn per pair whatever ``p_swap`` is, so the draws
    of later pairs do not depend on it.
    """
    y = _check_label(label)
    if not 0 <= p_swap <= 1:
        raise ConfigError(f"p_swap must lie in [0, 1], got {p_swap}")
    seen: set[int] = set()
    for left, right in pairs:
        if left == right or left in seen or right in seen or 0 in (left, right):
            raise ConfigError(f"pair ({left}, {right}) is not a left/right pair in {pairs}")
        seen.update((left, right))
    lookup = np.arange(256, dtype=np.uint8)
    for left, right in pairs:
        if rng.random() < p_swap:
            lookup[left], lookup[right] = right, left
    return lookup[y]


def disc_footprint(radius: float) -> nty.NDArray[np.bool_]:
    """Offsets ``(dy, dx)`` with ``dy² + dx² <= radius²``."""
    r = int(np.floor(radius))
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    return dy**2 + dx**2 <= radius**2


def inject_local_error(
    label: nty.ArrayLike,
    k_spots: int,
    radius: float,
    confusion_map: Mapping[int, int],
    rng: np.random.Generator,
) -> U8:
    """Relabels ``k_spots`` discs lying fully inside a non-background part.

    Disc centres are drawn among pixels whose whole disc carries the same
    non-background id in ``label``; the disc takes ``confusion_map[id]``.
    """
    y = _check_label(label)
    if k_spots < 0:
        raise ConfigError(f"k_spots must be >= 0, got {k_spots}")
    if radius < 0:
        raise ConfigError(f"radius must be >= 0, got {radius}")
    present = {int(i) for i in np.unique(y) if i != 0}
    missing = sorted(present - set(confusion_map))
    if missing:
        raise ConfigError(f"confusion_map has no entry for ids {missing}")
    if k_spots == 0:
        return y.copy()

    footprint = disc_footprint(radius)
    inside = np.zeros(y.shape, dtype=bool)
    for i in present:
        inside |= ndimage.binary_erosion(y == i, structure=footprint, border_value=0)
    centres = np.argwhere(inside)
    out = y.copy()
    if not len(centres):
        return out
    chosen = centres[rng.choice(len(centres), size=k_spots, replace=True)]
    r = footprint.shape[0] // 2
    for cy, cx in chosen:
        host = int(y[cy, cx])
        window = out[cy - r : cy + r + 1, cx - r : cx + r + 1]
        window[footprint] = confusion_map[host]
    return out


def corrupt(
    label: nty.ArrayLike,
    table: CategoryTable,
    config: NoiseConfig,
    rng: np.random.Generator,
) -> U8:
    """Local spots on the clean map followed by global swaps."""
    spotted = inject_local_error(
        label, config.k_spots, config.radius, table.confusion_map(), rng
    )
    return inject_global_error(spotted, table.pairs, config.p_swap, rng)


if __name__ == "__main__":
    from grnparse.parts import get_category_table

    table = get_category_table()
    clean = np.zeros((16, 16), dtype=np.uint8)
    clean[2:14, 2:8], clean[2:14, 8:14] = 3, 4
    noisy = corrupt(clean, table, NoiseConfig(p_swap=1.0), np.random.default_rng(0))
    print((noisy != clean).sum())
