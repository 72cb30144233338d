"""Body parts and the category tables built from them."""

from __future__ import annotations

from enum import IntEnum
from typing import Any

import numpy as np
import numpy.typing as nty
from pydantic import BaseModel, Field, model_validator

from grnparse.errors import ConfigError
from grnparse.tech import PRESETS

__all__ = [
    "PART",
    "Category",
    "CategoryTable",
    "get_category_table",
]


class PART(IntEnum):
    """Parts the renderer draws. With ``c = 8`` every part is its own category."""

    BACKGROUND = 0
    HEAD = 1
    TORSO = 2
    LEFT_ARM = 3
    RIGHT_ARM = 4
    LEFT_LEG = 5
    RIGHT_LEG = 6
    CLOTHES = 7


PART_COLOR: dict[PART, tuple[int, int, int]] = {
    PART.BACKGROUND: (0, 0, 0),
    PART.HEAD: (128, 0, 0),
    PART.TORSO: (255, 85, 0),
    PART.LEFT_ARM: (51, 170, 221),
    PART.RIGHT_ARM: (0, 255, 255),
    PART.LEFT_LEG: (85, 255, 170),
    PART.RIGHT_LEG: (170, 255, 85),
    PART.CLOTHES: (0, 0, 255),
}

# Parts a spot of local noise turns into, most plausible first.
CONFUSABLE: dict[PART, tuple[PART, ...]] = {
    PART.HEAD: (PART.TORSO,),
    PART.TORSO: (PART.CLOTHES, PART.HEAD, PART.LEFT_ARM),
    PART.CLOTHES: (PART.TORSO, PART.LEFT_ARM),
    PART.LEFT_ARM: (PART.CLOTHES, PART.TORSO),
    PART.RIGHT_ARM: (PART.CLOTHES, PART.TORSO),
    PART.LEFT_LEG: (PART.CLOTHES, PART.TORSO),
    PART.RIGHT_LEG: (PART.CLOTHES, PART.TORSO),
}

B, H, T, LA, RA, LL, RL, CL = PART

_GROUPING: dict[int, list[tuple[str, tuple[PART, ...]]]] = {
    8: [
        ("background", (B,)),
        ("head", (H,)),
        ("torso", (T,)),
        ("left_arm", (LA,)),
        ("right_arm", (RA,)),
        ("left_leg", (LL,)),
        ("right_leg", (RL,)),
        ("clothes", (CL,)),
    ],
    7: [
        ("background", (B,)),
        ("head", (H,)),
        ("torso", (T, CL)),
        ("left_arm", (LA,)),
        ("right_arm", (RA,)),
        ("left_leg", (LL,)),
        ("right_leg", (RL,)),
    ],
    6: [
        ("background", (B,)),
        ("head", (H,)),
        ("torso", (T,)),
        ("left", (LA, LL)),
        ("right", (RA, RL)),
        ("clothes", (CL,)),
    ],
    5: [
        ("background", (B,)),
        ("head", (H,)),
        ("torso", (T, CL)),
        ("left", (LA, LL)),
        ("right", (RA, RL)),
    ],
    4: [
        ("background", (B,)),
        ("torso", (T, H, CL)),
        ("left", (LA, LL)),
        ("right", (RA, RL)),
    ],
}


class Category(BaseModel):
    """One label id.

    Parameters:
        id: label value stored in masks.
        name: unique category name.
        parts: rendered parts carrying this label; the first one is primary.
        color: RGB used when exporting masks.
    """

    id: int = Field(ge=0)
    name: str
    parts: tuple[PART, ...]
    color: tuple[int, int, int]

    @property
    def primary(self) -> PART:
        return self.parts[0]


class CategoryTable(BaseModel):
    """Ordered categories with left/right pairing metadata.

    Parameters:
        categories: categories keyed by name, in id order.
    """

    categories: dict[str, Category] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_ids(self) -> CategoryTable:
        ids = [cat.id for cat in self.categories.values()]
        if ids != list(range(len(ids))):
            raise ValueError(f"category ids must be 0..c-1 in order, got {ids}")
        if ids and PART.BACKGROUND not in self[0].parts:
            raise ValueError("category 0 must be background")
        parts = [p for cat in self.categories.values() for p in cat.parts]
        if len(parts) != len(set(parts)):
            raise ValueError(f"a part belongs to more than one category: {parts}")
        return self

    @property
    def c(self) -> int:
        return len(self.categories)

    @property
    def names(self) -> list[str]:
        return list(self.categories)

    def __getitem__(self, key: str | int) -> Category:
        """Access a category by name or id."""
        if isinstance(key, int):
            if not 0 <= key < self.c:
                raise ValueError(f"category id {key} not in [0, {self.c})")
            return list(self.categories.values())[key]
        if key not in self.categories:
            raise ValueError(f"{key!r} not in {self.names}")
        return self.categories[key]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        """``(left_id, right_id)`` for every ``left*``/``right*`` name pair."""
        result = []
        for name, cat in self.categories.items():
            if name.startswith("left"):
                mirror = "right" + name[len("left") :]
                if mirror in self.categories:
                    result.append((cat.id, self.categories[mirror].id))
        return result

    def part_lookup(self) -> nty.NDArray[np.intp]:
        """Array mapping every :class:`PART` value to its category id."""
        lookup = np.full(len(PART), -1, dtype=np.intp)
        for cat in self.categories.values():
            for part in cat.parts:
                lookup[part] = cat.id
        if (lookup < 0).any():
            missing = [PART(i).name for i in np.flatnonzero(lookup < 0)]
            raise ConfigError(f"parts without category: {missing}")
        return lookup

    def labels_from_parts(self, part_map: nty.ArrayLike) -> nty.NDArray[np.uint8]:
        return self.part_lookup()[np.asarray(part_map)].astype(np.uint8)

    def flip_lookup(self) -> nty.NDArray[np.intp]:
        """Permutation of ids exchanging every left/right pair."""
        lookup = np.arange(self.c, dtype=np.intp)
        for left, right in self.pairs:
            lookup[left], lookup[right] = right, left
        return lookup

    def confusion_map(self) -> dict[int, int]:
        """Category each non-background category is confused with by local noise."""
        part_to_id = self.part_lookup()
        result = {}
        for cat in list(self.categories.values())[1:]:
            candidates = [
                int(part_to_id[p])
                for part in cat.parts
                for p in CONFUSABLE[part]
                if part_to_id[p] != cat.id
            ]
            if not candidates:
                raise ConfigError(f"category {cat.name!r} has no confusable category")
            result[cat.id] = candidates[0]
        return result

    def palette(self) -> dict[int, tuple[int, int, int]]:
        return {cat.id: cat.color for cat in self.categories.values()}

    def to_dict(self) -> dict[str, dict[str, Any]]:
        return {name: cat.model_dump() for name, cat in self.categories.items()}


def get_category_table(c: int = PRESETS.desk_c) -> CategoryTable:
    """Returns the category table for ``c`` categories.

    Fewer than eight categories merge parts: clothes into torso, arms and legs
    into a left and a right side, and with ``c = 4`` the head into torso.

    Args:
        c: number of categories, 4 to 8.
    """
    if c not in _GROUPING:
        raise ConfigError(
            f"category count must lie in [{min(_GROUPING)}, {max(_GROUPING)}], got {c}"
        )
    return CategoryTable(
        categories={
            name: Category(id=i, name=name, parts=parts, color=PART_COLOR[parts[0]])
            for i, (name, parts) in enumerate(_GROUPING[c])
        }
    )


if __name__ == "__main__":
    table = get_category_table()
    print(table.names)
    print(table.pairs)
    print(table.confusion_map())
