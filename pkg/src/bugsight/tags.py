"""Bug kinds and their mask colours."""
from dataclasses import dataclass
from enum import Enum


class BugKind(str, Enum):
    CAMERA_CLIPPING = "camera_clipping"
    TEXTURE_CORRUPTION = "texture_corruption"
    TEXTURE_MISSING = "texture_missing"
    Z_CLIPPING = "z_clipping"
    Z_FIGHTING = "z_fighting"
    GEOMETRY_CORRUPTION = "geometry_corruption"
    BLACK_SCREEN = "black_screen"
    SCREEN_TEAR = "screen_tear"
    GEOMETRY_CLIPPING = "geometry_clipping"
    BOUNDARY_HOLE = "boundary_hole"

    @property
    def label(self) -> int:
        """Integer id used in label buffers; 0 is reserved for 'no bug'."""
        return _ORDER.index(self) + 1

    @classmethod
    def parse(cls, text: str) -> "BugKind":
        key = text.strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown bug kind {text!r} (expected one of: {names})") from None


_ORDER = list(BugKind)

BACKGROUND = (0, 0, 0)

TAG_COLORS = {
    BugKind.CAMERA_CLIPPING: (255, 0, 0),
    BugKind.TEXTURE_CORRUPTION: (0, 255, 0),
    BugKind.TEXTURE_MISSING: (0, 0, 255),
    BugKind.Z_CLIPPING: (255, 255, 0),
    BugKind.Z_FIGHTING: (0, 255, 255),
    BugKind.GEOMETRY_CORRUPTION: (255, 0, 255),
    BugKind.BLACK_SCREEN: (255, 255, 255),
    BugKind.SCREEN_TEAR: (255, 128, 0),
    BugKind.GEOMETRY_CLIPPING: (128, 0, 255),
    BugKind.BOUNDARY_HOLE: (0, 128, 255),
}


def kind_from_label(label: int) -> BugKind:
    return _ORDER[label - 1]


@dataclass(frozen=True)
class BugTag:
    kind: BugKind
    color: tuple

    def __post_init__(self):
        color = tuple(int(c) for c in self.color)
        if len(color) != 3 or any(not 0 <= c <= 255 for c in color):
            raise ValueError(f"tag colour must be an RGB byte triple, got {self.color!r}")
        if color == BACKGROUND:
            raise ValueError("tag colour may not equal the mask background (black)")
        object.__setattr__(self, "color", color)

    @classmethod
    def for_kind(cls, kind) -> "BugTag":
        kind = BugKind(kind)
        return cls(kind, TAG_COLORS[kind])


def label_palette():
    """``(11, 3)`` uint8 lookup table from label id to mask colour."""
    import numpy as np

    pal = np.zeros((len(_ORDER) + 1, 3), dtype=np.uint8)
    for kind in _ORDER:
        pal[kind.label] = TAG_COLORS[kind]
    return pal
