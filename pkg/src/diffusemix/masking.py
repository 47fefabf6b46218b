"""Binary half-plane masks and the masked concatenation of two images.

A mask selects, pixel by pixel, whether the hybrid image takes its value
from the generated image (mask = 1) or the original (mask = 0).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .imgcore import ImageBuffer


class MaskKind(enum.Enum):
    LEFT_ON = "left_on"
    RIGHT_ON = "right_on"
    TOP_ON = "top_on"
    BOTTOM_ON = "bottom_on"

    def flip(self) -> "MaskKind":
        """Complement kind; an involution."""
        return _COMPLEMENT[self]


_COMPLEMENT = {
    MaskKind.LEFT_ON: MaskKind.RIGHT_ON,
    MaskKind.RIGHT_ON: MaskKind.LEFT_ON,
    MaskKind.TOP_ON: MaskKind.BOTTOM_ON,
    MaskKind.BOTTOM_ON: MaskKind.TOP_ON,
}


class MaskSet(enum.Enum):
    """Which mask kinds a run may draw from."""

    VERTICAL_ONLY = "vertical"
    VERTICAL_HORIZONTAL = "vertical_horizontal"
    FULL = "full"

    @property
    def kinds(self) -> tuple:
        return _SET_KINDS[self]

    @classmethod
    def parse(cls, text: str) -> "MaskSet":
        for member in cls:
            if member.value == text:
                return member
        valid = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown mask set {text!r} (expected one of: {valid})")


_SET_KINDS = {
    MaskSet.VERTICAL_ONLY: (MaskKind.LEFT_ON,),
    MaskSet.VERTICAL_HORIZONTAL: (MaskKind.LEFT_ON, MaskKind.TOP_ON),
    MaskSet.FULL: (
        MaskKind.LEFT_ON,
        MaskKind.RIGHT_ON,
        MaskKind.TOP_ON,
        MaskKind.BOTTOM_ON,
    ),
}


@dataclass(frozen=True)
class Mask:
    """Single-channel plane of exact zeros and ones."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.array(self.bits, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-d, got shape {arr.shape}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("mask values must be exactly 0 or 1")
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def complement(self) -> "Mask":
        return Mask(1 - self.bits)


def make_mask(w: int, h: int, kind: MaskKind) -> Mask:
    """Half-plane mask of dimensions (w, h).

    The split index is floor(d/2), so for odd dimensions the left/top
    variants carry floor(d/2) on-pixels and their complements the rest.
    """
    if w < 1 or h < 1:
        raise ValueError(f"mask dimensions must be >= 1, got {w}x{h}")
    bits = np.zeros((h, w), dtype=np.uint8)
    if kind is MaskKind.LEFT_ON:
        bits[:, : w // 2] = 1
    elif kind is MaskKind.RIGHT_ON:
        bits[:, w // 2 :] = 1
    elif kind is MaskKind.TOP_ON:
        bits[: h // 2, :] = 1
    elif kind is MaskKind.BOTTOM_ON:
        bits[h // 2 :, :] = 1
    else:
        raise ValueError(f"unknown mask kind: {kind}")
    return Mask(bits)


def concatenate(original: ImageBuffer, generated: ImageBuffer, mask: Mask) -> ImageBuffer:
    """Hybrid image: generated where mask = 1, original where mask = 0.

    Because the mask is binary this selection equals the arithmetic form
    generated*mask + original*(1 - mask) exactly; pixels on the mask-0 side
    are bit-identical to the original.
    """
    if not original.same_dims(generated):
        raise DimensionMismatch(
            f"original {original.width}x{original.height} vs "
            f"generated {generated.width}x{generated.height}"
        )
    if mask.width != original.width or mask.height != original.height:
        raise DimensionMismatch(
            f"mask {mask.width}x{mask.height} vs image "
            f"{original.width}x{original.height}"
        )
    selector = mask.bits.astype(bool)[:, :, None]
    return ImageBuffer(np.where(selector, generated.data, original.data))


def sample_mask_kind(mask_set: MaskSet, rng: np.random.Generator) -> MaskKind:
    """Uniform draw from the configured kinds; deterministic per rng state."""
    kinds = mask_set.kinds
    return kinds[int(rng.integers(len(kinds)))]
