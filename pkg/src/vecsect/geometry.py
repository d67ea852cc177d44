"""Vector geometries: a vector width paired with a lane width."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

BLOCK_BITS = 128
VECTOR_WIDTHS = (128, 256, 512)
LANE_WIDTHS = (16, 32, 64)

_DTYPES = {16: np.dtype(np.uint16), 32: np.dtype(np.uint32), 64: np.dtype(np.uint64)}
_INTRINSIC_PREFIX = {128: "_mm", 256: "_mm256", 512: "_mm512"}


@dataclass(frozen=True, order=True)
class KernelGeometry:
    """A (vector_bits, lane_bits) pair and the lane/block counts it implies.

    ``lane_count`` (L) lanes are grouped into ``block_count`` (G) 128-bit
    blocks of ``block_lanes`` (g) lanes each.
    """

    vector_bits: int
    lane_bits: int

    def __post_init__(self):
        if self.vector_bits not in VECTOR_WIDTHS:
            raise InvalidArgumentError(
                f"vector_bits must be one of {VECTOR_WIDTHS}, got {self.vector_bits}"
            )
        if self.lane_bits not in LANE_WIDTHS:
            raise InvalidArgumentError(
                f"lane_bits must be one of {LANE_WIDTHS}, got {self.lane_bits}"
            )

    @property
    def lane_count(self) -> int:
        return self.vector_bits // self.lane_bits

    @property
    def block_lanes(self) -> int:
        return BLOCK_BITS // self.lane_bits

    @property
    def block_count(self) -> int:
        return self.vector_bits // BLOCK_BITS

    @property
    def full_mask(self) -> int:
        return (1 << self.lane_count) - 1

    @property
    def dtype(self) -> np.dtype:
        return _DTYPES[self.lane_bits]

    @property
    def name(self) -> str:
        return f"{self.vector_bits}x{self.lane_bits}"

    @property
    def intrinsic_name(self) -> str:
        return f"{_INTRINSIC_PREFIX[self.vector_bits]}_2intersect_epi{self.lane_bits}_mask"

    def __str__(self) -> str:
        return self.name


def table_order_key(geometry: KernelGeometry) -> tuple[int, int]:
    """Sort key: widest vectors first, then narrowest lanes."""
    return (-geometry.vector_bits, geometry.lane_bits)


GEOMETRIES: tuple[KernelGeometry, ...] = tuple(
    sorted(
        (KernelGeometry(v, w) for v in VECTOR_WIDTHS for w in LANE_WIDTHS),
        key=table_order_key,
    )
)

DEFAULT_GEOMETRY = KernelGeometry(512, 32)


def parse_geometry(text: str) -> KernelGeometry:
    """Parse ``"512x32"`` style geometry strings."""
    try:
        vector_bits, lane_bits = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise InvalidArgumentError(
            f"geometry must look like <vector_bits>x<lane_bits>, got {text!r}"
        ) from None
    return KernelGeometry(vector_bits, lane_bits)


def lane_dtype(lane_bits: int) -> np.dtype:
    try:
        return _DTYPES[lane_bits]
    except KeyError:
        raise InvalidArgumentError(
            f"lane_bits must be one of {LANE_WIDTHS}, got {lane_bits}"
        ) from None
