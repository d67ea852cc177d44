"""Sorted-integer set intersection on emulated vector intersection masks."""

from .dispatch import (
    CapabilitySet,
    Implementation,
    KernelChoice,
    Policy,
    detect_capabilities,
    select_kernel,
)
from .driver import (
    IntersectionResult,
    SortedRun,
    advance_counts,
    intersect_runs,
    intersect_size,
    scalar_tail_intersect,
)
from .errors import (
    InvalidArgumentError,
    UnsupportedCapabilityError,
    UnsupportedGeometryError,
    ValidationError,
    VecsectError,
)
from .geometry import DEFAULT_GEOMETRY, GEOMETRIES, KernelGeometry, parse_geometry
from .kernels import (
    IntersectMask,
    LaneVector,
    MemoryOperand,
    fast_first_mask,
    mask_rotate_left,
    memory_first_mask,
    naive_first_mask,
    oracle_two_masks,
    rotate_blocks,
    rotate_within_blocks,
    strict_two_masks,
)

__version__ = "0.1.0"
