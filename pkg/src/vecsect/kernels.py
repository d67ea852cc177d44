"""Two-way intersection-mask kernels over emulated vector registers.

A register is a 1-D numpy array of ``L`` unsigned lanes, lane 0 first. Masks
are plain ints with bit ``i`` describing lane ``i``. Every kernel below is a
numba-compiled scalar loop, so all of them run on any CPU; the public wrappers
validate geometry and wrap results in :class:`IntersectMask`.

Kernel family
-------------
oracle    both masks by the exhaustive L x L double loop (ground truth)
naive     broadcast each lane of ``b``, compare against ``a``, OR the masks
fast      G block rotations of ``a`` x g in-block rotations of ``b``; each
          rotation group is folded with chained not-equal compares, mapped
          back to ``a``'s lane order by a mask rotation, ANDed, complemented
memory    ``b`` read lane by lane from memory; not-equal compares chained in
          three independent strands, complement of the final three masks
strict    both masks at 512x32, second mask rebuilt from per-rotation ORs
scalar    per-lane linear scan with early exit
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InvalidArgumentError, UnsupportedGeometryError
from .geometry import KernelGeometry

# Kernel codes understood by the compiled dispatcher.
SCALAR = 0
NAIVE = 1
FAST = 2
MEMORY = 3
OR_FORM = 4

KERNEL_CODES = {
    "scalar": SCALAR,
    "naive": NAIVE,
    "fast": FAST,
    "memory": MEMORY,
    "or_form": OR_FORM,
}

MEMORY_CHAIN_DEPTH = 3  # strands are unrolled below; changing this needs code


# ---------------------------------------------------------------------------
# compiled primitives
# ---------------------------------------------------------------------------


# L and g are powers of two, so "mod" is a bit mask


@njit(cache=True)
def _rotate_blocks_into(a, k_blocks, g, out):
    n = a.shape[0]
    s = k_blocks * g
    for i in range(n):
        out[i] = a[(i + s) & (n - 1)]


@njit(cache=True)
def _rotate_within_blocks_into(b, j_lanes, g, out):
    low = g - 1
    for i in range(b.shape[0]):
        out[i] = b[(i & ~low) | ((i + j_lanes) & low)]


@njit(cache=True, inline="always")
def _rotl(m, k, n):
    return ((m << k) | (m >> (n - k))) & ((1 << n) - 1)


@njit(cache=True)
def _cmpeq(x, y):
    m = 0
    for i in range(x.shape[0]):
        if x[i] == y[i]:
            m |= 1 << i
    return m


@njit(cache=True)
def _mask_cmpneq(k, x, y):
    # lanes whose bit is clear in k stay clear
    m = 0
    for i in range(x.shape[0]):
        if x[i] != y[i]:
            m |= 1 << i
    return m & k


@njit(cache=True)
def _oracle_two(a, b):
    n = a.shape[0]
    ka = 0
    kb = 0
    for i in range(n):
        for j in range(n):
            match = 1 if a[i] == b[j] else 0
            ka |= match << i
            kb |= match << j
    return ka, kb


@njit(cache=True, inline="always")
def _scalar_first(a, b):
    m = 0
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            if a[i] == b[j]:
                m |= 1 << i
                break
    return m


@njit(cache=True, inline="always")
def _cmpeq_broadcast(x, v):
    m = 0
    for i in range(x.shape[0]):
        if x[i] == v:
            m |= 1 << i
    return m


@njit(cache=True, inline="always")
def _naive_first(a, b):
    m = 0
    for j in range(b.shape[0]):
        m |= _cmpeq_broadcast(a, b[j])
    return m


def scratch(geometry: KernelGeometry) -> np.ndarray:
    """Work buffer for the rotation-based kernels: G + g rows of L lanes."""
    return np.empty((geometry.block_count + geometry.block_lanes, geometry.lane_count), geometry.dtype)


@njit(cache=True, inline="always")
def _fill_rotations(a, b, G, g, work):
    # rows [0, G) hold the block rotations of a, rows [G, G + g) the
    # within-block rotations of b; row 0 of each set is the operand itself
    n = a.shape[0]
    low = g - 1
    for i in range(G):
        s = i * g
        for p in range(n):
            work[i, p] = a[(p + s) & (n - 1)]
    for j in range(g):
        for p in range(n):
            work[G + j, p] = b[(p & ~low) | ((p + j) & low)]


@njit(cache=True, inline="always")
def _neq_rows(k, work, r, q):
    # masked not-equal compare of work rows r and q; bits clear in k stay clear
    m = 0
    for p in range(work.shape[1]):
        if work[r, p] != work[q, p]:
            m |= 1 << p
    return m & k


@njit(cache=True, inline="always")
def _eq_rows(work, r, q):
    m = 0
    for p in range(work.shape[1]):
        if work[r, p] == work[q, p]:
            m |= 1 << p
    return m


@njit(cache=True, inline="always")
def _chained_and(a, b, G, g, work):
    """AND of the un-rotated chained not-equal masks (pre-complement)."""
    n = a.shape[0]
    full = (1 << n) - 1
    _fill_rotations(a, b, G, g, work)
    acc = full
    for i in range(G):
        m = full
        for j in range(g):
            m = _neq_rows(m, work, i, G + j)
        acc &= _rotl(m, i * g, n)
    return acc


@njit(cache=True, inline="always")
def _fast_first(a, b, G, g, work):
    return ~_chained_and(a, b, G, g, work) & ((1 << a.shape[0]) - 1)


@njit(cache=True)
def _group_or_masks(a, b, G, g, work):
    """Per a-rotation OR of equality masks, already rotated back to a's order."""
    n = a.shape[0]
    _fill_rotations(a, b, G, g, work)
    groups = np.zeros(G, np.int64)
    for i in range(G):
        m = 0
        for j in range(g):
            m |= _eq_rows(work, i, G + j)
        groups[i] = _rotl(m, i * g, n)
    return groups


@njit(cache=True)
def _or_form_first(a, b, G, g, work):
    m = 0
    groups = _group_or_masks(a, b, G, g, work)
    for i in range(G):
        m |= groups[i]
    return m


@njit(cache=True, inline="always")
def _memory_first(a, window):
    # compare t chains onto compare t - 3: three independent strands, each
    # starting from the all-ones mask (an unchained compare)
    n = a.shape[0]
    full = (1 << n) - 1
    s0 = full
    s1 = full
    s2 = full
    for t in range(n):
        v = window[t]
        m = full
        for i in range(n):
            if a[i] == v:
                m &= ~(1 << i)
        strand = t % MEMORY_CHAIN_DEPTH
        if strand == 0:
            s0 &= m
        elif strand == 1:
            s1 &= m
        else:
            s2 &= m
    # strands never written (L < 3) are all-ones and drop out of the AND
    return ~(s0 & s1 & s2) & full


@njit(cache=True)
def _strict_two_512x32(a, b, work):
    _fill_rotations(a, b, 4, 4, work)
    eq = np.empty((4, 4), np.int64)
    for i in range(4):
        for j in range(4):
            eq[i, j] = _eq_rows(work, i, 4 + j)
    rows = np.empty(4, np.int64)
    cols = np.empty(4, np.int64)
    for i in range(4):
        rows[i] = eq[i, 0] | eq[i, 1] | eq[i, 2] | eq[i, 3]
        cols[i] = eq[0, i] | eq[1, i] | eq[2, i] | eq[3, i]
    ka = rows[0] | _rotl(rows[1], 4, 16) | _rotl(rows[2], 8, 16) | _rotl(rows[3], 12, 16)
    m1 = cols[1]
    m2 = cols[2]
    m3 = cols[3]
    kb = (
        cols[0]
        | ((0x7777 & m1) << 1)
        | ((m1 >> 3) & 0x1111)
        | ((0x3333 & m2) << 2)
        | ((m2 >> 2) & 0x3333)
        | ((m3 >> 1) & 0x7777)
        | ((m3 & 0x1111) << 3)
    )
    return ka, kb


@njit(cache=True)
def first_mask_code(code, a, b, G, g, work):
    """Compiled dispatch on a kernel code; used by the driver's block loop."""
    if code == FAST:
        return _fast_first(a, b, G, g, work)
    elif code == MEMORY:
        return _memory_first(a, b)
    elif code == NAIVE:
        return _naive_first(a, b)
    elif code == OR_FORM:
        return _or_form_first(a, b, G, g, work)
    return _scalar_first(a, b)


@njit(cache=True)
def _batch_first(code, A, B, G, g, work, out):
    for r in range(A.shape[0]):
        out[r] = first_mask_code(code, A[r], B[r], G, g, work)


@njit(cache=True)
def _batch_chained_and(A, B, G, g, work, out):
    for r in range(A.shape[0]):
        out[r] = _chained_and(A[r], B[r], G, g, work)


@njit(cache=True)
def _batch_oracle(A, B, out_a, out_b):
    for r in range(A.shape[0]):
        out_a[r], out_b[r] = _oracle_two(A[r], B[r])


@njit(cache=True)
def _batch_strict(A, B, work, out_a, out_b):
    for r in range(A.shape[0]):
        out_a[r], out_b[r] = _strict_two_512x32(A[r], B[r], work)


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


def coerce_lanes(values, dtype: np.dtype) -> np.ndarray:
    """Convert ``values`` to a contiguous array of ``dtype``, rejecting overflow."""
    arr = np.asarray(values)
    if arr.dtype.kind == "f" and not isinstance(values, np.ndarray):
        # Python ints above 2**63 mixed with small ones come back as float64
        arr = np.asarray(values, dtype=object)
        if not all(isinstance(v, (int, np.integer)) for v in arr.ravel()):
            raise InvalidArgumentError("lanes must be integers")
    if arr.dtype == dtype:
        return np.ascontiguousarray(arr)
    if arr.size == 0:
        return np.empty(arr.shape, dtype)
    if arr.dtype.kind not in "iuO":
        raise InvalidArgumentError(f"lanes must be integers, got dtype {arr.dtype}")
    lo, hi = int(arr.min()), int(arr.max())
    info = np.iinfo(dtype)
    if lo < 0 or hi > info.max:
        raise InvalidArgumentError(
            f"lane values must lie in [0, {info.max}], got range [{lo}, {hi}]"
        )
    if arr.dtype.kind == "O":
        return np.array([int(v) for v in arr.ravel()], dtype).reshape(arr.shape)
    return arr.astype(dtype)


@dataclass(eq=False)
class LaneVector:
    """A register of ``geometry.lane_count`` unsigned lanes, lane 0 first."""

    geometry: KernelGeometry
    lanes: np.ndarray

    def __post_init__(self):
        self.lanes = coerce_lanes(self.lanes, self.geometry.dtype)
        if self.lanes.shape != (self.geometry.lane_count,):
            raise InvalidArgumentError(
                f"{self.geometry} vector needs {self.geometry.lane_count} lanes, "
                f"got shape {self.lanes.shape}"
            )

    def __eq__(self, other):
        if not isinstance(other, LaneVector):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(self.lanes, other.lanes)

    def tolist(self) -> list[int]:
        return [int(v) for v in self.lanes]


@dataclass(frozen=True)
class IntersectMask:
    geometry: KernelGeometry
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits <= self.geometry.full_mask:
            raise InvalidArgumentError(
                f"mask 0x{self.bits:x} has bits outside {self.geometry.lane_count} lanes"
            )

    def __int__(self) -> int:
        return self.bits

    def __index__(self) -> int:
        return self.bits

    def popcount(self) -> int:
        return self.bits.bit_count()

    def lanes(self) -> list[int]:
        """Indices of the set bits, ascending."""
        return [i for i in range(self.geometry.lane_count) if self.bits >> i & 1]

    def __repr__(self) -> str:
        width = (self.geometry.lane_count + 3) // 4
        return f"IntersectMask({self.geometry}, 0x{self.bits:0{width}x})"


@dataclass(eq=False)
class MemoryOperand:
    """Read-only window of lanes, read one lane at a time by the memory kernel."""

    lanes: np.ndarray = field()

    def __post_init__(self):
        self.lanes = np.asarray(self.lanes)
        if self.lanes.ndim != 1:
            raise InvalidArgumentError("memory operand must be one-dimensional")
        view = self.lanes.view()
        view.flags.writeable = False
        self.lanes = view

    @classmethod
    def window(cls, buffer: np.ndarray, offset: int, length: int) -> MemoryOperand:
        if offset < 0 or offset + length > len(buffer):
            raise InvalidArgumentError(
                f"window [{offset}, {offset + length}) exceeds buffer of {len(buffer)} lanes"
            )
        return cls(buffer[offset : offset + length])

    def __len__(self) -> int:
        return len(self.lanes)


# ---------------------------------------------------------------------------
# public kernel API
# ---------------------------------------------------------------------------


def _same_geometry(a: LaneVector, b: LaneVector) -> KernelGeometry:
    if a.geometry != b.geometry:
        raise InvalidArgumentError(f"geometry mismatch: {a.geometry} vs {b.geometry}")
    return a.geometry


def oracle_two_masks(a: LaneVector, b: LaneVector) -> tuple[IntersectMask, IntersectMask]:
    """Both intersection masks by comparing every lane pair."""
    geo = _same_geometry(a, b)
    ka, kb = _oracle_two(a.lanes, b.lanes)
    return IntersectMask(geo, int(ka)), IntersectMask(geo, int(kb))


def rotate_blocks(a: LaneVector, k_blocks: int) -> LaneVector:
    """Rotate whole 128-bit blocks toward lane 0: out[i] = a[(i + k*g) mod L]."""
    geo = a.geometry
    if not 0 <= k_blocks < geo.block_count:
        raise InvalidArgumentError(
            f"k_blocks must be in [0, {geo.block_count}), got {k_blocks}"
        )
    out = np.empty_like(a.lanes)
    _rotate_blocks_into(a.lanes, k_blocks, geo.block_lanes, out)
    return LaneVector(geo, out)


def rotate_within_blocks(b: LaneVector, j_lanes: int) -> LaneVector:
    """Rotate lanes inside every 128-bit block independently."""
    geo = b.geometry
    if not 0 <= j_lanes < geo.block_lanes:
        raise InvalidArgumentError(
            f"j_lanes must be in [0, {geo.block_lanes}), got {j_lanes}"
        )
    out = np.empty_like(b.lanes)
    _rotate_within_blocks_into(b.lanes, j_lanes, geo.block_lanes, out)
    return LaneVector(geo, out)


def mask_rotate_left(m: IntersectMask, k: int) -> IntersectMask:
    """L-bit left rotation. ``k`` outside ``[0, L)`` is an error, not wrapped."""
    n = m.geometry.lane_count
    if not 0 <= k < n:
        raise InvalidArgumentError(f"rotation must be in [0, {n}), got {k}")
    return IntersectMask(m.geometry, int(_rotl(m.bits, k, n)))


def naive_first_mask(a: LaneVector, b: LaneVector) -> IntersectMask:
    geo = _same_geometry(a, b)
    return IntersectMask(geo, int(_naive_first(a.lanes, b.lanes)))


def fast_first_mask(a: LaneVector, b: LaneVector) -> IntersectMask:
    geo = _same_geometry(a, b)
    bits = _fast_first(a.lanes, b.lanes, geo.block_count, geo.block_lanes, scratch(geo))
    return IntersectMask(geo, int(bits))


def chained_and_mask(a: LaneVector, b: LaneVector) -> int:
    """The fast kernel's result before the final complement."""
    geo = _same_geometry(a, b)
    return int(_chained_and(a.lanes, b.lanes, geo.block_count, geo.block_lanes, scratch(geo)))


def or_combined_first_mask(a: LaneVector, b: LaneVector) -> IntersectMask:
    """First mask from OR-ing equality masks per rotation group (no chaining)."""
    geo = _same_geometry(a, b)
    bits = _or_form_first(a.lanes, b.lanes, geo.block_count, geo.block_lanes, scratch(geo))
    return IntersectMask(geo, int(bits))


def group_match_masks(a: LaneVector, b: LaneVector) -> list[IntersectMask]:
    """Equality masks for each block rotation of ``a``, in ``a``'s own lane order."""
    geo = _same_geometry(a, b)
    groups = _group_or_masks(a.lanes, b.lanes, geo.block_count, geo.block_lanes, scratch(geo))
    return [IntersectMask(geo, int(m)) for m in groups]


def memory_first_mask(a: LaneVector, b: MemoryOperand | np.ndarray) -> IntersectMask:
    geo = a.geometry
    window = b.lanes if isinstance(b, MemoryOperand) else np.asarray(b)
    if len(window) != geo.lane_count:
        raise InvalidArgumentError(
            f"memory window holds {len(window)} lanes, {geo} needs {geo.lane_count}"
        )
    window = coerce_lanes(window, geo.dtype)
    return IntersectMask(geo, int(_memory_first(a.lanes, window)))


def strict_two_masks(a: LaneVector, b: LaneVector) -> tuple[IntersectMask, IntersectMask]:
    """Both masks, bit-identical to :func:`oracle_two_masks`. 512x32 only."""
    geo = _same_geometry(a, b)
    if (geo.vector_bits, geo.lane_bits) != (512, 32):
        raise UnsupportedGeometryError(f"strict emulation exists only for 512x32, not {geo}")
    ka, kb = _strict_two_512x32(a.lanes, b.lanes, scratch(geo))
    return IntersectMask(geo, int(ka)), IntersectMask(geo, int(kb))


def scalar_first_mask(a: LaneVector, b: LaneVector) -> IntersectMask:
    geo = _same_geometry(a, b)
    return IntersectMask(geo, int(_scalar_first(a.lanes, b.lanes)))


# ---------------------------------------------------------------------------
# batched evaluation over rows of registers
# ---------------------------------------------------------------------------


def _rows(values, geometry: KernelGeometry) -> np.ndarray:
    arr = coerce_lanes(values, geometry.dtype)
    if arr.ndim != 2 or arr.shape[1] != geometry.lane_count:
        raise InvalidArgumentError(
            f"expected (n, {geometry.lane_count}) rows for {geometry}, got {arr.shape}"
        )
    return arr


def batch_first_masks(kernel: str, a_rows, b_rows, geometry: KernelGeometry) -> np.ndarray:
    """First masks of ``kernel`` for each row pair; returns int64 array."""
    try:
        code = KERNEL_CODES[kernel]
    except KeyError:
        raise InvalidArgumentError(f"unknown kernel {kernel!r}") from None
    A, B = _rows(a_rows, geometry), _rows(b_rows, geometry)
    if A.shape != B.shape:
        raise InvalidArgumentError(f"row shape mismatch: {A.shape} vs {B.shape}")
    out = np.empty(len(A), np.int64)
    _batch_first(code, A, B, geometry.block_count, geometry.block_lanes, scratch(geometry), out)
    return out


def batch_chained_and(a_rows, b_rows, geometry: KernelGeometry) -> np.ndarray:
    A, B = _rows(a_rows, geometry), _rows(b_rows, geometry)
    out = np.empty(len(A), np.int64)
    _batch_chained_and(A, B, geometry.block_count, geometry.block_lanes, scratch(geometry), out)
    return out


def batch_oracle_two_masks(a_rows, b_rows, geometry: KernelGeometry):
    A, B = _rows(a_rows, geometry), _rows(b_rows, geometry)
    ka = np.empty(len(A), np.int64)
    kb = np.empty(len(A), np.int64)
    _batch_oracle(A, B, ka, kb)
    return ka, kb


def batch_strict_two_masks(a_rows, b_rows, geometry: KernelGeometry):
    if (geometry.vector_bits, geometry.lane_bits) != (512, 32):
        raise UnsupportedGeometryError(
            f"strict emulation exists only for 512x32, not {geometry}"
        )
    A, B = _rows(a_rows, geometry), _rows(b_rows, geometry)
    ka = np.empty(len(A), np.int64)
    kb = np.empty(len(A), np.int64)
    _batch_strict(A, B, scratch(geometry), ka, kb)
    return ka, kb
