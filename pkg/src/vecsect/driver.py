"""Streaming intersection of two sorted runs, one vector block at a time.

Each iteration loads an L-lane block from both runs, asks a kernel which
lanes of the ``a`` block occur in the ``b`` block, writes those lanes out,
then advances each cursor past every lane that is no larger than the other
block's last lane. The block whose last lane is smaller always advances by a
full block. Once fewer than L lanes remain in either run the loop stops and a
two-pointer merge finishes the remainders, so no block load ever extends past
the end of an input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .dispatch import Implementation, KernelChoice, parse_implementation
from .errors import InvalidArgumentError
from .geometry import DEFAULT_GEOMETRY, KernelGeometry, lane_dtype
from .kernels import (
    FAST,
    MEMORY,
    NAIVE,
    SCALAR,
    LaneVector,
    _strict_two_512x32,
    coerce_lanes,
    first_mask_code,
)

STRICT = 5

_CODES = {
    Implementation.EMULATED_FAST: FAST,
    Implementation.EMULATED_NAIVE: NAIVE,
    Implementation.EMULATED_MEMORY: MEMORY,
    Implementation.STRICT: STRICT,
    Implementation.SCALAR: SCALAR,
}


@dataclass(eq=False)
class SortedRun:
    """Strictly increasing unsigned integers of one lane width."""

    lane_bits: int
    values: np.ndarray

    def __post_init__(self):
        self.values = coerce_lanes(self.values, lane_dtype(self.lane_bits))
        if self.values.ndim != 1:
            raise InvalidArgumentError("a sorted run must be one-dimensional")
        bad = np.flatnonzero(self.values[1:] <= self.values[:-1])
        if bad.size:
            i = int(bad[0]) + 1
            raise InvalidArgumentError(
                f"run is not strictly increasing at index {i}: "
                f"{int(self.values[i - 1])} then {int(self.values[i])}"
            )

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, SortedRun):
            return NotImplemented
        return self.lane_bits == other.lane_bits and np.array_equal(self.values, other.values)


@dataclass(eq=False)
class IntersectionResult:
    """Output of one driver call.

    ``values`` is None when only the size was requested. ``iterations`` counts
    block-loop iterations (tail merge excluded). ``trace`` holds one row per
    iteration, ``(pos_a, pos_b, da, db)``, when tracing was requested.
    """

    values: np.ndarray | None
    count: int
    iterations: int
    tail_start: tuple[int, int]
    trace: np.ndarray | None = None


@njit(cache=True)
def _popcount(m):
    c = 0
    while m:
        m &= m - 1
        c += 1
    return c


@njit(cache=True)
def _le_mask(v, limit):
    m = 0
    for t in range(v.shape[0]):
        if v[t] <= limit:
            m |= 1 << t
    return m


@njit(cache=True)
def _advance(va, vb):
    n = va.shape[0]
    adv_a = _le_mask(va, vb[n - 1])
    adv_b = _le_mask(vb, va[n - 1])
    return adv_a, adv_b


@njit(cache=True)
def _first_mask_emulated(code, va, b, ib, vb, G, g, work):
    if code == MEMORY:
        return first_mask_code(code, va, b[ib : ib + va.shape[0]], G, g, work)
    if code == STRICT:
        return _strict_two_512x32(va, vb, work)[0]
    return first_mask_code(code, va, vb, G, g, work)


def _block_loop_source(first_mask):
    def block_loop(a, b, L, G, g, code, out, materialize, trace):
        na = a.shape[0]
        nb = b.shape[0]
        ia = 0
        ib = 0
        count = 0
        it = 0
        tracing = trace.shape[0] > 0
        va = np.empty(L, a.dtype)
        vb = np.empty(L, b.dtype)
        work = np.empty((G + g, L), a.dtype)
        while na - ia >= L and nb - ib >= L:
            for t in range(L):
                va[t] = a[ia + t]
                vb[t] = b[ib + t]
            mask = first_mask(code, va, b, ib, vb, G, g, work)
            if materialize:
                k = count
                for t in range(L):
                    if (mask >> t) & 1:
                        out[k] = va[t]
                        k += 1
            count += _popcount(mask)
            adv_a, adv_b = _advance(va, vb)
            da = _popcount(adv_a)
            db = _popcount(adv_b)
            if tracing:
                # sorted blocks give ones-prefix advance masks
                if adv_a != (1 << da) - 1 or adv_b != (1 << db) - 1:
                    raise AssertionError("advance mask is not a ones-prefix")
                trace[it, 0] = ia
                trace[it, 1] = ib
                trace[it, 2] = da
                trace[it, 3] = db
            ia += da
            ib += db
            it += 1
        return ia, ib, count, it

    return block_loop


_block_loop = njit(cache=True)(_block_loop_source(_first_mask_emulated))


@njit(cache=True)
def _merge_tail(a, ia, b, ib, out, k, materialize):
    count = 0
    while ia < a.shape[0] and ib < b.shape[0]:
        x = a[ia]
        y = b[ib]
        if x == y:
            if materialize:
                out[k + count] = x
            count += 1
            ia += 1
            ib += 1
        elif x < y:
            ia += 1
        else:
            ib += 1
    return count


_native_loops: dict[KernelGeometry, object] = {}


def native_block_loop(kernel):
    """Build a block loop around a ctypes kernel (see :mod:`vecsect.native`)."""

    @njit
    def first_mask(code, va, b, ib, vb, G, g, work):
        return kernel(va.ctypes.data, vb.ctypes.data)

    return njit(_block_loop_source(first_mask))


def _loop_for(choice: KernelChoice):
    if choice.implementation is Implementation.NATIVE:
        loop = _native_loops.get(choice.geometry)
        if loop is None:
            from .native import native_kernel

            loop = native_block_loop(native_kernel(choice.geometry))
            _native_loops[choice.geometry] = loop
        return loop, 0
    return _block_loop, _CODES[choice.implementation]


def _resolve(kernel, geometry: KernelGeometry) -> KernelChoice:
    if isinstance(kernel, KernelChoice):
        if kernel.geometry != geometry:
            raise InvalidArgumentError(
                f"kernel choice is for {kernel.geometry}, driver called with {geometry}"
            )
        return kernel
    return KernelChoice(geometry, parse_implementation(kernel))


def block_loop(
    a: np.ndarray,
    b: np.ndarray,
    choice: KernelChoice,
    out: np.ndarray | None = None,
    trace: np.ndarray | None = None,
    loop=None,
) -> tuple[int, int, int, int]:
    """Run only the vector block loop over raw lane arrays.

    Returns ``(pos_a, pos_b, count, iterations)``. Matched lanes are written
    to ``out`` when given. ``loop`` substitutes a loop built by
    :func:`native_block_loop`.
    """
    geo = choice.geometry
    if loop is None:
        loop, code = _loop_for(choice)
    else:
        code = 0
    materialize = out is not None
    if out is None:
        out = np.empty(0, a.dtype)
    if trace is None:
        trace = np.empty((0, 4), np.int64)
    ia, ib, count, it = loop(
        a, b, geo.lane_count, geo.block_count, geo.block_lanes, code, out, materialize, trace
    )
    return int(ia), int(ib), int(count), int(it)


def intersect(
    a: SortedRun,
    b: SortedRun,
    geometry: KernelGeometry = DEFAULT_GEOMETRY,
    kernel: KernelChoice | Implementation | str = Implementation.EMULATED_FAST,
    materialize: bool = True,
    trace: bool = False,
    loop=None,
) -> IntersectionResult:
    if not a.lane_bits == b.lane_bits == geometry.lane_bits:
        raise InvalidArgumentError(
            f"lane widths differ: runs {a.lane_bits}/{b.lane_bits}, geometry {geometry.lane_bits}"
        )
    choice = _resolve(kernel, geometry)
    av, bv = a.values, b.values
    out = np.empty(min(len(av), len(bv)), av.dtype) if materialize else None
    trace_buf = None
    if trace:
        trace_buf = np.zeros(((len(av) + len(bv)) // geometry.lane_count + 1, 4), np.int64)
    ia, ib, count, it = block_loop(av, bv, choice, out, trace_buf, loop=loop)
    sink = out if materialize else np.empty(0, av.dtype)
    count += int(_merge_tail(av, ia, bv, ib, sink, count, materialize))
    return IntersectionResult(
        values=out[:count] if materialize else None,
        count=count,
        iterations=it,
        tail_start=(ia, ib),
        trace=trace_buf[:it] if trace else None,
    )


def intersect_runs(
    a: SortedRun,
    b: SortedRun,
    geometry: KernelGeometry = DEFAULT_GEOMETRY,
    kernel: KernelChoice | Implementation | str = Implementation.EMULATED_FAST,
) -> IntersectionResult:
    """Sorted intersection of ``a`` and ``b``, materialized."""
    return intersect(a, b, geometry, kernel, materialize=True)


def intersect_size(
    a: SortedRun,
    b: SortedRun,
    geometry: KernelGeometry = DEFAULT_GEOMETRY,
    kernel: KernelChoice | Implementation | str = Implementation.EMULATED_FAST,
) -> int:
    """Size of the intersection; nothing is written out."""
    return intersect(a, b, geometry, kernel, materialize=False).count


def advance_counts(va: LaneVector, vb: LaneVector) -> tuple[int, int]:
    """Lanes of each block that are <= the other block's last lane."""
    if va.geometry != vb.geometry:
        raise InvalidArgumentError(f"geometry mismatch: {va.geometry} vs {vb.geometry}")
    adv_a, adv_b = _advance(va.lanes, vb.lanes)
    return int(adv_a).bit_count(), int(adv_b).bit_count()


def scalar_tail_intersect(a_rest, b_rest, sink: list | None = None) -> int:
    """Two-pointer merge of two remainders; matches are appended to ``sink``."""
    a_rest = np.asarray(a_rest)
    b_rest = np.asarray(b_rest)
    if a_rest.size == 0 or b_rest.size == 0:
        return 0
    dtype = np.result_type(a_rest, b_rest)
    a_rest, b_rest = a_rest.astype(dtype, copy=False), b_rest.astype(dtype, copy=False)
    out = np.empty(min(a_rest.size, b_rest.size), dtype)
    count = int(_merge_tail(a_rest, 0, b_rest, 0, out, 0, sink is not None))
    if sink is not None:
        sink.extend(int(v) for v in out[:count])
    return count
