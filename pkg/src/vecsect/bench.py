"""Per-iteration cost of the size-only block loop, per geometry and kernel.

Each cell generates one workload, runs the block loop once untimed, then
times ``reps`` further passes. A pass is divided by the number of block
iterations the driver reports for it, and the median over passes is kept.
Time-stamp-counter ticks are recorded alongside wall time when the CPU has
an invariant counter; they count at the nominal clock, not core cycles.
"""

from __future__ import annotations

import contextlib
import csv
import io
import logging
import os
import statistics
import time
from dataclasses import dataclass, replace

import numpy as np

from . import driver
from .datagen import WorkloadSpec, generate_runs
from .dispatch import (
    CapabilitySet,
    Implementation,
    KernelChoice,
    detect_capabilities,
    parse_implementation,
)
from .errors import InvalidArgumentError, UnsupportedCapabilityError, UnsupportedGeometryError
from .geometry import GEOMETRIES, KernelGeometry, table_order_key
from .native import tsc_reader

log = logging.getLogger(__name__)

TABLE_COLUMNS = (
    (Implementation.NATIVE, "Native (VP2INTERSECT)"),
    (Implementation.EMULATED_FAST, "Emulation"),
    (Implementation.EMULATED_MEMORY, "Emulation with in-memory operand"),
)
CSV_COLUMNS = (
    "vector_bits",
    "lane_bits",
    "implementation",
    "ns_per_iter",
    "cycles_per_iter",
    "iterations",
    "seed",
)
MIN_REPS = 20
_IMPL_ORDER = {impl: i for i, impl in enumerate(Implementation)}


@dataclass(frozen=True)
class BenchRecord:
    geometry: KernelGeometry
    implementation: Implementation
    ns_per_iter: float
    cycles_per_iter: float | None
    iterations: int
    workload: WorkloadSpec
    reps: int = MIN_REPS
    checksum: int = 0

    def __post_init__(self):
        if not self.ns_per_iter > 0:
            raise InvalidArgumentError("ns_per_iter must be positive")
        if self.iterations < 1:
            raise InvalidArgumentError("a record needs at least one block iteration")


@contextlib.contextmanager
def _pinned():
    """Pin the process to the CPU it is running on, where supported."""
    if not hasattr(os, "sched_setaffinity"):
        yield
        return
    before = os.sched_getaffinity(0)
    try:
        cpu = os.sched_getcpu() if hasattr(os, "sched_getcpu") else min(before)
        os.sched_setaffinity(0, {cpu})
    except OSError:
        yield
        return
    try:
        yield
    finally:
        os.sched_setaffinity(0, before)


def _check_selectable(choice: KernelChoice, caps: CapabilitySet) -> None:
    if choice.implementation is Implementation.NATIVE and not caps.has_native_2intersect:
        raise UnsupportedCapabilityError(
            "this CPU has no native two-way intersection instruction"
        )


def measure_cell(
    geometry: KernelGeometry,
    implementation: Implementation | str,
    spec: WorkloadSpec,
    reps: int = MIN_REPS,
    caps: CapabilitySet | None = None,
) -> BenchRecord:
    """Time the size-only block loop for one geometry/implementation cell."""
    choice = KernelChoice(geometry, parse_implementation(implementation))
    _check_selectable(choice, detect_capabilities() if caps is None else caps)
    if spec.lane_bits != geometry.lane_bits:
        raise InvalidArgumentError(
            f"workload has {spec.lane_bits}-bit lanes, geometry {geometry} needs {geometry.lane_bits}"
        )
    if reps < 1:
        raise InvalidArgumentError("reps must be at least 1")
    a, b, _ = generate_runs(spec)
    loop, code = driver._loop_for(choice)
    args = (
        a.values,
        b.values,
        geometry.lane_count,
        geometry.block_count,
        geometry.block_lanes,
        code,
        np.empty(0, a.values.dtype),
        False,
        np.empty((0, 4), np.int64),
    )
    tsc = tsc_reader()
    checksum = int(loop(*args)[2])  # warm-up pass
    ns, cycles = [], []
    iterations = 0
    with _pinned():
        for _ in range(reps):
            c0 = tsc() if tsc else 0
            t0 = time.perf_counter_ns()
            _, _, count, iterations = loop(*args)
            t1 = time.perf_counter_ns()
            c1 = tsc() if tsc else 0
            if iterations == 0:
                raise InvalidArgumentError(
                    f"workload too short for a single {geometry} block iteration"
                )
            checksum += int(count)
            ns.append((t1 - t0) / iterations)
            if tsc:
                cycles.append((c1 - c0) / iterations)
    log.debug("%s %s checksum %d", geometry, choice.implementation, checksum)
    return BenchRecord(
        geometry=geometry,
        implementation=choice.implementation,
        ns_per_iter=statistics.median(ns),
        cycles_per_iter=statistics.median(cycles) if cycles else None,
        iterations=int(iterations),
        workload=spec,
        reps=reps,
        checksum=checksum,
    )


def workload_for(geometry: KernelGeometry, template: WorkloadSpec) -> WorkloadSpec:
    """Adapt ``template`` to ``geometry``'s lane width, shrinking runs that cannot fit."""
    spec = replace(template, lane_bits=geometry.lane_bits, universe_max=None)
    if spec.distinct_needed <= spec.universe_max + 1:
        return spec
    scale = (spec.universe_max + 1) / spec.distinct_needed
    return replace(
        spec, len_a=int(spec.len_a * scale), len_b=int(spec.len_b * scale)
    )


def run_grid(
    template: WorkloadSpec,
    geometries=GEOMETRIES,
    implementations=tuple(impl for impl, _ in TABLE_COLUMNS),
    reps: int = MIN_REPS,
    caps: CapabilitySet | None = None,
) -> list[BenchRecord]:
    """Measure every selectable cell; unselectable cells are left out."""
    caps = detect_capabilities() if caps is None else caps
    records = []
    for geo in geometries:
        spec = workload_for(geo, template)
        for impl in implementations:
            try:
                records.append(measure_cell(geo, impl, spec, reps, caps))
            except (UnsupportedCapabilityError, UnsupportedGeometryError) as exc:
                log.info("skipping %s %s: %s", geo, impl, exc)
    return records


def _sorted(records):
    return sorted(
        records,
        key=lambda r: (table_order_key(r.geometry), _IMPL_ORDER[r.implementation]),
    )


def _cell(record: BenchRecord | None) -> str:
    if record is None:
        return "-"
    if record.cycles_per_iter is None:
        return f"{record.ns_per_iter:.3f}"
    return f"{record.ns_per_iter:.3f} [{record.cycles_per_iter:.2f}]"


def _verdict(native: BenchRecord | None, emulated: BenchRecord | None) -> str:
    if native is None or emulated is None:
        return "-"
    return "yes" if emulated.ns_per_iter <= native.ns_per_iter else "no"


def _text_table(records) -> str:
    cells = {(r.geometry, r.implementation): r for r in records}
    geometries = sorted({r.geometry for r in records}, key=table_order_key)
    header = ["kernel"] + [title for _, title in TABLE_COLUMNS] + ["emulated <= native"]
    rows = []
    for geo in geometries:
        row = [geo.intrinsic_name]
        row += [_cell(cells.get((geo, impl))) for impl, _ in TABLE_COLUMNS]
        row.append(
            _verdict(
                cells.get((geo, Implementation.NATIVE)),
                cells.get((geo, Implementation.EMULATED_FAST)),
            )
        )
        rows.append(row)
    widths = [max(len(line[i]) for line in [header, *rows]) for i in range(len(header))]
    lines = [
        "# ns per block-loop iteration of the size-only intersection; "
        "[time-stamp-counter ticks] where measured",
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


def _csv_table(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    for r in _sorted(records):
        writer.writerow(
            [
                r.geometry.vector_bits,
                r.geometry.lane_bits,
                r.implementation.value,
                f"{r.ns_per_iter:.4f}",
                "" if r.cycles_per_iter is None else f"{r.cycles_per_iter:.4f}",
                r.iterations,
                r.workload.seed,
            ]
        )
    return buf.getvalue()


def emit_table(records, format: str = "text") -> bytes:
    """Render records as the geometry-by-implementation table or as CSV."""
    if format == "text":
        return _text_table(records).encode()
    if format == "csv":
        return _csv_table(records).encode()
    raise InvalidArgumentError(f"format must be 'text' or 'csv', got {format!r}")
