"""Seeded sorted-run workloads and the binary run file format.

Run files are little-endian: a 16-byte header (magic ``b"VSEC"``, version
u16, lane_bits u16, count u64) followed by ``count`` lanes.
"""

from __future__ import annotations

import os
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .driver import SortedRun
from .errors import InvalidArgumentError, ValidationError
from .geometry import LANE_WIDTHS, lane_dtype

MAGIC = b"VSEC"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHHQ")


@dataclass(frozen=True)
class WorkloadSpec:
    seed: int
    lane_bits: int
    len_a: int
    len_b: int
    overlap_fraction: float
    universe_max: int | None = None

    def __post_init__(self):
        if self.lane_bits not in LANE_WIDTHS:
            raise InvalidArgumentError(f"lane_bits must be one of {LANE_WIDTHS}")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgumentError("seed must be a 64-bit unsigned integer")
        if self.len_a < 0 or self.len_b < 0:
            raise InvalidArgumentError("run lengths must be non-negative")
        if not 0.0 <= self.overlap_fraction <= 1.0:
            raise InvalidArgumentError("overlap_fraction must lie in [0, 1]")
        top = 2**self.lane_bits - 1
        if self.universe_max is None:
            object.__setattr__(self, "universe_max", top)
        elif not 0 <= self.universe_max <= top:
            raise InvalidArgumentError(
                f"universe_max must lie in [0, {top}] for {self.lane_bits}-bit lanes"
            )

    @property
    def shared_count(self) -> int:
        return round(self.overlap_fraction * min(self.len_a, self.len_b))

    @property
    def distinct_needed(self) -> int:
        return self.len_a + self.len_b - self.shared_count

    def to_dict(self) -> dict:
        return asdict(self)


def _sample_distinct(rng: np.random.Generator, n: int, universe_max: int) -> np.ndarray:
    """``n`` distinct values from ``[0, universe_max]`` in random order."""
    size = universe_max + 1
    if size <= 2**62:
        return rng.choice(size, n, replace=False).astype(np.uint64)
    picked = np.empty(0, np.uint64)
    while len(picked) < n:
        draws = rng.integers(0, universe_max, size=n - len(picked) + 64, dtype=np.uint64, endpoint=True)
        merged = np.concatenate([picked, draws])
        _, first = np.unique(merged, return_index=True)
        picked = merged[np.sort(first)]
    return picked[:n]


def generate_runs(spec: WorkloadSpec) -> tuple[SortedRun, SortedRun, int]:
    """Two strictly increasing runs sharing exactly ``spec.shared_count`` values."""
    if spec.distinct_needed > spec.universe_max + 1:
        raise InvalidArgumentError(
            f"workload needs {spec.distinct_needed} distinct values but the universe "
            f"[0, {spec.universe_max}] holds only {spec.universe_max + 1}"
        )
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    pool = _sample_distinct(rng, spec.distinct_needed, spec.universe_max)
    shared = spec.shared_count
    only_a = spec.len_a - shared
    dtype = lane_dtype(spec.lane_bits)
    a = np.sort(pool[: shared + only_a]).astype(dtype)
    b = np.sort(np.concatenate([pool[:shared], pool[shared + only_a :]])).astype(dtype)
    return SortedRun(spec.lane_bits, a), SortedRun(spec.lane_bits, b), shared


def encode_run(run: SortedRun) -> bytes:
    payload = run.values.astype(run.values.dtype.newbyteorder("<"), copy=False).tobytes()
    return HEADER.pack(MAGIC, FORMAT_VERSION, run.lane_bits, len(run.values)) + payload


def _parse_header(header: bytes) -> tuple[int, int]:
    if len(header) < HEADER.size:
        raise ValidationError("truncated run-file header", offset=len(header))
    magic, version, lane_bits, count = HEADER.unpack(header[: HEADER.size])
    if magic != MAGIC:
        raise ValidationError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported format version {version}", offset=4)
    if lane_bits not in LANE_WIDTHS:
        raise ValidationError(f"invalid lane width {lane_bits}", offset=6)
    return lane_bits, count


def _check_size(lane_bits: int, count: int, payload_bytes: int) -> None:
    expected = count * (lane_bits // 8)
    if payload_bytes < expected:
        raise ValidationError(
            f"payload holds {payload_bytes} bytes, header promises {expected}",
            offset=HEADER.size + payload_bytes,
        )
    if payload_bytes > expected:
        raise ValidationError("trailing bytes after the last lane", offset=HEADER.size + expected)


def _check_order(lane_bits: int, values: np.ndarray) -> SortedRun:
    values = values.astype(lane_dtype(lane_bits), copy=False)
    bad = np.flatnonzero(values[1:] <= values[:-1])
    if bad.size:
        i = int(bad[0]) + 1
        raise ValidationError(
            f"lane {i} ({int(values[i])}) does not exceed lane {i - 1} ({int(values[i - 1])})",
            offset=HEADER.size + i * (lane_bits // 8),
        )
    return SortedRun(lane_bits, values)


def decode_run(data: bytes) -> SortedRun:
    lane_bits, count = _parse_header(data)
    _check_size(lane_bits, count, len(data) - HEADER.size)
    values = np.frombuffer(data, lane_dtype(lane_bits).newbyteorder("<"), count, HEADER.size)
    return _check_order(lane_bits, values)


def write_run(path: str | os.PathLike, run: SortedRun) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_run(run))


def read_run(path: str | os.PathLike) -> SortedRun:
    """Read and fully validate a run file."""
    with open(path, "rb") as fh:
        lane_bits, count = _parse_header(fh.read(HEADER.size))
        _check_size(lane_bits, count, os.fstat(fh.fileno()).st_size - HEADER.size)
        values = np.fromfile(fh, lane_dtype(lane_bits).newbyteorder("<"), count)
    return _check_order(lane_bits, values)
