"""Exit criteria. Each test prints one PASS/FAIL line, repeated in the summary.

Run alone with ``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import masks_by_cube, merge_array
from workloads import driver_workloads
from vecsect import kernels
from vecsect.bench import TABLE_COLUMNS, emit_table, run_grid
from vecsect.datagen import WorkloadSpec, generate_runs
from vecsect.dispatch import Implementation, available_implementations, detect_capabilities
from vecsect.driver import intersect, intersect_runs, intersect_size
from vecsect.geometry import GEOMETRIES, KernelGeometry

pytestmark = pytest.mark.acceptance

PAIRS = 1_000_000
DE_MORGAN_PAIRS = 100_000
WORKLOADS = 1000
BUDGET_S = 60.0
HERE = Path(__file__).resolve().parent


def report(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  [{number}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def random_rows(rng, geo: KernelGeometry, n: int, alphabet: int) -> np.ndarray:
    return rng.integers(0, alphabet, (n, geo.lane_count)).astype(geo.dtype)


def _warm_kernels():
    # compile outside the timed region; compile time is not kernel time
    for geo in GEOMETRIES:
        A = np.zeros((2, geo.lane_count), geo.dtype)
        for name in ("fast", "naive", "memory", "or_form"):
            kernels.batch_first_masks(name, A, A, geo)
        kernels.batch_oracle_two_masks(A, A, geo)
        kernels.batch_chained_and(A, A, geo)
    A = np.zeros((2, 16), np.uint32)
    kernels.batch_strict_two_masks(A, A, KernelGeometry(512, 32))


@pytest.fixture(scope="module", autouse=True)
def warm():
    _warm_kernels()


# 1 ---------------------------------------------------------------------------


def test_oracle_equivalence():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    bad = {}
    for geo in GEOMETRIES:
        A = random_rows(rng, geo, PAIRS, 8)
        B = random_rows(rng, geo, PAIRS, 8)
        want, _ = masks_by_cube(A, B)
        oracle, _ = kernels.batch_oracle_two_masks(A, B, geo)
        got = {"oracle": oracle}
        for name in ("fast", "naive", "memory"):
            got[name] = kernels.batch_first_masks(name, A, B, geo)
        for name, masks in got.items():
            n = int(np.count_nonzero(masks != want))
            if n:
                bad[f"{geo} {name}"] = n
    geo = KernelGeometry(128, 32)
    vectors = np.array(list(itertools.product(range(4), repeat=4)), geo.dtype)
    A = np.repeat(vectors, len(vectors), axis=0)
    B = np.tile(vectors, (len(vectors), 1))
    assert len(A) == 65_536
    want, _ = masks_by_cube(A, B)
    for name in ("fast", "naive", "memory"):
        n = int(np.count_nonzero(kernels.batch_first_masks(name, A, B, geo) != want))
        if n:
            bad[f"exhaustive {name}"] = n
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < BUDGET_S
    report(1, "oracle equivalence", ok,
           f"9 geometries x {PAIRS:,} pairs + 65,536 exhaustive, "
           f"mismatches {bad or 0}, {elapsed:.1f}s")
    assert not bad
    assert elapsed < BUDGET_S


# 2 ---------------------------------------------------------------------------


def test_strict_equivalence():
    geo = KernelGeometry(512, 32)
    rng = np.random.default_rng(2)
    # 16 lanes over 8 symbols always repeat a value; the wide half mixes in
    # vectors with few or no collisions
    A = np.concatenate([random_rows(rng, geo, PAIRS // 2, 8), random_rows(rng, geo, PAIRS // 2, 40)])
    B = np.concatenate([random_rows(rng, geo, PAIRS // 2, 8), random_rows(rng, geo, PAIRS // 2, 40)])
    dup_rows = int(np.count_nonzero((np.diff(np.sort(A, axis=1), axis=1) == 0).any(axis=1)))
    want_a, want_b = masks_by_cube(A, B)
    ka, kb = kernels.batch_strict_two_masks(A, B, geo)
    oa, ob = kernels.batch_oracle_two_masks(A, B, geo)
    bad = int(np.count_nonzero((ka != want_a) | (kb != want_b) | (oa != want_a) | (ob != want_b)))
    report(2, "strict two-mask emulation", bad == 0,
           f"{PAIRS:,} pairs at 512x32 ({dup_rows:,} with duplicate lanes in a), {bad} mismatches")
    assert bad == 0


# 3 and 4 ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def driver_sweep():
    for geo in GEOMETRIES:
        a, b, _ = generate_runs(WorkloadSpec(0, geo.lane_bits, 200, 200, 0.5))
        for impl in available_implementations(geo):
            intersect(a, b, geo, impl, trace=True)
    t0 = time.perf_counter()
    stats = dict(runs=0, mismatches=0, size_mismatches=0, traced=0, iterations=0,
                 progress_violations=0, overreads=0, max_len=0, zero_len=0)
    widths = set()
    for geo, spec in driver_workloads(WORKLOADS):
        a, b, expected = generate_runs(spec)
        widths.add(geo.lane_bits)
        stats["max_len"] = max(stats["max_len"], len(a), len(b))
        stats["zero_len"] += (len(a) == 0) + (len(b) == 0)
        want = merge_array(a.values, b.values)
        if len(want) != expected:
            stats["mismatches"] += 1
        for impl in available_implementations(geo):
            stats["runs"] += 1
            got = intersect_runs(a, b, geo, impl)
            if not np.array_equal(got.values, want) or got.values.dtype != geo.dtype:
                stats["mismatches"] += 1
            if intersect_size(a, b, geo, impl) != got.count:
                stats["size_mismatches"] += 1
        res = intersect(a, b, geo, "fast", materialize=False, trace=True)
        t, L = res.trace, geo.lane_count
        stats["traced"] += 1
        stats["iterations"] += res.iterations
        stats["progress_violations"] += int(np.count_nonzero(np.maximum(t[:, 2], t[:, 3]) != L))
        stats["overreads"] += int(np.count_nonzero((t[:, 0] + L > len(a)) | (t[:, 1] + L > len(b))))
    stats["seconds"] = time.perf_counter() - t0
    stats["widths"] = sorted(widths)
    return stats


def test_driver_differential(driver_sweep):
    s = driver_sweep
    ok = s["mismatches"] == 0 and s["size_mismatches"] == 0 and s["seconds"] < BUDGET_S
    report(3, "driver differential", ok,
           f"{WORKLOADS} workloads, {s['runs']} implementation runs, lane widths {s['widths']}, "
           f"lengths 0..{s['max_len']:,}, {s['mismatches']} output / {s['size_mismatches']} size "
           f"mismatches, {s['seconds']:.1f}s")
    assert s["widths"] == [16, 32, 64]
    assert s["zero_len"] > 0 and s["max_len"] > 50_000
    assert s["mismatches"] == 0 and s["size_mismatches"] == 0
    assert s["seconds"] < BUDGET_S


def test_progress_invariant(driver_sweep):
    s = driver_sweep
    ok = s["progress_violations"] == 0 and s["iterations"] > 0
    report(4, "progress invariant", ok,
           f"{s['iterations']:,} traced block iterations, {s['progress_violations']} with max(da, db) != L")
    assert ok


# 5 ---------------------------------------------------------------------------


def test_de_morgan_equivalence():
    rng = np.random.default_rng(5)
    bad = {}
    for geo in GEOMETRIES:
        A = random_rows(rng, geo, DE_MORGAN_PAIRS, 8)
        B = random_rows(rng, geo, DE_MORGAN_PAIRS, 8)
        chained = kernels.batch_chained_and(A, B, geo)
        ored = kernels.batch_first_masks("or_form", A, B, geo)
        n = int(np.count_nonzero(chained != (~ored & geo.full_mask)))
        if n:
            bad[str(geo)] = n
    report(5, "De Morgan formulations", not bad,
           f"{DE_MORGAN_PAIRS:,} pairs x 9 geometries, mismatches {bad or 0}")
    assert not bad


# 6 and 7 ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def bench_records():
    template = WorkloadSpec(6, 32, 20_000, 20_000, 0.5)
    return run_grid(template, GEOMETRIES)


def _rows(table: bytes) -> list[list[str]]:
    lines = table.decode().splitlines()
    return [line.split() for line in lines[3:]]


def test_bench_shape(bench_records):
    table = emit_table(bench_records, "text")
    rows = _rows(table)
    header = table.decode().splitlines()[1]
    problems = []
    if [r[0] for r in rows] != [g.intrinsic_name for g in GEOMETRIES]:
        problems.append("row order")
    if not all(title in header for _, title in TABLE_COLUMNS):
        problems.append("column titles")
    for geo, row in zip(GEOMETRIES, rows):
        if geo.lane_bits == 16 and row[1] != "-":
            problems.append(f"{geo} native cell")
    if emit_table(list(reversed(bench_records)), "text") != table:
        problems.append("text bytes differ")
    if emit_table(bench_records, "csv") != emit_table(list(reversed(bench_records)), "csv"):
        problems.append("csv bytes differ")
    ok = len(rows) == 9 and not problems
    report(6, "benchmark table shape", ok,
           f"{len(rows)} rows x {len(TABLE_COLUMNS)} columns, 16-bit native cells '-', "
           f"deterministic bytes; problems: {problems or 'none'}")
    assert ok


def test_bench_columns_match_hardware(bench_records):
    caps = detect_capabilities()
    cells = {(r.geometry, r.implementation): r for r in bench_records}
    fast, memory, native = (Implementation.EMULATED_FAST, Implementation.EMULATED_MEMORY,
                            Implementation.NATIVE)
    emulated_ok = all((g, fast) in cells and (g, memory) in cells for g in GEOMETRIES)
    valid = all(r.ns_per_iter > 0 and np.isfinite(r.ns_per_iter) for r in bench_records)
    rows = _rows(emit_table(bench_records, "text"))
    if caps.has_native_2intersect:
        native_ok = all(((g, native) in cells) == (g.lane_bits != 16) for g in GEOMETRIES)
        verdicts = [row[-1] for g, row in zip(GEOMETRIES, rows) if g.lane_bits != 16]
        native_ok = native_ok and all(v in ("yes", "no") for v in verdicts)
        mode = f"native present; emulated <= native per row: {verdicts}"
    else:
        native_ok = not any(k[1] is native for k in cells) and all(row[1] == "-" for row in rows)
        mode = ("512-bit vectors, no native instruction" if caps.has_512bit_vectors
                else "no 512-bit vectors") + "; native column all '-'"
    ok = emulated_ok and valid and native_ok
    report(7, "columns match hardware", ok, f"{mode}; emulated columns populated: {emulated_ok}")
    assert ok


# 8 ---------------------------------------------------------------------------


def test_no_out_of_bounds_reads(driver_sweep, tmp_path):
    env = dict(os.environ, NUMBA_BOUNDSCHECK="1", NUMBA_CACHE_DIR=str(tmp_path / "numba-cache"))
    proc = subprocess.run(
        [sys.executable, str(HERE / "boundscheck_probe.py"), str(WORKLOADS)],
        capture_output=True, text=True, env=env, timeout=900,
    )
    assert proc.returncode == 0, proc.stderr[-2000:]
    probe = json.loads(proc.stdout.strip().splitlines()[-1])
    ok = (
        probe["boundscheck"]
        and probe["control_trips"]
        and probe["index_errors"] == 0
        and probe["mismatches"] == 0
        and driver_sweep["overreads"] == 0
    )
    report(8, "no reads outside inputs", ok,
           f"bounds-checked rebuild, {probe['runs']} runs over the criterion-3 workloads: "
           f"{probe['index_errors']} index errors (off-by-one control raised: "
           f"{probe['control_trips']}); traced loads past end: {driver_sweep['overreads']}; "
           f"{probe['seconds']}s")
    assert ok, probe


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
