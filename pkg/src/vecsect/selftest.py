"""Installation self-check: kernels and driver against independent numpy oracles."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import driver, kernels
from .datagen import WorkloadSpec, generate_runs
from .dispatch import available_implementations
from .geometry import GEOMETRIES, KernelGeometry


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def broadcast_masks(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Both intersection masks for each row pair via an (n, L, L) equality cube."""
    eq = A[:, :, None] == B[:, None, :]
    weights = np.left_shift(np.int64(1), np.arange(A.shape[1], dtype=np.int64))
    return eq.any(2) @ weights, eq.any(1) @ weights


def _random_rows(rng, geometry: KernelGeometry, n: int, alphabet: int) -> np.ndarray:
    return rng.integers(0, alphabet, (n, geometry.lane_count)).astype(geometry.dtype)


def check_kernels(pairs: int, rng) -> list[CheckResult]:
    results = []
    for geo in GEOMETRIES:
        A = _random_rows(rng, geo, pairs, 8)
        B = _random_rows(rng, geo, pairs, 8)
        want, _ = broadcast_masks(A, B)
        bad = {
            name: int(np.count_nonzero(kernels.batch_first_masks(name, A, B, geo) != want))
            for name in ("fast", "naive", "memory", "scalar")
        }
        results.append(
            CheckResult(
                f"kernels {geo}",
                not any(bad.values()),
                ", ".join(f"{k}: {v} mismatches" for k, v in bad.items()),
            )
        )
    return results


def check_exhaustive_128x32() -> CheckResult:
    geo = KernelGeometry(128, 32)
    vectors = np.array(list(itertools.product(range(4), repeat=4)), geo.dtype)
    A = np.repeat(vectors, len(vectors), axis=0)
    B = np.tile(vectors, (len(vectors), 1))
    want, _ = broadcast_masks(A, B)
    bad = int(np.count_nonzero(kernels.batch_first_masks("fast", A, B, geo) != want))
    return CheckResult("exhaustive 128x32, 4 symbols", bad == 0, f"{len(A)} pairs, {bad} mismatches")


def check_strict(pairs: int, rng) -> CheckResult:
    geo = KernelGeometry(512, 32)
    A = _random_rows(rng, geo, pairs, 8)
    B = _random_rows(rng, geo, pairs, 8)
    want_a, want_b = broadcast_masks(A, B)
    ka, kb = kernels.batch_strict_two_masks(A, B, geo)
    bad = int(np.count_nonzero((ka != want_a) | (kb != want_b)))
    return CheckResult("strict 512x32 both masks", bad == 0, f"{pairs} pairs, {bad} mismatches")


def check_driver(workloads: int, rng) -> list[CheckResult]:
    results = []
    for geo in GEOMETRIES:
        bad = 0
        impls = available_implementations(geo)
        for _ in range(workloads):
            top = 2 ** min(geo.lane_bits, 20)
            spec = WorkloadSpec(
                seed=int(rng.integers(2**63)),
                lane_bits=geo.lane_bits,
                len_a=int(rng.integers(0, 3000)),
                len_b=int(rng.integers(0, 3000)),
                overlap_fraction=float(rng.choice([0.0, 0.01, 0.5, 1.0])),
                universe_max=top - 1,
            )
            a, b, expected = generate_runs(spec)
            want = np.intersect1d(a.values, b.values)
            for impl in impls:
                got = driver.intersect_runs(a, b, geo, impl)
                if got.count != expected or not np.array_equal(got.values, want):
                    bad += 1
        results.append(
            CheckResult(
                f"driver {geo}",
                bad == 0,
                f"{workloads} workloads x {len(impls)} implementations, {bad} mismatches",
            )
        )
    return results


def run_selftest(pairs: int = 20_000, workloads: int = 20, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = check_kernels(pairs, rng)
    results.append(check_exhaustive_128x32())
    results.append(check_strict(pairs, rng))
    results += check_driver(workloads, rng)
    return results
