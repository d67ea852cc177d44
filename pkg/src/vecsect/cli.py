"""Command-line entry point: ``vecsect {intersect,size,gen,bench,selftest}``.

Exit status is 0 on success, 1 when input or flags are rejected, 2 on an
internal failure (including a failing self-test).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench, datagen, driver
from .dispatch import Implementation, Policy, policy_from_env, select_kernel
from .errors import VecsectError
from .geometry import DEFAULT_GEOMETRY, GEOMETRIES, KernelGeometry, parse_geometry

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INTERNAL = 2

_IMPL_FLAGS = {
    "auto": (Policy.AUTO, Implementation.EMULATED_FAST),
    "native": (Policy.FORCE_NATIVE, Implementation.EMULATED_FAST),
    "fast": (Policy.FORCE_EMULATED, Implementation.EMULATED_FAST),
    "naive": (Policy.FORCE_EMULATED, Implementation.EMULATED_NAIVE),
    "memory": (Policy.FORCE_EMULATED, Implementation.EMULATED_MEMORY),
    "scalar": (Policy.FORCE_SCALAR, Implementation.EMULATED_FAST),
}

log = logging.getLogger("vecsect")


def choose_kernel(geometry: KernelGeometry, impl_flag: str):
    """Resolve ``--impl`` against VECSECT_FORCE (the environment wins)."""
    policy, variant = _IMPL_FLAGS[impl_flag]
    return select_kernel(geometry, policy_from_env(policy), emulated=variant)


def _geometry(text: str) -> KernelGeometry:
    try:
        return parse_geometry(text)
    except VecsectError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("overlap must lie in [0, 1]")
    return value


def _common(p: argparse.ArgumentParser, impl: bool = True):
    p.add_argument("--geometry", type=_geometry, default=DEFAULT_GEOMETRY,
                   help="vector and lane width as <vector_bits>x<lane_bits> (default 512x32)")
    if impl:
        p.add_argument("--impl", choices=list(_IMPL_FLAGS), default="auto")


def _workload_flags(p: argparse.ArgumentParser, length: int):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--len-a", type=int, default=length)
    p.add_argument("--len-b", type=int, default=length)
    p.add_argument("--overlap", type=_fraction, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vecsect",
        description="Sorted-set intersection on emulated vector intersection masks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("intersect", help="intersect two run files into a third")
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _common(p)

    p = sub.add_parser("size", help="print the intersection size of two run files")
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)
    _common(p)

    p = sub.add_parser("gen", help="write a seeded workload as a.vsec / b.vsec")
    _common(p, impl=False)
    _workload_flags(p, 10_000)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("bench", help="time every geometry x implementation cell")
    p.add_argument("--geometry", type=_geometry, action="append",
                   help="restrict to this geometry (repeatable; default all nine)")
    p.add_argument("--impl", choices=["native", "fast", "memory", "naive", "scalar"],
                   action="append", help="restrict to these implementations")
    _workload_flags(p, 100_000)
    p.add_argument("--reps", type=int, default=bench.MIN_REPS)
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--out", type=Path, help="write the table here instead of stdout")
    p.add_argument("--figure", type=Path,
                   help="bar chart path (default: next to --out with a .png suffix)")

    p = sub.add_parser("selftest", help="check kernels and driver against oracles")
    p.add_argument("--pairs", type=int, default=20_000)
    p.add_argument("--workloads", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load_pair(args):
    a, b = datagen.read_run(args.a), datagen.read_run(args.b)
    if a.lane_bits != args.geometry.lane_bits or b.lane_bits != args.geometry.lane_bits:
        raise datagen.ValidationError(
            f"runs have {a.lane_bits}/{b.lane_bits}-bit lanes; "
            f"--geometry {args.geometry} needs {args.geometry.lane_bits}"
        )
    return a, b


def cmd_intersect(args) -> int:
    a, b = _load_pair(args)
    choice = choose_kernel(args.geometry, args.impl)
    result = driver.intersect_runs(a, b, args.geometry, choice)
    datagen.write_run(args.out, driver.SortedRun(a.lane_bits, result.values))
    print(result.count)
    return EXIT_OK


def cmd_size(args) -> int:
    a, b = _load_pair(args)
    choice = choose_kernel(args.geometry, args.impl)
    print(driver.intersect_size(a, b, args.geometry, choice))
    return EXIT_OK


def cmd_gen(args) -> int:
    spec = datagen.WorkloadSpec(
        seed=args.seed,
        lane_bits=args.geometry.lane_bits,
        len_a=args.len_a,
        len_b=args.len_b,
        overlap_fraction=args.overlap,
    )
    a, b, expected = datagen.generate_runs(spec)
    args.out.mkdir(parents=True, exist_ok=True)
    datagen.write_run(args.out / "a.vsec", a)
    datagen.write_run(args.out / "b.vsec", b)
    meta = spec.to_dict() | {"expected_intersection_size": expected}
    (args.out / "workload.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(expected)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .plotting import plot_bench

    geometries = sorted(set(args.geometry or GEOMETRIES), key=GEOMETRIES.index)
    flags = args.impl or ["native", "fast", "memory"]
    impls = [_IMPL_FLAGS[f][1] if f not in ("native", "scalar") else Implementation(f) for f in flags]
    template = datagen.WorkloadSpec(
        seed=args.seed,
        lane_bits=32,
        len_a=args.len_a,
        len_b=args.len_b,
        overlap_fraction=args.overlap,
    )
    records = bench.run_grid(template, geometries, impls, reps=args.reps)
    table = bench.emit_table(records, args.format)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_bytes(table)
    else:
        sys.stdout.write(table.decode())
    figure = args.figure or (args.out.with_suffix(".png") if args.out else None)
    if figure and records:
        plot_bench(records, figure)
        log.info("figure written to %s", figure)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(args.pairs, args.workloads, args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_INTERNAL


COMMANDS = {
    "intersect": cmd_intersect,
    "size": cmd_size,
    "gen": cmd_gen,
    "bench": cmd_bench,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (VecsectError, OSError) as exc:
        print(f"vecsect: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception:
        log.exception("internal failure")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
