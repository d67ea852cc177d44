"""Machine-code kernels JIT-compiled through llvmlite.

Two things live here: the hardware two-way intersection kernel (only ever
executed when the CPU reports the instruction) and a time-stamp counter
reader used by the benchmark harness. Compiled kernels share one C signature,
``uint32 kernel(uint64 addr_a, uint64 addr_b)``, taking the addresses of two
L-lane blocks and returning the first mask, so the driver can call either a
hardware or a portable IR kernel through the same plumbing.
"""

from __future__ import annotations

import ctypes
import functools
import platform
import threading

import llvmlite.binding as llvm

from .dispatch import cpuinfo_flags, detect_capabilities
from .errors import UnsupportedCapabilityError, UnsupportedGeometryError
from .geometry import KernelGeometry

KERNEL_CFUNC = ctypes.CFUNCTYPE(ctypes.c_uint32, ctypes.c_uint64, ctypes.c_uint64)

_lock = threading.Lock()
_engines: list = []  # keeps JIT'd code alive for the life of the process


def _init_llvm():
    llvm.initialize_native_target()
    llvm.initialize_native_asmprinter()


def _vec(geometry: KernelGeometry) -> str:
    return f"<{geometry.lane_count} x i{geometry.lane_bits}>"


def _epilogue(geometry: KernelGeometry, mask: str) -> list[str]:
    n = geometry.lane_count
    return [
        f"  %bits = bitcast <{n} x i1> {mask} to i{n}",
        f"  %wide = zext i{n} %bits to i32",
        "  ret i32 %wide",
        "}",
    ]


def _prologue(geometry: KernelGeometry, name: str) -> list[str]:
    vec = _vec(geometry)
    return [
        f"define i32 @{name}(i64 %pa, i64 %pb) {{",
        "  %a = inttoptr i64 %pa to ptr",
        "  %b = inttoptr i64 %pb to ptr",
        f"  %va = load {vec}, ptr %a, align 1",
        f"  %vb = load {vec}, ptr %b, align 1",
    ]


def native_ir(geometry: KernelGeometry) -> str:
    """IR calling the hardware two-way intersection and keeping the first mask."""
    if geometry.lane_bits == 16:
        raise UnsupportedGeometryError(
            f"no native two-way intersection for {geometry.lane_bits}-bit lanes"
        )
    letter = "d" if geometry.lane_bits == 32 else "q"
    vec = _vec(geometry)
    pair = f"{{<{geometry.lane_count} x i1>, <{geometry.lane_count} x i1>}}"
    intrinsic = f"@llvm.x86.avx512.vp2intersect.{letter}.{geometry.vector_bits}"
    lines = [f"declare {pair} {intrinsic}({vec}, {vec})", ""]
    lines += _prologue(geometry, "first_mask")
    lines += [
        f"  %r = call {pair} {intrinsic}({vec} %va, {vec} %vb)",
        f"  %m = extractvalue {pair} %r, 0",
    ]
    lines += _epilogue(geometry, "%m")
    return "\n".join(lines)


def portable_ir(geometry: KernelGeometry) -> str:
    """Broadcast-and-compare kernel in plain IR; runs on any target."""
    n = geometry.lane_count
    vec = _vec(geometry)
    lines = _prologue(geometry, "first_mask")
    acc = "zeroinitializer"
    for j in range(n):
        splat = ", ".join(f"i32 {j}" for _ in range(n))
        lines += [
            f"  %b{j} = shufflevector {vec} %vb, {vec} poison, <{n} x i32> <{splat}>",
            f"  %e{j} = icmp eq {vec} %va, %b{j}",
            f"  %o{j} = or <{n} x i1> {acc}, %e{j}",
        ]
        acc = f"%o{j}"
    lines += _epilogue(geometry, acc)
    return "\n".join(lines)


def _host_target_machine():
    _init_llvm()
    target = llvm.Target.from_default_triple()
    return target.create_target_machine(
        cpu=llvm.get_host_cpu_name(),
        features=llvm.get_host_cpu_features().flatten(),
        opt=2,
    )


def compile_function(ir: str, name: str, functype):
    """JIT ``ir`` for the host CPU and return ``name`` as a ctypes function."""
    with _lock:
        tm = _host_target_machine()
        module = llvm.parse_assembly(ir)
        module.verify()
        engine = llvm.create_mcjit_compiler(module, tm)
        engine.finalize_object()
        _engines.append(engine)
        return functype(engine.get_function_address(name))


def emit_assembly(ir: str, cpu: str = "tigerlake", features: str = "") -> str:
    """Compile ``ir`` for ``cpu`` without executing it; returns assembly text."""
    _init_llvm()
    target = llvm.Target.from_default_triple()
    tm = target.create_target_machine(cpu=cpu, features=features, opt=2)
    module = llvm.parse_assembly(ir)
    module.verify()
    return tm.emit_assembly(module)


@functools.cache
def native_kernel(geometry: KernelGeometry):
    """ctypes kernel backed by the hardware instruction.

    Raises before compiling anything if the CPU lacks the instruction, since
    instruction selection would fail for such a target.
    """
    ir = native_ir(geometry)
    if not detect_capabilities().has_native_2intersect:
        raise UnsupportedCapabilityError("this CPU has no native two-way intersection instruction")
    return compile_function(ir, "first_mask", KERNEL_CFUNC)


@functools.cache
def portable_kernel(geometry: KernelGeometry):
    return compile_function(portable_ir(geometry), "first_mask", KERNEL_CFUNC)


_TSC_IR = """
declare i64 @llvm.x86.rdtsc()
define i64 @read_tsc() {
  %t = call i64 @llvm.x86.rdtsc()
  ret i64 %t
}
"""


def tsc_available() -> bool:
    """True when an invariant time-stamp counter can be read."""
    if platform.machine().lower() not in ("x86_64", "amd64"):
        return False
    flags = cpuinfo_flags()
    return "constant_tsc" in flags and "nonstop_tsc" in flags


@functools.cache
def tsc_reader():
    """Return a zero-argument callable reading the time-stamp counter, or None."""
    if not tsc_available():
        return None
    return compile_function(_TSC_IR, "read_tsc", ctypes.CFUNCTYPE(ctypes.c_uint64))
