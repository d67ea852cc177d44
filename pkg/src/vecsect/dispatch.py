"""CPU capability detection and per-geometry kernel selection."""

from __future__ import annotations

import enum
import functools
import os
import platform
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidArgumentError, UnsupportedCapabilityError, UnsupportedGeometryError
from .geometry import KernelGeometry

FORCE_ENV = "VECSECT_FORCE"


class Implementation(str, enum.Enum):
    NATIVE = "native"
    EMULATED_FAST = "emulated_fast"
    EMULATED_NAIVE = "emulated_naive"
    EMULATED_MEMORY = "emulated_memory"
    STRICT = "strict"
    SCALAR = "scalar"

    def __str__(self) -> str:
        return self.value


EMULATED = (
    Implementation.EMULATED_FAST,
    Implementation.EMULATED_NAIVE,
    Implementation.EMULATED_MEMORY,
    Implementation.STRICT,
)

# short names accepted by the CLI and by the driver's kernel argument
_ALIASES = {
    "native": Implementation.NATIVE,
    "fast": Implementation.EMULATED_FAST,
    "naive": Implementation.EMULATED_NAIVE,
    "memory": Implementation.EMULATED_MEMORY,
    "strict": Implementation.STRICT,
    "scalar": Implementation.SCALAR,
}


def parse_implementation(name: str | Implementation) -> Implementation:
    if isinstance(name, Implementation):
        return name
    try:
        return _ALIASES.get(name) or Implementation(name)
    except ValueError:
        raise InvalidArgumentError(f"unknown implementation {name!r}") from None


class Policy(str, enum.Enum):
    AUTO = "auto"
    FORCE_NATIVE = "force_native"
    FORCE_EMULATED = "force_emulated"
    FORCE_SCALAR = "force_scalar"


_FORCE_VALUES = {
    "native": Policy.FORCE_NATIVE,
    "emulated": Policy.FORCE_EMULATED,
    "scalar": Policy.FORCE_SCALAR,
}


@dataclass(frozen=True)
class CapabilitySet:
    has_512bit_vectors: bool = False
    has_256bit_vectors: bool = False
    has_128bit_vectors: bool = False
    has_native_2intersect: bool = False

    def __post_init__(self):
        if self.has_native_2intersect and not self.has_512bit_vectors:
            raise InvalidArgumentError("native two-way intersection implies 512-bit vectors")

    def has_vectors(self, vector_bits: int) -> bool:
        return {
            512: self.has_512bit_vectors,
            256: self.has_256bit_vectors,
            128: self.has_128bit_vectors,
        }[vector_bits]


SCALAR_ONLY = CapabilitySet()


@dataclass(frozen=True)
class KernelChoice:
    geometry: KernelGeometry
    implementation: Implementation

    def __post_init__(self):
        object.__setattr__(self, "implementation", parse_implementation(self.implementation))
        if self.implementation is Implementation.NATIVE and self.geometry.lane_bits == 16:
            raise UnsupportedGeometryError(
                f"no native two-way intersection for {self.geometry.lane_bits}-bit lanes"
            )
        if self.implementation is Implementation.STRICT and self.geometry.name != "512x32":
            raise UnsupportedGeometryError(
                f"strict emulation exists only for 512x32, not {self.geometry}"
            )


def cpuinfo_flags(path: str | os.PathLike = "/proc/cpuinfo") -> frozenset[str]:
    """CPU flags as the OS reports them; empty when unavailable."""
    try:
        text = Path(path).read_text()
    except OSError:
        return frozenset()
    for line in text.splitlines():
        if line.startswith("flags"):
            return frozenset(line.partition(":")[2].split())
    return frozenset()


def _capabilities_from_flags(flags: set[str] | frozenset[str]) -> CapabilitySet:
    has512 = "avx512f" in flags
    return CapabilitySet(
        has_512bit_vectors=has512,
        has_256bit_vectors="avx2" in flags,
        has_128bit_vectors="sse2" in flags or "sse4_2" in flags,
        has_native_2intersect=has512
        and "avx512vl" in flags
        and "avx512_vp2intersect" in flags,
    )


@functools.cache
def _host_capabilities() -> CapabilitySet:
    if platform.machine().lower() not in ("x86_64", "amd64", "i386", "i686"):
        return SCALAR_ONLY
    try:
        import llvmlite.binding as llvm

        features = llvm.get_host_cpu_features()
        flags = {name for name in features if features[name]}
        # llvm spells the feature without the underscore
        if "avx512vp2intersect" in flags:
            flags.add("avx512_vp2intersect")
    except Exception:
        flags = set(cpuinfo_flags())
    return _capabilities_from_flags(flags)


def detect_capabilities(environ: dict[str, str] | None = None) -> CapabilitySet:
    """Capabilities of the executing CPU; ``VECSECT_FORCE=scalar`` reports none."""
    env = os.environ if environ is None else environ
    if env.get(FORCE_ENV, "").strip().lower() == "scalar":
        return SCALAR_ONLY
    return _host_capabilities()


def policy_from_env(default: Policy = Policy.AUTO, environ: dict[str, str] | None = None) -> Policy:
    env = os.environ if environ is None else environ
    value = env.get(FORCE_ENV, "").strip().lower()
    if not value:
        return default
    try:
        return _FORCE_VALUES[value]
    except KeyError:
        raise InvalidArgumentError(
            f"{FORCE_ENV} must be one of {sorted(_FORCE_VALUES)}, got {value!r}"
        ) from None


def select_kernel(
    geometry: KernelGeometry,
    policy: Policy | str = Policy.AUTO,
    caps: CapabilitySet | None = None,
    emulated: Implementation = Implementation.EMULATED_FAST,
) -> KernelChoice:
    """Pick an implementation for ``geometry``.

    ``emulated`` names the variant used when the policy resolves to
    emulation. Emulated kernels are portable code, so forcing emulation never
    fails on capability; ``auto`` still only prefers them where the CPU has
    vectors of that width.
    """
    policy = Policy(policy)
    caps = detect_capabilities() if caps is None else caps
    if policy is Policy.FORCE_SCALAR:
        return KernelChoice(geometry, Implementation.SCALAR)
    if policy is Policy.FORCE_NATIVE:
        if geometry.lane_bits == 16:
            raise UnsupportedGeometryError(
                f"no native two-way intersection for {geometry.lane_bits}-bit lanes"
            )
        if not caps.has_native_2intersect:
            raise UnsupportedCapabilityError(
                "this CPU has no native two-way intersection instruction"
            )
        return KernelChoice(geometry, Implementation.NATIVE)
    if emulated not in EMULATED:
        raise InvalidArgumentError(f"{emulated} is not an emulated implementation")
    if policy is Policy.FORCE_EMULATED:
        return KernelChoice(geometry, emulated)
    if caps.has_vectors(geometry.vector_bits):
        return KernelChoice(geometry, emulated)
    return KernelChoice(geometry, Implementation.SCALAR)


def available_implementations(
    geometry: KernelGeometry, caps: CapabilitySet | None = None
) -> list[Implementation]:
    """Every implementation that :func:`select_kernel` can reach for ``geometry``."""
    caps = detect_capabilities() if caps is None else caps
    found = [Implementation.SCALAR]
    for variant in EMULATED:
        try:
            found.append(KernelChoice(geometry, variant).implementation)
        except UnsupportedGeometryError:
            pass
    if geometry.lane_bits != 16 and caps.has_native_2intersect:
        found.append(Implementation.NATIVE)
    return found
