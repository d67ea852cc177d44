import numpy as np
import pytest

from vecsect.errors import InvalidArgumentError
from vecsect.geometry import GEOMETRIES, KernelGeometry, lane_dtype, parse_geometry


def test_nine_geometries_in_table_order():
    names = [g.name for g in GEOMETRIES]
    assert names == [
        "512x16", "512x32", "512x64",
        "256x16", "256x32", "256x64",
        "128x16", "128x32", "128x64",
    ]


def test_derived_counts(geometry):
    L, G, g = geometry.lane_count, geometry.block_count, geometry.block_lanes
    assert L == G * g
    assert L in (2, 4, 8, 16, 32)
    assert geometry.full_mask == 2**L - 1
    assert geometry.dtype.itemsize * 8 == geometry.lane_bits


@pytest.mark.parametrize(
    "vb, lb, L, G, g",
    [(512, 32, 16, 4, 4), (512, 16, 32, 4, 8), (128, 64, 2, 1, 2), (256, 64, 4, 2, 2)],
)
def test_counts_by_hand(vb, lb, L, G, g):
    geo = KernelGeometry(vb, lb)
    assert (geo.lane_count, geo.block_count, geo.block_lanes) == (L, G, g)


@pytest.mark.parametrize("vb, lb", [(64, 32), (1024, 32), (512, 8), (512, 128)])
def test_invalid_widths_rejected(vb, lb):
    with pytest.raises(InvalidArgumentError):
        KernelGeometry(vb, lb)


def test_parse_and_names():
    geo = parse_geometry("256X64")
    assert geo == KernelGeometry(256, 64)
    assert str(geo) == "256x64"
    assert geo.intrinsic_name == "_mm256_2intersect_epi64_mask"
    assert KernelGeometry(128, 16).intrinsic_name == "_mm_2intersect_epi16_mask"
    for bad in ("512", "512x", "axb", "512x32x1", "300x32"):
        with pytest.raises(InvalidArgumentError):
            parse_geometry(bad)


def test_lane_dtype():
    assert lane_dtype(64) == np.uint64
    with pytest.raises(InvalidArgumentError):
        lane_dtype(8)
