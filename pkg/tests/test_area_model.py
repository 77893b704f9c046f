import pytest
from hypothesis import given
from hypothesis import strategies as st

from p2m.area_model import (
    Limiter,
    normalized_area,
    pixel_area,
    weight_footprint,
    weights_per_pixel,
)
from p2m.techlib import BondTech, LayerSpec, ProcessNode, load_tech_library

LIB = load_tech_library(b"{}")
N45, N28 = LIB.node("n45"), LIB.node("n28")
CUCU, TSV = LIB.bond("cu-cu"), LIB.bond("tsv")


def layer(k, s, c_o):
    return LayerSpec(k=k, s=s, c_o=c_o, h_i=512, w_i=512)


class TestWeightsPerPixel:
    def test_non_overlapping_stride_needs_one_per_channel(self):
        assert weights_per_pixel(layer(3, 3, 32)) == 32

    def test_unit_stride(self):
        assert weights_per_pixel(layer(3, 1, 64)) == 576

    def test_ceiling_of_partial_overlap(self):
        assert weights_per_pixel(layer(5, 2, 16)) == 144


class TestFootprint:
    def test_small_channel_count_is_bond_limited(self):
        fp = weight_footprint(layer(3, 3, 32), N28, TSV)
        assert fp.n_t == 32
        assert fp.w_px == pytest.approx(6.3e-6)
        assert fp.h_px == pytest.approx(6.3e-6)
        assert fp.limiter_w is Limiter.BOND
        assert fp.limiter_h is Limiter.BOND
        assert fp.min_pitch == pytest.approx(6.3e-6)

    def test_large_channel_count_is_transistor_limited_in_height(self):
        fp = weight_footprint(layer(3, 3, 64), N28, TSV)
        assert fp.h_px == pytest.approx(8.53e-6, abs=1e-12)
        assert fp.limiter_h is Limiter.TRANSISTOR
        assert fp.limiter_w is Limiter.BOND
        assert fp.pitch_limiter is Limiter.TRANSISTOR

    def test_exact_tie_labeled_bond_limited(self):
        # n_t = 2: width term = 1*cpp, height term = 5*mp + h_bond; pick
        # values so both equal the bond pitch.
        node = ProcessNode("tie", cpp=1e-6, mp=0.1e-6)
        bond = BondTech("tie", bond_pitch=1e-6, bond_height=0.5e-6)
        fp = weight_footprint(layer(1, 1, 2), node, bond)
        assert fp.w_px == fp.h_px == 1e-6
        assert fp.limiter_w is Limiter.BOND
        assert fp.limiter_h is Limiter.BOND
        assert fp.pitch_limiter is Limiter.BOND

    def test_odd_transistor_count_rounds_column_up(self):
        fp = weight_footprint(layer(1, 1, 3), N45, CUCU)
        assert fp.n_t == 3
        # 2 poly pitches, not 1.5
        assert fp.w_px == pytest.approx(max(2 * N45.cpp, CUCU.bond_pitch))


class TestPixelArea:
    def test_unit_stride_64_channels_n45(self):
        assert pixel_area(layer(3, 1, 64), N45, CUCU) * 1e12 == pytest.approx(4462.9632)

    def test_unit_stride_64_channels_n28(self):
        assert pixel_area(layer(3, 1, 64), N28, CUCU) * 1e12 == pytest.approx(1818.2016)

    def test_node_scaling_ratio(self):
        ratio = pixel_area(layer(3, 1, 64), N45, CUCU) / pixel_area(layer(3, 1, 64), N28, CUCU)
        assert ratio == pytest.approx(2.4546, abs=1e-3)

    def test_single_weight_is_bond_floor(self):
        assert pixel_area(layer(1, 1, 1), N28, CUCU) == pytest.approx(1e-12)


class TestNormalizedArea:
    def test_identity(self):
        point = (layer(3, 1, 64), N45, CUCU)
        assert normalized_area(point, point) == 1.0

    def test_node_ratio(self):
        ratio = normalized_area((layer(3, 1, 64), N45, CUCU), (layer(3, 1, 64), N28, CUCU))
        assert ratio == pytest.approx(2.4546, abs=1e-3)

    def test_non_overlapping_stride_shrinks_area(self):
        ratio = normalized_area((layer(3, 3, 256), N28, CUCU), (layer(3, 1, 256), N28, CUCU))
        assert ratio < 1.0


@given(
    k=st.integers(1, 8),
    s=st.integers(1, 8),
    c_o=st.integers(1, 512),
    node=st.sampled_from([N45, N28]),
    bond=st.sampled_from([CUCU, TSV]),
)
def test_footprint_invariants(k, s, c_o, node, bond):
    lay = LayerSpec(k=k, s=s, c_o=c_o, h_i=1024, w_i=1024)
    fp = weight_footprint(lay, node, bond)
    assert fp.min_pitch == max(fp.w_px, fp.h_px)
    assert fp.w_px >= bond.bond_pitch
    assert fp.h_px >= bond.bond_pitch
    # monotone in channels, kernel; antitone in stride
    assert weights_per_pixel(lay) <= weights_per_pixel(LayerSpec(k=k, s=s, c_o=c_o + 1, h_i=1024, w_i=1024))
    assert weights_per_pixel(lay) <= weights_per_pixel(LayerSpec(k=k + 1, s=s, c_o=c_o, h_i=1024, w_i=1024))
    if s > 1:
        assert weights_per_pixel(LayerSpec(k=k, s=s - 1, c_o=c_o, h_i=1024, w_i=1024)) >= weights_per_pixel(lay)
    if s >= k:
        assert fp.n_t == c_o


@given(c_o=st.integers(1, 512), node=st.sampled_from([N45, N28]), bond=st.sampled_from([CUCU, TSV]))
def test_min_pitch_non_decreasing_in_channels(c_o, node, bond):
    a = weight_footprint(layer(3, 3, c_o), node, bond).min_pitch
    b = weight_footprint(layer(3, 3, c_o + 1), node, bond).min_pitch
    assert a <= b


def test_limiter_crossover_is_single():
    # Scanning channels must show one transition: both dims bond-limited
    # below, at least one transistor-limited above.
    states = []
    for c_o in range(1, 1025):
        fp = weight_footprint(layer(3, 3, c_o), N28, TSV)
        states.append(fp.limiter_w is Limiter.TRANSISTOR or fp.limiter_h is Limiter.TRANSISTOR)
    first = states.index(True)
    assert all(not s for s in states[:first])
    assert all(states[first:])
