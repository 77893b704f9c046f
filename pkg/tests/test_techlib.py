import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from p2m.errors import ConfigError
from p2m.techlib import (
    AdcSpec,
    BondTech,
    IoTech,
    LayerSpec,
    PixelSpec,
    ProcessNode,
    TechLibrary,
    dump_tech_library,
    load_tech_library,
)
from p2m.units import parse_count, parse_quantity


class TestUnits:
    @pytest.mark.parametrize(
        "value,dimension,expected",
        [
            ("190nm", "length", 190e-9),
            ("6.3um", "length", 6.3e-6),
            ("0.5um", "length", 0.5e-6),
            ("1us", "time", 1e-6),
            ("50ms", "time", 50e-3),
            ("12.34pJ", "energy", 12.34e-12),
            ("176.2fJ", "energy", 176.2e-15),
            ("1Gbps", "rate", 1e9),
            ("54Mbps", "rate", 54e6),
            (1e-6, "length", 1e-6),
            (3, "time", 3.0),
        ],
    )
    def test_parse(self, value, dimension, expected):
        assert parse_quantity(value, dimension) == pytest.approx(expected, rel=1e-15)

    def test_bad_suffix_names_token(self):
        with pytest.raises(ConfigError, match="190nx"):
            parse_quantity("190nx", "length", "cpp")

    def test_missing_suffix_rejected(self):
        with pytest.raises(ConfigError, match="missing a unit suffix"):
            parse_quantity("190", "length")

    def test_wrong_dimension_suffix(self):
        with pytest.raises(ConfigError):
            parse_quantity("190nm", "time")

    def test_counts(self):
        assert parse_count(4) == 4
        assert parse_count(4.0) == 4
        assert parse_count("12") == 12
        with pytest.raises(ConfigError):
            parse_count(4.5)
        with pytest.raises(ConfigError):
            parse_count(True)


class TestBuiltins:
    def test_process_nodes_match_reference_constants(self):
        lib = load_tech_library(b"{}")
        assert (lib.node("n45").cpp, lib.node("n45").mp) == (190e-9, 140e-9)
        assert (lib.node("n28").cpp, lib.node("n28").mp) == (120e-9, 90e-9)

    def test_bond_techs_match_reference_constants(self):
        lib = load_tech_library(b"{}")
        assert (lib.bond("cu-cu").bond_pitch, lib.bond("cu-cu").bond_height) == (1e-6, 0.5e-6)
        assert (lib.bond("tsv").bond_pitch, lib.bond("tsv").bond_height) == (6.3e-6, 2.5e-6)

    def test_io_techs_match_reference_constants(self):
        lib = load_tech_library(b"{}")
        assert lib.io("lvds").bandwidth == 1e9
        assert lib.io("lvds").energy_per_bit == 12.34e-12
        assert lib.io("interposer-2.5d").energy_per_bit == 259.9e-15
        assert lib.io("tsv-3d").energy_per_bit == 176.2e-15
        assert lib.io("wifi").energy_per_bit == 19.5e-12

    def test_wifi_has_no_bandwidth_default(self):
        wifi = load_tech_library(b"{}").io("wifi")
        assert wifi.bandwidth is None
        with pytest.raises(ConfigError, match="bandwidth"):
            wifi.require_bandwidth()

    def test_empty_document_keeps_builtins_resolvable(self):
        lib = load_tech_library(b"{}")
        assert lib.entries() == []
        assert lib.node("n45").name == "n45"


class TestLoading:
    def test_user_entries_with_suffixes(self):
        doc = {
            "process_nodes": {"n7": {"cpp": "57nm", "mp": "40nm"}},
            "io_techs": {"serdes": {"bandwidth": "10Gbps", "energy_per_bit": "1pJ", "n_pads": 2}},
            "adcs": {"a": {"bits": 10, "t_adc": "2us", "e_adc": "1pJ"}},
            "pixels": {"px": {"t_exp": "30us", "e_px": 0, "cis_pixel_pitch": "1.1um"}},
        }
        lib = load_tech_library(json.dumps(doc))
        assert lib.node("n7").cpp == 57e-9
        assert lib.io("serdes").bandwidth == 10e9
        assert lib.io("serdes").n_pads == 2
        assert lib.adc("a").t_adc == 2e-6
        assert lib.pixel("px").cis_pixel_pitch == pytest.approx(1.1e-6)
        assert len(lib.entries()) == 4

    def test_parse_error_reports_location(self):
        with pytest.raises(ConfigError, match=r"line \d+, column \d+"):
            load_tech_library(b'{"process_nodes": {bad}}')

    def test_invariant_violation_names_field_and_bound(self):
        doc = {"process_nodes": {"bad": {"cpp": -1, "mp": "1nm"}}}
        with pytest.raises(ConfigError, match=r"cpp must be > 0"):
            load_tech_library(json.dumps(doc))

    def test_missing_field_named(self):
        with pytest.raises(ConfigError, match="mp"):
            load_tech_library(json.dumps({"process_nodes": {"x": {"cpp": "1nm"}}}))

    def test_reserved_name_needs_override_flag(self):
        doc = {"process_nodes": {"n45": {"cpp": "100nm", "mp": "80nm"}}}
        with pytest.raises(ConfigError, match="override"):
            load_tech_library(json.dumps(doc))
        doc["process_nodes"]["n45"]["override"] = True
        lib = load_tech_library(json.dumps(doc))
        assert lib.node("n45").cpp == pytest.approx(100e-9, rel=1e-15)

    def test_unknown_name_lists_known(self):
        with pytest.raises(ConfigError, match="n45"):
            load_tech_library(b"{}").node("n3")

    def test_stack_and_baseline_sections(self):
        doc = {
            "adcs": {"adc8": {"bits": 8}, "adc12": {"bits": 12, "t_adc": "1us"}},
            "pixels": {"px": {"t_exp": "50us", "e_px": 0, "cis_pixel_pitch": "1um"}},
            "stack": {"node": "n28", "bond": "tsv", "io": "lvds", "adc": "adc8", "pixel": "px"},
            "baseline": {"adc": "adc12", "readout_bits": 12},
        }
        lib = load_tech_library(json.dumps(doc))
        stack = lib.resolve_stack()
        assert stack.node.name == "n28" and stack.adc.bits == 8
        baseline = lib.resolve_baseline()
        assert baseline.adc.bits == 12 and baseline.readout_bits == 12
        assert baseline.io_for(stack) is stack.io

    def test_stack_missing_component_named(self):
        lib = load_tech_library(b"{}")
        with pytest.raises(ConfigError, match="pixel"):
            lib.resolve_stack({"node": "n28", "bond": "tsv", "io": "lvds", "adc": "a"})


names = st.from_regex(r"u-[a-z]{1,6}", fullmatch=True)
lengths = st.floats(min_value=1e-9, max_value=1e-3, allow_nan=False, allow_infinity=False)
times = st.floats(min_value=0, max_value=1.0, allow_nan=False, allow_infinity=False)
energies = st.floats(min_value=0, max_value=1e-6, allow_nan=False, allow_infinity=False)
rates = st.floats(min_value=1e3, max_value=1e12, allow_nan=False, allow_infinity=False)


@st.composite
def libraries(draw):
    lib = TechLibrary()
    lib.process_nodes = {
        n: ProcessNode(n, draw(lengths), draw(lengths))
        for n in draw(st.sets(names, max_size=3))
    }
    lib.bond_techs = {
        n: BondTech(n, draw(lengths), draw(times) * 1e-6)
        for n in draw(st.sets(names, max_size=3))
    }
    lib.io_techs = {
        n: IoTech(n, draw(st.one_of(st.none(), rates)), draw(energies), draw(st.integers(1, 16)))
        for n in draw(st.sets(names, max_size=3))
    }
    lib.adcs = {
        n: AdcSpec(draw(st.integers(1, 16)), draw(times), draw(energies))
        for n in draw(st.sets(names, max_size=3))
    }
    lib.pixels = {
        n: PixelSpec(draw(times), draw(energies), draw(lengths))
        for n in draw(st.sets(names, max_size=3))
    }
    return lib


@given(libraries())
def test_round_trip_is_lossless(lib):
    reloaded = load_tech_library(dump_tech_library(lib))
    assert reloaded.process_nodes == lib.process_nodes
    assert reloaded.bond_techs == lib.bond_techs
    assert reloaded.io_techs == lib.io_techs
    assert reloaded.adcs == lib.adcs
    assert reloaded.pixels == lib.pixels


def test_layer_spec_bounds():
    with pytest.raises(ValueError, match="k must be"):
        LayerSpec(k=0, s=1, c_o=1, h_i=8, w_i=8)
    with pytest.raises(ValueError, match="s must be"):
        LayerSpec(k=1, s=0, c_o=1, h_i=8, w_i=8)
    with pytest.raises(ValueError, match="pool_stride"):
        LayerSpec(k=1, s=1, c_o=1, h_i=8, w_i=8, pool_stride=0)
