"""Domain types for technology and workload parameters, plus config ingestion.

Every symbol consumed by the analytical models lives here: process node
pitches, 3D-bond geometry, IO link properties, ADC and pixel timing/energy,
and the first-layer workload description. A small built-in library carries
the reference constants for the supported nodes, bonds, and IO links; user
configuration files (JSON) can add entries or explicitly override the
built-ins.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .units import parse_count, parse_quantity


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


@dataclass(frozen=True)
class ProcessNode:
    """Logic-process layout pitches for the weight die."""

    name: str
    cpp: float  # contacted poly pitch, meters
    mp: float  # metal pitch, meters

    def __post_init__(self):
        _require(self.cpp > 0, f"cpp must be > 0 (got {self.cpp})")
        _require(self.mp > 0, f"mp must be > 0 (got {self.mp})")


@dataclass(frozen=True)
class BondTech:
    """Die-to-die 3D integration technology."""

    name: str
    bond_pitch: float  # meters
    bond_height: float  # meters

    def __post_init__(self):
        _require(self.bond_pitch > 0, f"bond_pitch must be > 0 (got {self.bond_pitch})")
        _require(self.bond_height >= 0, f"bond_height must be >= 0 (got {self.bond_height})")


@dataclass(frozen=True)
class IoTech:
    """Off-chip link: per-pad bandwidth, energy per bit, pad count.

    `bandwidth` may be None for links whose reference data gives only an
    energy-per-bit figure; any computation that needs the bandwidth then
    demands an explicit user-supplied value.
    """

    name: str
    bandwidth: float | None  # bits/second per pad
    energy_per_bit: float  # joules/bit
    n_pads: int = 1

    def __post_init__(self):
        if self.bandwidth is not None:
            _require(self.bandwidth > 0, f"bandwidth must be > 0 (got {self.bandwidth})")
        _require(self.energy_per_bit >= 0, f"energy_per_bit must be >= 0 (got {self.energy_per_bit})")
        _require(self.n_pads >= 1, f"n_pads must be >= 1 (got {self.n_pads})")

    def require_bandwidth(self) -> float:
        if self.bandwidth is None:
            raise ConfigError(
                f"io tech {self.name!r} has no bandwidth value; supply one explicitly "
                f"(it is not part of the built-in constants)"
            )
        return self.bandwidth


@dataclass(frozen=True)
class AdcSpec:
    """Column ADC: bit precision plus per-conversion time and energy."""

    bits: int
    t_adc: float = 0.0  # seconds per conversion
    e_adc: float = 0.0  # joules per conversion

    def __post_init__(self):
        _require(1 <= self.bits <= 16, f"bits must be within [1, 16] (got {self.bits})")
        _require(self.t_adc >= 0, f"t_adc must be >= 0 (got {self.t_adc})")
        _require(self.e_adc >= 0, f"e_adc must be >= 0 (got {self.e_adc})")


@dataclass(frozen=True)
class PixelSpec:
    """Pixel-level timing/energy plus the native sensor pitch."""

    t_exp: float  # exposure time, seconds
    e_px: float  # energy per in-pixel convolution operation, joules
    cis_pixel_pitch: float  # native pixel pitch of the sensor die, meters

    def __post_init__(self):
        _require(self.t_exp >= 0, f"t_exp must be >= 0 (got {self.t_exp})")
        _require(self.e_px >= 0, f"e_px must be >= 0 (got {self.e_px})")
        _require(self.cis_pixel_pitch > 0, f"cis_pixel_pitch must be > 0 (got {self.cis_pixel_pitch})")


@dataclass(frozen=True)
class LayerSpec:
    """First convolution layer workload (square kernels, RGB input).

    `binning` averages b x b pixel blocks before the convolution;
    `pool_stride` applies peripheral pooling to the convolution output.
    Both default to 1 (off). Whether the convolution window actually fits
    the (binned, padded) input is checked at geometry-evaluation time, so
    degenerate combinations can be flagged instead of rejected here.
    """

    k: int
    s: int
    c_o: int
    h_i: int
    w_i: int
    p: int = 0
    binning: int = 1
    pool_stride: int = 1

    def __post_init__(self):
        _require(self.k >= 1, f"k must be >= 1 (got {self.k})")
        _require(self.s >= 1, f"s must be >= 1 (got {self.s})")
        _require(self.c_o >= 1, f"c_o must be >= 1 (got {self.c_o})")
        _require(self.p >= 0, f"p must be >= 0 (got {self.p})")
        _require(self.h_i >= 1, f"h_i must be >= 1 (got {self.h_i})")
        _require(self.w_i >= 1, f"w_i must be >= 1 (got {self.w_i})")
        _require(self.binning >= 1, f"binning must be >= 1 (got {self.binning})")
        _require(self.pool_stride >= 1, f"pool_stride must be >= 1 (got {self.pool_stride})")


@dataclass(frozen=True)
class TechStack:
    """Hardware side of a design point: one choice per technology axis."""

    node: ProcessNode
    bond: BondTech
    io: IoTech
    adc: AdcSpec
    pixel: PixelSpec


class ReadoutMode(enum.Enum):
    P2M = "p2m"
    CONVENTIONAL = "conventional"


@dataclass(frozen=True)
class BaselineConfig:
    """Conventional-readout reference used for normalized metrics.

    The readout model is row-sequential: every sensor row is exposed,
    converted by the baseline ADC, and shipped at `readout_bits` per pixel.
    IO and pixel entries default to the evaluated stack's own when omitted.
    """

    adc: AdcSpec
    io: IoTech | None = None
    pixel: PixelSpec | None = None
    readout_bits: int = 12

    def __post_init__(self):
        _require(self.readout_bits >= 1, f"readout_bits must be >= 1 (got {self.readout_bits})")

    def io_for(self, stack: TechStack) -> IoTech:
        return self.io if self.io is not None else stack.io

    def pixel_for(self, stack: TechStack) -> PixelSpec:
        return self.pixel if self.pixel is not None else stack.pixel


def _builtins() -> dict[str, dict]:
    return {
        "process_nodes": {
            "n45": ProcessNode("n45", cpp=190e-9, mp=140e-9),
            "n28": ProcessNode("n28", cpp=120e-9, mp=90e-9),
        },
        "bond_techs": {
            "cu-cu": BondTech("cu-cu", bond_pitch=1e-6, bond_height=0.5e-6),
            "tsv": BondTech("tsv", bond_pitch=6.3e-6, bond_height=2.5e-6),
        },
        "io_techs": {
            "lvds": IoTech("lvds", bandwidth=1e9, energy_per_bit=12.34e-12),
            "interposer-2.5d": IoTech("interposer-2.5d", bandwidth=None, energy_per_bit=259.9e-15),
            "tsv-3d": IoTech("tsv-3d", bandwidth=None, energy_per_bit=176.2e-15),
            "wifi": IoTech("wifi", bandwidth=None, energy_per_bit=19.5e-12),
        },
        "adcs": {},
        "pixels": {},
    }


_BUILTINS = _builtins()

RESERVED_NAMES = {
    section: frozenset(entries) for section, entries in _BUILTINS.items()
}

_SECTIONS = ("process_nodes", "bond_techs", "io_techs", "adcs", "pixels")


@dataclass
class TechLibrary:
    """User-declared entries layered over the built-in constants.

    Lookups fall back to the built-ins, so the reserved names are always
    resolvable even from an empty document.
    """

    process_nodes: dict[str, ProcessNode] = field(default_factory=dict)
    bond_techs: dict[str, BondTech] = field(default_factory=dict)
    io_techs: dict[str, IoTech] = field(default_factory=dict)
    adcs: dict[str, AdcSpec] = field(default_factory=dict)
    pixels: dict[str, PixelSpec] = field(default_factory=dict)
    stack_spec: dict | None = None
    baseline_spec: dict | None = None

    def _lookup(self, section: str, name: str):
        user = getattr(self, section)
        if name in user:
            return user[name]
        builtin = _BUILTINS[section]
        if name in builtin:
            return builtin[name]
        known = sorted(set(user) | set(builtin))
        raise ConfigError(f"unknown {section} entry {name!r}; known names: {', '.join(known) or '(none)'}")

    def node(self, name: str) -> ProcessNode:
        return self._lookup("process_nodes", name)

    def bond(self, name: str) -> BondTech:
        return self._lookup("bond_techs", name)

    def io(self, name: str) -> IoTech:
        return self._lookup("io_techs", name)

    def adc(self, name: str) -> AdcSpec:
        return self._lookup("adcs", name)

    def pixel(self, name: str) -> PixelSpec:
        return self._lookup("pixels", name)

    def entries(self) -> list:
        """All user-declared entries, in section order then name order."""
        out = []
        for section in _SECTIONS:
            table = getattr(self, section)
            out.extend(table[name] for name in sorted(table))
        return out

    def resolve_stack(self, spec: dict | None = None) -> TechStack:
        spec = spec if spec is not None else self.stack_spec
        if spec is None:
            raise ConfigError("no stack definition given and the library has no 'stack' section")
        missing = [key for key in ("node", "bond", "io", "adc", "pixel") if key not in spec]
        if missing:
            raise ConfigError(f"stack definition is missing: {', '.join(missing)}")
        return TechStack(
            node=self.node(spec["node"]),
            bond=self.bond(spec["bond"]),
            io=self.io(spec["io"]),
            adc=self.adc(spec["adc"]),
            pixel=self.pixel(spec["pixel"]),
        )

    def resolve_baseline(self, spec: dict | None = None) -> BaselineConfig | None:
        spec = spec if spec is not None else self.baseline_spec
        if spec is None:
            return None
        if "adc" not in spec:
            raise ConfigError("baseline section must name an 'adc' entry")
        try:
            return BaselineConfig(
                adc=self.adc(spec["adc"]),
                io=self.io(spec["io"]) if "io" in spec else None,
                pixel=self.pixel(spec["pixel"]) if "pixel" in spec else None,
                readout_bits=parse_count(spec.get("readout_bits", 12), "baseline.readout_bits"),
            )
        except ValueError as exc:
            raise ConfigError(f"baseline: {exc}") from exc


_FIELD_PARSERS = {
    "process_nodes": lambda name, obj: ProcessNode(
        name,
        cpp=parse_quantity(_take(obj, "cpp", name), "length", f"{name}.cpp"),
        mp=parse_quantity(_take(obj, "mp", name), "length", f"{name}.mp"),
    ),
    "bond_techs": lambda name, obj: BondTech(
        name,
        bond_pitch=parse_quantity(_take(obj, "bond_pitch", name), "length", f"{name}.bond_pitch"),
        bond_height=parse_quantity(_take(obj, "bond_height", name), "length", f"{name}.bond_height"),
    ),
    "io_techs": lambda name, obj: IoTech(
        name,
        bandwidth=(
            parse_quantity(obj["bandwidth"], "rate", f"{name}.bandwidth")
            if obj.get("bandwidth") is not None
            else None
        ),
        energy_per_bit=parse_quantity(_take(obj, "energy_per_bit", name), "energy", f"{name}.energy_per_bit"),
        n_pads=parse_count(obj.get("n_pads", 1), f"{name}.n_pads"),
    ),
    "adcs": lambda name, obj: AdcSpec(
        bits=parse_count(_take(obj, "bits", name), f"{name}.bits"),
        t_adc=parse_quantity(obj.get("t_adc", 0.0), "time", f"{name}.t_adc"),
        e_adc=parse_quantity(obj.get("e_adc", 0.0), "energy", f"{name}.e_adc"),
    ),
    "pixels": lambda name, obj: PixelSpec(
        t_exp=parse_quantity(_take(obj, "t_exp", name), "time", f"{name}.t_exp"),
        e_px=parse_quantity(obj.get("e_px", 0.0), "energy", f"{name}.e_px"),
        cis_pixel_pitch=parse_quantity(_take(obj, "cis_pixel_pitch", name), "length", f"{name}.cis_pixel_pitch"),
    ),
}


def _take(obj: dict, key: str, name: str):
    if key not in obj:
        raise ConfigError(f"{name}: missing required field {key!r}")
    return obj[key]


def load_tech_library(source) -> TechLibrary:
    """Load a JSON technology library from bytes, text, a path, or a stream.

    Built-in names may be redeclared only with an explicit `"override": true`
    flag on the entry.
    """
    text = _read_source(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration document must be a JSON object")

    lib = TechLibrary()
    for section in _SECTIONS:
        entries = doc.get(section, {})
        if not isinstance(entries, dict):
            raise ConfigError(f"{section}: expected a name-to-object map")
        parser = _FIELD_PARSERS[section]
        for name in entries:
            obj = entries[name]
            if not isinstance(obj, dict):
                raise ConfigError(f"{section}[{name!r}]: expected an object")
            obj = dict(obj)
            override = bool(obj.pop("override", False))
            if name in RESERVED_NAMES[section] and not override:
                raise ConfigError(
                    f"{section}[{name!r}] is a reserved built-in name; "
                    f'set "override": true to replace it'
                )
            try:
                parsed = parser(name, obj)
            except ValueError as exc:
                raise ConfigError(f"{section}[{name!r}]: {exc}") from exc
            getattr(lib, section)[name] = parsed

    stack = doc.get("stack")
    if stack is not None and not isinstance(stack, dict):
        raise ConfigError("stack: expected an object of component names")
    lib.stack_spec = stack
    baseline = doc.get("baseline")
    if baseline is not None and not isinstance(baseline, dict):
        raise ConfigError("baseline: expected an object")
    lib.baseline_spec = baseline
    return lib


def _read_source(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    raise ConfigError(f"unsupported configuration source: {type(source).__name__}")


def dump_tech_library(lib: TechLibrary) -> str:
    """Serialize the user-declared entries back to JSON (SI numbers).

    Reloading the result yields values identical to the originals: floats
    are emitted with full round-trip precision.
    """
    doc: dict = {}
    for section in _SECTIONS:
        table = getattr(lib, section)
        if not table:
            continue
        out = {}
        for name in sorted(table):
            entry = table[name]
            obj = {}
            for f in fields(entry):
                if f.name == "name":
                    continue
                obj[f.name] = getattr(entry, f.name)
            if name in RESERVED_NAMES[section]:
                obj["override"] = True
            out[name] = obj
        doc[section] = out
    if lib.stack_spec is not None:
        doc["stack"] = lib.stack_spec
    if lib.baseline_spec is not None:
        doc["baseline"] = lib.baseline_spec
    return json.dumps(doc, indent=2, sort_keys=True)


def layer_from_json(doc: dict) -> LayerSpec:
    """Build a LayerSpec from a JSON object of counts."""
    if not isinstance(doc, dict):
        raise ConfigError("layer document must be a JSON object")
    required = ("k", "s", "c_o", "h_i", "w_i")
    missing = [key for key in required if key not in doc]
    if missing:
        raise ConfigError(f"layer definition is missing: {', '.join(missing)}")
    kwargs = {key: parse_count(doc[key], f"layer.{key}") for key in required}
    for key in ("p", "binning", "pool_stride"):
        if key in doc:
            kwargs[key] = parse_count(doc[key], f"layer.{key}")
    try:
        return LayerSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"layer: {exc}") from exc
