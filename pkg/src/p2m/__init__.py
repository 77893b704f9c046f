"""Design-space exploration engine and functional first-layer simulator
for in-pixel-compute image sensors."""

__version__ = "0.1.0"

from .errors import ConfigError, FitError, GeometryError, P2MError, ShapeMismatchError
from .techlib import (
    AdcSpec,
    BaselineConfig,
    BondTech,
    IoTech,
    LayerSpec,
    PixelSpec,
    ProcessNode,
    ReadoutMode,
    TechLibrary,
    TechStack,
    dump_tech_library,
    load_tech_library,
)

__all__ = [
    "__version__",
    "AdcSpec",
    "BaselineConfig",
    "BondTech",
    "ConfigError",
    "FitError",
    "GeometryError",
    "IoTech",
    "LayerSpec",
    "P2MError",
    "PixelSpec",
    "ProcessNode",
    "ReadoutMode",
    "ShapeMismatchError",
    "TechLibrary",
    "TechStack",
    "dump_tech_library",
    "load_tech_library",
]
