"""Output feature-map geometry and off-chip bandwidth reduction.

The in-pixel first layer transmits only its activation map, while a
conventional sensor ships every pixel at 12-bit Bayer resolution (the 4/3
factor accounts for the RGGB-to-RGB expansion). Bandwidth reduction is the
exact ratio of those two bit volumes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import GeometryError
from .techlib import AdcSpec, LayerSpec

# Conventional readout: 4/3 Bayer-to-RGB factor times 12-bit samples over
# the RGB element count I = 3*h_i*w_i, i.e. exactly 16*I = 48*h_i*w_i bits.
CONVENTIONAL_BITS_PER_PIXEL = 48


@dataclass(frozen=True)
class OutputGeometry:
    """Feature-map dimensions at each pipeline stage.

    h_conv/w_conv are the convolution output (after binning, before
    pooling); h_o/w_o include peripheral pooling. Element counts use the
    pooled map for the output and the native sensor resolution for the
    input.
    """

    h_conv: int
    w_conv: int
    h_o: int
    w_o: int
    c_o: int
    o_elems: int
    i_elems: int
    h_binned: int
    w_binned: int


def output_dims(layer: LayerSpec) -> OutputGeometry:
    """Geometry pipeline: binning, strided convolution, pooling.

    Non-divisible sizes floor at each stage; pooled dimensions never drop
    below 1. Raises GeometryError naming the stage that degenerates.
    """
    h_b = layer.h_i // layer.binning
    w_b = layer.w_i // layer.binning
    if h_b < 1 or w_b < 1:
        raise GeometryError(
            "binning",
            f"binning {layer.binning}x{layer.binning} leaves no pixels from "
            f"{layer.h_i}x{layer.w_i} input",
        )
    h_span = h_b - layer.k + 2 * layer.p
    w_span = w_b - layer.k + 2 * layer.p
    if h_span < 0 or w_span < 0:
        raise GeometryError(
            "conv",
            f"kernel {layer.k} with padding {layer.p} exceeds binned input {h_b}x{w_b}",
        )
    h_conv = h_span // layer.s + 1
    w_conv = w_span // layer.s + 1
    h_o = max(1, h_conv // layer.pool_stride)
    w_o = max(1, w_conv // layer.pool_stride)
    return OutputGeometry(
        h_conv=h_conv,
        w_conv=w_conv,
        h_o=h_o,
        w_o=w_o,
        c_o=layer.c_o,
        o_elems=h_o * w_o * layer.c_o,
        i_elems=3 * layer.h_i * layer.w_i,
        h_binned=h_b,
        w_binned=w_b,
    )


def transmitted_bits(layer: LayerSpec, adc: AdcSpec) -> int:
    """Bits actually sent off-chip per frame: pooled activations at ADC precision."""
    return output_dims(layer).o_elems * adc.bits


def conventional_bits(layer: LayerSpec) -> int:
    """Bits a conventional readout ships per frame at the native resolution."""
    return CONVENTIONAL_BITS_PER_PIXEL * layer.h_i * layer.w_i


def bandwidth_reduction(layer: LayerSpec, adc: AdcSpec) -> float:
    """Ratio of conventional readout bits to in-pixel activation bits.

    Computed as the exact quotient of the two integer bit volumes, which
    equals (I/O)*(4/3)*(12/b_adc).
    """
    return conventional_bits(layer) / transmitted_bits(layer, adc)
