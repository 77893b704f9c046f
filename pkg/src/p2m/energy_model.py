"""Frontend energy: in-pixel compute, ADC conversions, and IO transfer.

Every convolution output costs one pixel-array operation plus one ADC
conversion; only the (optionally pooled) activations pay IO energy. The
conventional baseline converts and ships every native pixel at its own
readout precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bandwidth_model import output_dims
from .errors import ConfigError
from .techlib import AdcSpec, BaselineConfig, IoTech, LayerSpec, ReadoutMode, TechStack


@dataclass(frozen=True)
class EnergyBreakdown:
    n_read: int
    e_compute: float
    e_io: float
    e_frontend: float
    normalized: float


def conv_ops(layer: LayerSpec) -> int:
    """Convolution operations per frame: every conv output, pre-pooling."""
    geo = output_dims(layer)
    return geo.h_conv * geo.w_conv * layer.c_o


def io_energy(layer: LayerSpec, adc: AdcSpec, io: IoTech) -> float:
    """IO energy per frame for the transmitted (post-pooling) activations."""
    return transmitted_io_energy(output_dims(layer).o_elems, adc.bits, io.energy_per_bit)


def transmitted_io_energy(elems: int, bits: int, energy_per_bit: float) -> float:
    return elems * bits * energy_per_bit


def frontend_energy(
    layer: LayerSpec,
    stack: TechStack,
    baseline: BaselineConfig | None,
    mode: ReadoutMode = ReadoutMode.P2M,
    sign_phase_factor: int = 1,
) -> EnergyBreakdown:
    """Total frontend energy; P2M results are normalized to the baseline.

    `sign_phase_factor` optionally doubles the compute term to mirror the
    latency model's two-phase readout; the default keeps the compute term
    single-phase. Conventional mode reports normalized = 1.
    """
    if baseline is None:
        raise ConfigError("frontend energy requires a baseline config (missing baseline ADC entry)")

    if mode is ReadoutMode.CONVENTIONAL:
        return _conventional(layer, stack, baseline)

    n_read = conv_ops(layer)
    e_compute = n_read * sign_phase_factor * (stack.pixel.e_px + stack.adc.e_adc)
    e_io = io_energy(layer, stack.adc, stack.io)
    e_frontend = e_compute + e_io
    reference = _conventional(layer, stack, baseline).e_frontend
    if reference > 0:
        normalized = e_frontend / reference
    else:
        normalized = 1.0 if e_frontend == 0 else math.inf
    return EnergyBreakdown(
        n_read=n_read,
        e_compute=e_compute,
        e_io=e_io,
        e_frontend=e_frontend,
        normalized=normalized,
    )


def _conventional(layer: LayerSpec, stack: TechStack, baseline: BaselineConfig) -> EnergyBreakdown:
    # Pixel read energy defaults to zero unless a baseline pixel entry is
    # given: the conventional path performs no in-pixel convolutions.
    n_read = layer.h_i * layer.w_i
    e_px = baseline.pixel.e_px if baseline.pixel is not None else 0.0
    e_compute = n_read * (e_px + baseline.adc.e_adc)
    io = baseline.io_for(stack)
    e_io = transmitted_io_energy(n_read, baseline.readout_bits, io.energy_per_bit)
    return EnergyBreakdown(
        n_read=n_read,
        e_compute=e_compute,
        e_io=e_io,
        e_frontend=e_compute + e_io,
        normalized=1.0,
    )
