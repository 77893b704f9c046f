"""Frontend latency and maximum frame rate.

A frame takes one read cycle per output row per channel; each cycle pays
exposure, ADC conversion (both doubled for the separate positive/negative
weight phases), and the IO time to ship one activation row. For
non-overlapping strides (s >= k) the otherwise idle column ADCs can run in
parallel, dividing the whole frame time by up to k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bandwidth_model import output_dims
from .errors import ConfigError
from .techlib import AdcSpec, BaselineConfig, IoTech, LayerSpec, ReadoutMode, TechStack

# Exposure and conversion run twice per cycle: once for the positive and
# once for the negative weight bank. IO ships only the final activations,
# so it is not doubled.
SIGN_PHASE_FACTOR = 2


@dataclass(frozen=True)
class LatencyBreakdown:
    n_c: int
    t_exp_total: float
    t_adc_total: float
    t_io_total: float
    t_frontend: float
    frame_rate: float


def read_cycles(layer: LayerSpec) -> int:
    """Sequential read cycles per frame: one per conv-output row per channel."""
    return output_dims(layer).h_conv * layer.c_o


def io_time(layer: LayerSpec, adc: AdcSpec, io: IoTech) -> float:
    """Per-cycle IO delay: one conv-output row at ADC precision over all pads."""
    geo = output_dims(layer)
    return geo.w_conv * adc.bits / (io.require_bandwidth() * io.n_pads)


def frontend_latency(
    layer: LayerSpec,
    stack: TechStack,
    mode: ReadoutMode = ReadoutMode.P2M,
    n_parallel_adc: int = 1,
    baseline: BaselineConfig | None = None,
    sign_phase_factor: int = SIGN_PHASE_FACTOR,
) -> LatencyBreakdown:
    """Total frontend time and frame rate for one frame.

    P2M mode supports `n_parallel_adc` in [1, k] when the stride is
    non-overlapping (s >= k). Conventional mode models row-sequential
    readout of the native array and requires a baseline config for its ADC.
    """
    if mode is ReadoutMode.CONVENTIONAL:
        if n_parallel_adc != 1:
            raise ConfigError("conventional readout has no ADC parallelism; use n_parallel_adc=1")
        if baseline is None:
            raise ConfigError("conventional latency requires a baseline config (missing baseline ADC entry)")
        io = baseline.io_for(stack)
        pixel = baseline.pixel_for(stack)
        t_io_row = layer.w_i * baseline.readout_bits / (io.require_bandwidth() * io.n_pads)
        return _breakdown(
            n_c=layer.h_i,
            t_exp_cycle=pixel.t_exp,
            t_adc_cycle=baseline.adc.t_adc,
            t_io_cycle=t_io_row,
            n_parallel=1,
        )

    if n_parallel_adc < 1:
        raise ConfigError(f"n_parallel_adc must be >= 1 (got {n_parallel_adc})")
    if n_parallel_adc > layer.k:
        raise ConfigError(
            f"n_parallel_adc must not exceed the kernel size (got {n_parallel_adc} > k={layer.k})"
        )
    if n_parallel_adc > 1 and layer.s < layer.k:
        raise ConfigError("ADC parallelism requires non-overlapping stride (s >= k)")

    return _breakdown(
        n_c=read_cycles(layer),
        t_exp_cycle=sign_phase_factor * stack.pixel.t_exp,
        t_adc_cycle=sign_phase_factor * stack.adc.t_adc,
        t_io_cycle=io_time(layer, stack.adc, stack.io),
        n_parallel=n_parallel_adc,
    )


def _breakdown(n_c, t_exp_cycle, t_adc_cycle, t_io_cycle, n_parallel) -> LatencyBreakdown:
    # The total is scaled by n_parallel as a single division so that
    # latency(n) == latency(1)/n holds exactly in floating point.
    base = n_c * (t_exp_cycle + t_adc_cycle + t_io_cycle)
    t_frontend = base / n_parallel
    return LatencyBreakdown(
        n_c=n_c,
        t_exp_total=n_c * t_exp_cycle / n_parallel,
        t_adc_total=n_c * t_adc_cycle / n_parallel,
        t_io_total=n_c * t_io_cycle / n_parallel,
        t_frontend=t_frontend,
        frame_rate=1.0 / t_frontend if t_frontend > 0 else math.inf,
    )
