"""Per-pixel weight-die footprint and minimum pixel pitch.

The weight die stacks one transistor per stored weight under each pixel.
Each dimension of the per-pixel footprint is the larger of the transistor
packing requirement and the 3D bond pitch, so the minimum pixel pitch can
be limited either by the weight count or by the bonding technology.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .techlib import BondTech, LayerSpec, ProcessNode


class Limiter(enum.Enum):
    BOND = "bond-limited"
    TRANSISTOR = "transistor-limited"


@dataclass(frozen=True)
class FootprintResult:
    n_t: int
    w_px: float  # meters
    h_px: float  # meters
    limiter_w: Limiter
    limiter_h: Limiter
    min_pitch: float  # meters, max(w_px, h_px)

    @property
    def pitch_limiter(self) -> Limiter:
        """Limiter of the dimension that sets min_pitch.

        On a dimension tie the bond pitch is reported as the binding
        constraint if either dimension is bond-limited.
        """
        if self.w_px > self.h_px:
            return self.limiter_w
        if self.h_px > self.w_px:
            return self.limiter_h
        if Limiter.BOND in (self.limiter_w, self.limiter_h):
            return Limiter.BOND
        return Limiter.TRANSISTOR


def weights_per_pixel(layer: LayerSpec) -> int:
    """Maximum number of weight transistors a pixel must host.

    Strided convolution reuses each pixel in ceil(k/s)^2 window positions,
    once per output channel.
    """
    windows = -(-layer.k // layer.s)  # ceil(k/s)
    return layer.c_o * windows * windows


def weight_footprint(layer: LayerSpec, node: ProcessNode, bond: BondTech) -> FootprintResult:
    """Per-pixel width/height of the weight stack and the active limiter.

    Transistors pack in two columns, so the width term uses ceil(n_t/2)
    poly pitches; the height term adds 3 routing tracks and the bond
    height. Ties between the transistor term and the bond pitch are
    labeled bond-limited.
    """
    n_t = weights_per_pixel(layer)
    w_transistor = ((n_t + 1) // 2) * node.cpp
    h_transistor = (n_t + 3) * node.mp + bond.bond_height

    if bond.bond_pitch >= w_transistor:
        w_px, limiter_w = bond.bond_pitch, Limiter.BOND
    else:
        w_px, limiter_w = w_transistor, Limiter.TRANSISTOR
    if bond.bond_pitch >= h_transistor:
        h_px, limiter_h = bond.bond_pitch, Limiter.BOND
    else:
        h_px, limiter_h = h_transistor, Limiter.TRANSISTOR

    return FootprintResult(
        n_t=n_t,
        w_px=w_px,
        h_px=h_px,
        limiter_w=limiter_w,
        limiter_h=limiter_h,
        min_pitch=max(w_px, h_px),
    )


def pixel_area(layer: LayerSpec, node: ProcessNode, bond: BondTech) -> float:
    """Weight-die area per pixel in m^2 (w_px * h_px)."""
    fp = weight_footprint(layer, node, bond)
    return fp.w_px * fp.h_px


def normalized_area(
    point: tuple[LayerSpec, ProcessNode, BondTech],
    reference: tuple[LayerSpec, ProcessNode, BondTech],
) -> float:
    """Area of `point` relative to `reference` (both (layer, node, bond))."""
    return pixel_area(*point) / pixel_area(*reference)
