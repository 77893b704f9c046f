"""Functional simulator of the in-pixel first convolution layer.

Weights live as resistance states split into a positive and a negative
bank; each bank's weighted sum passes through the analog transfer function
and is converted in its own phase by an up/down-counting single-slope ADC.
The counter preset implements the batch-norm offset, clamping at zero
implements ReLU, and the final count is the transmitted activation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GeometryError, ShapeMismatchError
from ..techlib import LayerSpec, _require
from .transfer import TransferFunction

# Reference resistance window for the weight devices (ohms).
REFERENCE_R_MIN = 8.0e6
REFERENCE_R_MAX = 23.4e6


@dataclass(frozen=True)
class RramMap:
    """Linear weight-magnitude-to-conductance map with uniform levels.

    Magnitudes in [0, w_max] map onto conductances [1/r_max, 1/r_min] and
    snap to the nearest of `levels` evenly spaced conductance states. With
    both maps linear, the dequantized magnitude is idx/(levels-1)*w_max.
    """

    levels: int
    w_max: float
    r_min: float = REFERENCE_R_MIN
    r_max: float = REFERENCE_R_MAX

    def __post_init__(self):
        _require(self.r_min > 0, f"r_min must be > 0 (got {self.r_min})")
        _require(self.r_max > self.r_min, f"r_max must exceed r_min (got {self.r_max})")
        _require(self.levels >= 2, f"levels must be >= 2 (got {self.levels})")
        _require(self.w_max > 0, f"w_max must be > 0 (got {self.w_max})")

    @property
    def g_min(self) -> float:
        return 1.0 / self.r_max

    @property
    def g_max(self) -> float:
        return 1.0 / self.r_min

    def conductance_of(self, magnitude):
        """Conductance encoding a weight magnitude (no quantization)."""
        frac = np.asarray(magnitude, dtype=np.float64) / self.w_max
        return self.g_min + frac * (self.g_max - self.g_min)

    def magnitude_of(self, conductance):
        """Inverse map: weight magnitude stored at a conductance."""
        g = np.asarray(conductance, dtype=np.float64)
        return (g - self.g_min) / (self.g_max - self.g_min) * self.w_max

    def quantize_magnitude(self, magnitude):
        """Snap magnitudes to the level grid and return the dequantized values."""
        frac = np.asarray(magnitude, dtype=np.float64) / self.w_max
        idx = np.rint(frac * (self.levels - 1))
        return idx / (self.levels - 1) * self.w_max


@dataclass(frozen=True)
class AdcModel:
    """Single-slope ADC: bit depth and the analog range one ramp spans."""

    bits: int
    full_scale: float

    def __post_init__(self):
        _require(1 <= self.bits <= 16, f"bits must be within [1, 16] (got {self.bits})")
        _require(self.full_scale > 0, f"full_scale must be > 0 (got {self.full_scale})")

    @property
    def lsb(self) -> float:
        return self.full_scale / (1 << self.bits)

    @property
    def max_count(self) -> int:
        return (1 << self.bits) - 1


@dataclass(frozen=True)
class WeightBanks:
    """Quantized non-negative weight magnitudes, split by sign.

    Shapes are (c_o, k, k, 3). The batch-norm scale is already folded into
    the stored magnitudes; it is recorded for provenance only. bn_offset is
    the per-channel counter preset in ADC counts.
    """

    positive: np.ndarray
    negative: np.ndarray
    bn_scale: np.ndarray
    bn_offset: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positive, dtype=np.float64)
        neg = np.asarray(self.negative, dtype=np.float64)
        if pos.ndim != 4 or pos.shape[-1] != 3:
            raise ShapeMismatchError(("c_o", "k", "k", 3), pos.shape, "weight bank")
        if neg.shape != pos.shape:
            raise ShapeMismatchError(pos.shape, neg.shape, "negative bank")
        if pos.shape[1] != pos.shape[2]:
            raise ShapeMismatchError((pos.shape[0], pos.shape[1], pos.shape[1], 3), pos.shape, "weight bank")
        scale = np.asarray(self.bn_scale, dtype=np.float64).reshape(-1)
        offset = np.asarray(self.bn_offset, dtype=np.int64).reshape(-1)
        if scale.shape[0] != pos.shape[0] or offset.shape[0] != pos.shape[0]:
            raise ShapeMismatchError((pos.shape[0],), (scale.shape[0], offset.shape[0]), "bn parameters")
        _require(bool(np.all(pos >= 0)), "positive bank holds a negative magnitude")
        _require(bool(np.all(neg >= 0)), "negative bank holds a negative magnitude")
        _require(bool(np.all((pos == 0) | (neg == 0))), "a tap appears in both weight banks")
        for name, arr in (("positive", pos), ("negative", neg), ("bn_scale", scale), ("bn_offset", offset)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def c_o(self) -> int:
        return self.positive.shape[0]

    @property
    def k(self) -> int:
        return self.positive.shape[1]

    def effective_weights(self) -> np.ndarray:
        """Signed dense weights the banks realize (positive - negative)."""
        return self.positive - self.negative

    @classmethod
    def from_dense(cls, weights, bn_scale=None, bn_offset=None) -> "WeightBanks":
        """Split signed weights into banks without quantization.

        The per-channel scale is folded into the magnitudes, mirroring
        quantize_weights; offsets round to integer counter presets.
        """
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 4 or w.shape[-1] != 3 or w.shape[1] != w.shape[2]:
            raise ShapeMismatchError(("c_o", "k", "k", 3), w.shape, "weights")
        scale, offset = _bn_params(w.shape[0], bn_scale, bn_offset)
        w = w * scale[:, None, None, None]
        return cls(
            positive=np.where(w > 0, w, 0.0),
            negative=np.where(w < 0, -w, 0.0),
            bn_scale=scale,
            bn_offset=offset,
        )


def _bn_params(c_o: int, bn_scale, bn_offset) -> tuple[np.ndarray, np.ndarray]:
    scale = np.ones(c_o) if bn_scale is None else np.asarray(bn_scale, dtype=np.float64).reshape(-1)
    if scale.shape[0] != c_o:
        raise ShapeMismatchError((c_o,), scale.shape, "bn_scale")
    raw_offset = np.zeros(c_o) if bn_offset is None else np.asarray(bn_offset, dtype=np.float64).reshape(-1)
    if raw_offset.shape[0] != c_o:
        raise ShapeMismatchError((c_o,), raw_offset.shape, "bn_offset")
    return scale, _round_half_away(raw_offset).astype(np.int64)


def quantize_weights(real_weights, rram: RramMap, bn_scale=None, bn_offset=None) -> WeightBanks:
    """Split signed weights by sign and snap magnitudes to the device levels.

    The per-channel batch-norm scale is folded in before quantization.
    Magnitudes beyond w_max (after folding) and NaN taps are errors naming
    the offending tap index.
    """
    w = np.asarray(real_weights, dtype=np.float64)
    if w.ndim != 4 or w.shape[-1] != 3 or w.shape[1] != w.shape[2]:
        raise ShapeMismatchError(("c_o", "k", "k", 3), w.shape, "weights")
    scale, offset = _bn_params(w.shape[0], bn_scale, bn_offset)
    w = w * scale[:, None, None, None]

    nan_taps = np.argwhere(np.isnan(w))
    if nan_taps.size:
        raise ValueError(f"NaN weight at tap {tuple(int(i) for i in nan_taps[0])}")
    over = np.argwhere(np.abs(w) > rram.w_max)
    if over.size:
        tap = tuple(int(i) for i in over[0])
        raise ValueError(
            f"weight magnitude {abs(w[tap]):g} at tap {tap} exceeds w_max={rram.w_max:g}"
        )

    magnitudes = rram.quantize_magnitude(np.abs(w))
    return WeightBanks(
        positive=np.where(w > 0, magnitudes, 0.0),
        negative=np.where(w < 0, magnitudes, 0.0),
        bn_scale=scale,
        bn_offset=offset,
    )


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5))


def bin_average(image: np.ndarray, b: int) -> np.ndarray:
    """Average complete b x b pixel blocks per color channel."""
    if b == 1:
        return image
    h = image.shape[0] // b
    w = image.shape[1] // b
    trimmed = image[: h * b, : w * b, :]
    return trimmed.reshape(h, b, w, b, 3).mean(axis=(1, 3))


def _pool(counts: np.ndarray, s_p: int, kind: str) -> np.ndarray:
    """Block pooling over complete s_p x s_p tiles, floored at one output."""
    if s_p == 1:
        return counts
    h, w = counts.shape[0], counts.shape[1]
    h_o = max(1, h // s_p)
    w_o = max(1, w // s_p)
    bh = h if h < s_p else s_p
    bw = w if w < s_p else s_p
    tiles = counts[: h_o * bh, : w_o * bw, :].reshape(h_o, bh, w_o, bw, -1)
    if kind == "max":
        return tiles.max(axis=(1, 3))
    if kind == "average":
        return _round_half_away(tiles.mean(axis=(1, 3))).astype(np.int64)
    raise ValueError(f"unknown pooling kind {kind!r}")


def _windows(image: np.ndarray, layer: LayerSpec) -> np.ndarray:
    """Strided convolution windows of the binned, zero-padded image."""
    binned = bin_average(image, layer.binning)
    if binned.shape[0] < 1 or binned.shape[1] < 1:
        raise GeometryError("binning", f"binning {layer.binning}x{layer.binning} leaves no pixels")
    padded = np.pad(binned, ((layer.p, layer.p), (layer.p, layer.p), (0, 0)))
    if padded.shape[0] < layer.k or padded.shape[1] < layer.k:
        raise GeometryError(
            "conv",
            f"kernel {layer.k} with padding {layer.p} exceeds binned input "
            f"{binned.shape[0]}x{binned.shape[1]}",
        )
    view = np.lib.stride_tricks.sliding_window_view(padded, (layer.k, layer.k), axis=(0, 1))
    return view[:: layer.s, :: layer.s]  # (h_conv, w_conv, 3, k, k)


def bank_activations(
    image: np.ndarray, banks: WeightBanks, layer: LayerSpec, tf: TransferFunction
) -> tuple[np.ndarray, np.ndarray]:
    """Per-bank analog outputs a_pos, a_neg of shape (h_conv, w_conv, c_o).

    Each bank accumulates its weighted sum over the window and passes
    through the transfer function as a whole, matching the two separate
    conversion phases of the readout.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[-1] != 3:
        raise ShapeMismatchError((layer.h_i, layer.w_i, 3), image.shape, "image")
    if image.shape[0] != layer.h_i or image.shape[1] != layer.w_i:
        raise ShapeMismatchError((layer.h_i, layer.w_i, 3), image.shape, "image")
    if float(image.min()) < 0.0 or float(image.max()) > 1.0:
        raise ValueError("image intensities must lie in [0, 1]")
    if banks.c_o != layer.c_o or banks.k != layer.k:
        raise ShapeMismatchError((layer.c_o, layer.k, layer.k, 3), banks.positive.shape, "weight bank")

    windows = _windows(image, layer)
    a_pos = tf(np.einsum("hwcxy,oxyc->hwo", windows, banks.positive, optimize=True))
    a_neg = tf(np.einsum("hwcxy,oxyc->hwo", windows, banks.negative, optimize=True))
    return a_pos, a_neg


def forward(
    image: np.ndarray,
    banks: WeightBanks,
    layer: LayerSpec,
    tf: TransferFunction,
    adc: AdcModel,
    pool_kind: str = "max",
) -> np.ndarray:
    """Full first-layer pass: counts of shape (h_o, w_o, c_o).

    Per output position and channel the up/down counter computes
    bn_offset + round(a_pos/lsb) - round(a_neg/lsb), clamped to
    [0, 2^bits - 1]; the lower clamp is the ReLU. Rounding is
    half-away-from-zero, symmetric across the two phases. Binning happens
    before the convolution, pooling after conversion.
    """
    a_pos, a_neg = bank_activations(image, banks, layer, tf)
    counts = (
        banks.bn_offset[None, None, :]
        + _round_half_away(a_pos / adc.lsb).astype(np.int64)
        - _round_half_away(a_neg / adc.lsb).astype(np.int64)
    )
    counts = np.clip(counts, 0, adc.max_count)
    return _pool(counts, layer.pool_stride, pool_kind)


def emitted_bits(activations: np.ndarray, adc: AdcModel) -> int:
    """Bits the readout emits for an activation map at ADC precision."""
    return int(activations.size) * adc.bits
