"""Functional simulator of the in-pixel first convolution layer."""

from .core import (
    REFERENCE_R_MAX,
    REFERENCE_R_MIN,
    AdcModel,
    RramMap,
    WeightBanks,
    bank_activations,
    bin_average,
    emitted_bits,
    forward,
    quantize_weights,
)
from .transfer import TransferFunction, TransferKind, fit_transfer, identity

__all__ = [
    "AdcModel",
    "RramMap",
    "WeightBanks",
    "TransferFunction",
    "TransferKind",
    "REFERENCE_R_MAX",
    "REFERENCE_R_MIN",
    "bank_activations",
    "bin_average",
    "emitted_bits",
    "fit_transfer",
    "forward",
    "identity",
    "quantize_weights",
]
