"""File formats for the simulator: images, weight banks, transfer
functions, ADC models, and activation maps.

Images are 8-bit binary PPM (P6) or PNG, normalized to [0, 1] by division
by 255. Weight banks and transfer functions are JSON documents with
explicit shape headers. Activation maps pack to a binary stream with a
16-byte header (magic "P2MA", then little-endian u32 height, width,
channels) followed by MSB-first bit-packed counts at ADC precision.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ShapeMismatchError
from .core import REFERENCE_R_MAX, REFERENCE_R_MIN, AdcModel, RramMap, WeightBanks, quantize_weights
from .transfer import TransferFunction, TransferKind, identity

ACTIVATION_MAGIC = b"P2MA"


# ---------------------------------------------------------------------------
# images

def load_image(path) -> np.ndarray:
    """Load a PPM (P6) or PNG image as float64 (h, w, 3) in [0, 1]."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P6":
        return ppm_to_array(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return png_to_array(path)
    raise ConfigError(f"{path}: not a binary PPM (P6) or PNG file")


def ppm_to_array(data: bytes) -> np.ndarray:
    fields, offset = _ppm_header(data)
    width, height, maxval = fields
    if maxval != 255:
        raise ConfigError(f"PPM maxval {maxval} unsupported; only 8-bit (255) images are accepted")
    n = width * height * 3
    if len(data) - offset < n:
        raise ConfigError("PPM pixel payload is truncated")
    pixels = np.frombuffer(data, dtype=np.uint8, count=n, offset=offset)
    return pixels.reshape(height, width, 3).astype(np.float64) / 255.0


def _ppm_header(data: bytes) -> tuple[tuple[int, int, int], int]:
    # magic, then three whitespace-separated ints; '#' comments allowed.
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise ConfigError(f"PPM header: expected an integer, got {token!r}")
        fields.append(int(token))
    return (fields[0], fields[1], fields[2]), pos + 1  # single whitespace after maxval


def array_to_ppm(image: np.ndarray) -> bytes:
    """Encode a [0, 1] float image as binary 8-bit PPM."""
    img = np.asarray(image)
    quantized = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    return header + quantized.tobytes()


def png_to_array(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as img:
        rgb = img.convert("RGB")
        arr = np.asarray(rgb, dtype=np.uint8)
    return arr.astype(np.float64) / 255.0


# ---------------------------------------------------------------------------
# weight banks and transfer functions

def banks_to_json(banks: WeightBanks) -> dict:
    return {
        "shape": list(banks.positive.shape),
        "positive": banks.positive.tolist(),
        "negative": banks.negative.tolist(),
        "bn_scale": banks.bn_scale.tolist(),
        "bn_offset": banks.bn_offset.tolist(),
    }


def banks_from_json(doc: dict) -> WeightBanks:
    """Build weight banks from a JSON document.

    Two layouts are accepted: pre-split banks ("positive"/"negative"), or
    dense signed "weights" plus an "rram" map to quantize against. Both
    carry an explicit "shape" header that the payload must match.
    """
    if not isinstance(doc, dict):
        raise ConfigError("weight document must be a JSON object")
    if "shape" not in doc:
        raise ConfigError("weight document is missing the 'shape' header")
    shape = tuple(doc["shape"])

    if "positive" in doc or "negative" in doc:
        pos = _shaped(doc, "positive", shape)
        neg = _shaped(doc, "negative", shape)
        return WeightBanks(
            positive=pos,
            negative=neg,
            bn_scale=doc.get("bn_scale", np.ones(shape[0])),
            bn_offset=doc.get("bn_offset", np.zeros(shape[0])),
        )

    if "weights" in doc:
        dense = _shaped(doc, "weights", shape)
        rram_doc = doc.get("rram")
        if not isinstance(rram_doc, dict):
            raise ConfigError("dense weight document needs an 'rram' object to quantize against")
        try:
            rram = RramMap(
                levels=int(rram_doc["levels"]),
                w_max=float(rram_doc["w_max"]),
                r_min=float(rram_doc.get("r_min", REFERENCE_R_MIN)),
                r_max=float(rram_doc.get("r_max", REFERENCE_R_MAX)),
            )
        except KeyError as exc:
            raise ConfigError(f"rram map is missing field {exc.args[0]!r}") from exc
        except ValueError as exc:
            raise ConfigError(f"rram map: {exc}") from exc
        return quantize_weights(dense, rram, doc.get("bn_scale"), doc.get("bn_offset"))

    raise ConfigError("weight document needs either 'positive'/'negative' banks or dense 'weights'")


def _shaped(doc: dict, key: str, shape: tuple) -> np.ndarray:
    arr = np.asarray(doc.get(key, []), dtype=np.float64)
    if arr.shape != shape:
        raise ShapeMismatchError(shape, arr.shape, key)
    return arr


def save_weight_banks(path, banks: WeightBanks) -> None:
    Path(path).write_text(json.dumps(banks_to_json(banks)), encoding="utf-8")


def load_weight_banks(path) -> WeightBanks:
    return banks_from_json(_load_json(path))


def transfer_to_json(tf: TransferFunction) -> dict:
    doc = {"kind": tf.kind.value, "params": list(tf.params), "domain": list(tf.domain)}
    if tf.fit_rms is not None:
        doc["fit_rms"] = tf.fit_rms
    return doc


def transfer_from_json(doc: dict) -> TransferFunction:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("transfer document must be an object with a 'kind' field")
    try:
        kind = TransferKind(doc["kind"])
    except ValueError:
        valid = ", ".join(k.value for k in TransferKind)
        raise ConfigError(f"unknown transfer kind {doc['kind']!r}; valid kinds: {valid}") from None
    if kind is TransferKind.IDENTITY:
        return identity()
    params = tuple(float(v) for v in doc.get("params", ()))
    expected = 4 if kind is TransferKind.POLYNOMIAL else 2
    if len(params) != expected:
        raise ConfigError(f"{kind.value} transfer needs {expected} params (got {len(params)})")
    domain = doc.get("domain")
    if not (isinstance(domain, (list, tuple)) and len(domain) == 2):
        raise ConfigError("transfer document needs a 'domain' [lo, hi] pair")
    tf = TransferFunction(kind, params, (float(domain[0]), float(domain[1])),
                          fit_rms=doc.get("fit_rms"))
    if not tf.is_monotone():
        raise ConfigError("transfer function is not monotone non-decreasing over its domain")
    return tf


def save_transfer(path, tf: TransferFunction) -> None:
    Path(path).write_text(json.dumps(transfer_to_json(tf)), encoding="utf-8")


def load_transfer(path) -> TransferFunction:
    return transfer_from_json(_load_json(path))


def adc_model_from_json(doc: dict) -> AdcModel:
    if not isinstance(doc, dict):
        raise ConfigError("adc document must be a JSON object")
    try:
        return AdcModel(bits=int(doc["bits"]), full_scale=float(doc["full_scale"]))
    except KeyError as exc:
        raise ConfigError(f"adc document is missing field {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise ConfigError(f"adc document: {exc}") from exc


def load_adc_model(path) -> AdcModel:
    return adc_model_from_json(_load_json(path))


def _load_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


# ---------------------------------------------------------------------------
# activation maps

def pack_counts(counts: np.ndarray, bits: int) -> bytes:
    """Bit-pack row-major counts MSB-first at the given width."""
    counts = np.asarray(counts)
    if counts.size and (counts.min() < 0 or counts.max() >= 1 << bits):
        raise ValueError(f"counts exceed the {bits}-bit field")
    flat = np.ascontiguousarray(counts, dtype=">u2").reshape(-1)
    as_bits = np.unpackbits(flat.view(np.uint8)).reshape(-1, 16)
    payload = as_bits[:, 16 - bits :].reshape(-1)
    return np.packbits(payload).tobytes()


def unpack_counts(data: bytes, n: int, bits: int) -> np.ndarray:
    raw = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if raw.size < n * bits:
        raise ConfigError("activation payload is truncated")
    fields = raw[: n * bits].reshape(n, bits)
    weights = (1 << np.arange(bits - 1, -1, -1)).astype(np.int64)
    return fields.astype(np.int64) @ weights


def pack_activations(counts: np.ndarray, adc: AdcModel) -> bytes:
    """Serialize an (h_o, w_o, c_o) count map to the packed binary format."""
    h, w, c = counts.shape
    header = ACTIVATION_MAGIC + struct.pack("<III", h, w, c)
    return header + pack_counts(counts, adc.bits)


def unpack_activations(data: bytes, bits: int) -> np.ndarray:
    """Parse the packed binary format back into an (h_o, w_o, c_o) map."""
    if data[:4] != ACTIVATION_MAGIC:
        raise ConfigError(f"bad activation magic {data[:4]!r}; expected {ACTIVATION_MAGIC!r}")
    h, w, c = struct.unpack("<III", data[4:16])
    counts = unpack_counts(data[16:], h * w * c, bits)
    return counts.reshape(h, w, c)


def write_activations_binary(path, counts: np.ndarray, adc: AdcModel) -> None:
    Path(path).write_bytes(pack_activations(counts, adc))


def read_activations_binary(path, bits: int) -> np.ndarray:
    return unpack_activations(Path(path).read_bytes(), bits)


def activations_to_csv(counts: np.ndarray, manifest_lines: tuple[str, ...] = ()) -> str:
    """Long-format CSV (row, col, channel, count) for inspection."""
    lines = [f"# {line}" for line in manifest_lines]
    lines.append("row,col,channel,count")
    h, w, c = counts.shape
    for i in range(h):
        for j in range(w):
            for ch in range(c):
                lines.append(f"{i},{j},{ch},{int(counts[i, j, ch])}")
    return "\r\n".join(lines) + "\r\n"
