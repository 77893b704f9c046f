import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from p2m.techlib import LayerSpec

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def configs_dir() -> Path:
    return REPO_ROOT / "configs"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return REPO_ROOT / "data"


@st.composite
def layer_specs(draw, max_side=96, max_k=7, max_channels=32,
                with_binning=True, with_pooling=True):
    k = draw(st.integers(1, max_k))
    s = draw(st.integers(1, 8))
    c_o = draw(st.integers(1, max_channels))
    p = draw(st.integers(0, 3))
    binning = draw(st.integers(1, 3)) if with_binning else 1
    pool_stride = draw(st.integers(1, 3)) if with_pooling else 1
    # h_i >= k*binning keeps the binned window valid for any padding
    h_i = draw(st.integers(k * binning, max(k * binning, max_side)))
    w_i = draw(st.integers(k * binning, max(k * binning, max_side)))
    return LayerSpec(k=k, s=s, c_o=c_o, h_i=h_i, w_i=w_i, p=p,
                     binning=binning, pool_stride=pool_stride)


def round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def ideal_forward(image, eff_weights, bn_offset, layer, lsb, max_count,
                  pool_kind="max"):
    """Reference first-layer pass: explicit window loops over binning,
    zero-padded strided convolution, per-channel offset, ReLU clamp at the
    count level, then block pooling. Independent of the simulator's path."""
    b = layer.binning
    h_b, w_b = image.shape[0] // b, image.shape[1] // b
    binned = np.empty((h_b, w_b, 3))
    for i in range(h_b):
        for j in range(w_b):
            block = image[i * b : (i + 1) * b, j * b : (j + 1) * b, :]
            binned[i, j] = block.reshape(-1, 3).mean(axis=0)

    p = layer.p
    padded = np.zeros((h_b + 2 * p, w_b + 2 * p, 3))
    padded[p : p + h_b, p : p + w_b] = binned

    k, s, c_o = layer.k, layer.s, layer.c_o
    h_conv = (h_b - k + 2 * p) // s + 1
    w_conv = (w_b - k + 2 * p) // s + 1
    counts = np.empty((h_conv, w_conv, c_o), dtype=np.int64)
    for i in range(h_conv):
        for j in range(w_conv):
            window = padded[i * s : i * s + k, j * s : j * s + k, :]
            for ch in range(c_o):
                acc = float(np.sum(window * eff_weights[ch]))
                count = int(bn_offset[ch]) + round_half_away(acc / lsb)
                counts[i, j, ch] = min(max(count, 0), max_count)

    s_p = layer.pool_stride
    if s_p == 1:
        return counts
    if h_conv < s_p:
        row_blocks = [(0, h_conv)]
    else:
        row_blocks = [(i * s_p, (i + 1) * s_p) for i in range(h_conv // s_p)]
    if w_conv < s_p:
        col_blocks = [(0, w_conv)]
    else:
        col_blocks = [(j * s_p, (j + 1) * s_p) for j in range(w_conv // s_p)]
    pooled = np.empty((len(row_blocks), len(col_blocks), c_o), dtype=np.int64)
    for bi, (r0, r1) in enumerate(row_blocks):
        for bj, (c0, c1) in enumerate(col_blocks):
            tile = counts[r0:r1, c0:c1, :].reshape(-1, c_o)
            if pool_kind == "max":
                pooled[bi, bj] = tile.max(axis=0)
            else:
                pooled[bi, bj] = [round_half_away(v) for v in tile.mean(axis=0)]
    return pooled
