#!/usr/bin/env python3
"""Fit transfer functions to synthetic saturating readout samples.

Generates noisy samples from a tanh curve, fits both supported shapes,
reports parameters and residuals, and writes the tanh fit as a transfer
JSON usable with `p2m simulate --transfer`.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from p2m.pixel_sim import TransferKind, fit_transfer
from p2m.pixel_sim.io import save_transfer


def run(out_path: Path, seed: int, noise: float) -> int:
    rng = np.random.default_rng(seed)
    x = np.linspace(-2.0, 2.0, 400)
    clean = 0.8 * np.tanh(1.2 * x)
    samples = np.stack([x, clean + rng.normal(0.0, noise * 0.8, x.size)], axis=1)

    tanh_fit = fit_transfer(samples, TransferKind.TANH_SATURATION)
    poly_fit = fit_transfer(samples, TransferKind.POLYNOMIAL)

    a, b = tanh_fit.params
    print(f"tanh fit:       a={a:.5f} b={b:.5f} rms={tanh_fit.fit_rms:.2e}")
    print(f"polynomial fit: c={tuple(round(c, 5) for c in poly_fit.params)} "
          f"rms={poly_fit.fit_rms:.2e} monotone_warning={poly_fit.monotone_warning}")

    save_transfer(out_path, tanh_fit)
    print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="transfer_tanh.json")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--noise", type=float, default=0.01, help="relative noise level")
    args = parser.parse_args()
    sys.exit(run(Path(args.out), args.seed, args.noise))
