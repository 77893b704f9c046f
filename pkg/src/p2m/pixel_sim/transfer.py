"""Pluggable transfer functions for the analog pixel readout path.

The analog chain distorts the ideal weighted sum; a fitted transfer
function stands in for that distortion at the functional level. Supported
shapes: identity, cubic polynomial, and a*tanh(b*x) saturation. Fits are
least-squares: normal equations for the polynomial, a coarse log-grid scan
with local refinement for the tanh parameters.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ..errors import FitError

_MONOTONE_SAMPLES = 1001  # dense check at 1e-3 of the domain span


class TransferKind(str, enum.Enum):
    IDENTITY = "identity"
    POLYNOMIAL = "polynomial"
    TANH_SATURATION = "tanh_saturation"


@dataclass(frozen=True)
class TransferFunction:
    """A fitted (or ideal) analog transfer curve, valid over `domain`.

    params: () for identity, (c0, c1, c2, c3) for polynomial,
    (a, b) for tanh saturation. `fit_rms` carries the residual of the fit
    that produced the function; `monotone_warning` is set when the fitted
    curve is not non-decreasing over its domain.
    """

    kind: TransferKind
    params: tuple[float, ...] = ()
    domain: tuple[float, float] = (-math.inf, math.inf)
    fit_rms: float | None = None
    monotone_warning: bool = False

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind is TransferKind.IDENTITY:
            return x
        if self.kind is TransferKind.POLYNOMIAL:
            c0, c1, c2, c3 = self.params
            return c0 + x * (c1 + x * (c2 + x * c3))
        a, b = self.params
        return a * np.tanh(b * x)

    def is_monotone(self) -> bool:
        """Non-decreasing over the declared domain, by dense sampling."""
        lo, hi = self.domain
        if self.kind is TransferKind.IDENTITY:
            return True
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
            return True
        xs = np.linspace(lo, hi, _MONOTONE_SAMPLES)
        ys = self(xs)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(ys))))
        return bool(np.all(np.diff(ys) >= -tol))


def identity(domain: tuple[float, float] = (-math.inf, math.inf)) -> TransferFunction:
    return TransferFunction(TransferKind.IDENTITY, (), domain)


def fit_transfer(samples, kind: TransferKind = TransferKind.POLYNOMIAL) -> TransferFunction:
    """Least-squares fit of a transfer function to (input, output) samples.

    Polynomial fits need at least 4 samples (cubic), tanh at least 2.
    A rank-deficient sample set (too few distinct inputs) raises FitError;
    a non-monotone fit only sets the warning flag.
    """
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise FitError("samples must be a sequence of (input, output) pairs")
    if not np.all(np.isfinite(pts)):
        raise FitError("samples contain non-finite values")
    x, y = pts[:, 0], pts[:, 1]
    kind = TransferKind(kind)

    if kind is TransferKind.POLYNOMIAL:
        params = _fit_polynomial(x, y)
    elif kind is TransferKind.TANH_SATURATION:
        params = _fit_tanh(x, y)
    else:
        raise FitError("only polynomial and tanh_saturation transfer kinds can be fitted")

    domain = (float(np.min(x)), float(np.max(x)))
    fitted = TransferFunction(kind, params, domain)
    rms = float(np.sqrt(np.mean((fitted(x) - y) ** 2)))
    return TransferFunction(kind, params, domain, fit_rms=rms,
                            monotone_warning=not fitted.is_monotone())


def _fit_polynomial(x: np.ndarray, y: np.ndarray) -> tuple[float, ...]:
    if x.size < 4:
        raise FitError(f"polynomial fit needs at least 4 samples (got {x.size})")
    vander = np.vander(x, 4, increasing=True)
    if np.linalg.matrix_rank(vander) < 4:
        raise FitError("degenerate sample set")
    gram = vander.T @ vander
    rhs = vander.T @ y
    try:
        coeffs = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise FitError("degenerate sample set") from exc
    return tuple(float(c) for c in coeffs)


def _fit_tanh(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    if x.size < 2:
        raise FitError(f"tanh fit needs at least 2 samples (got {x.size})")
    x_scale = float(np.max(np.abs(x)))
    if x_scale == 0.0:
        raise FitError("degenerate sample set")

    def amplitude_and_cost(b: float) -> tuple[float, float]:
        t = np.tanh(b * x)
        denom = float(t @ t)
        if denom <= 0.0:
            return 0.0, float(y @ y)
        a = float(t @ y) / denom
        resid = y - a * t
        return a, float(resid @ resid)

    # Coarse scan over slope scales, then golden-section refinement in log-b.
    grid = np.logspace(-3, 3, 121) / x_scale
    costs = [amplitude_and_cost(b)[1] for b in grid]
    best = int(np.argmin(costs))
    lo = math.log(grid[max(0, best - 1)])
    hi = math.log(grid[min(len(grid) - 1, best + 1)])
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    for _ in range(80):
        m1 = hi - phi * (hi - lo)
        m2 = lo + phi * (hi - lo)
        if amplitude_and_cost(math.exp(m1))[1] <= amplitude_and_cost(math.exp(m2))[1]:
            hi = m2
        else:
            lo = m1
    b = math.exp((lo + hi) / 2.0)
    a, _ = amplitude_and_cost(b)
    return (a, b)
