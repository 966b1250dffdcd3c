"""Exponential decay fits shared by the benchmarking protocols."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit


@dataclass
class DecayFit:
    amplitude: float
    rate: float
    amplitude_err: float
    rate_err: float


def _model(m, a, f):
    return a * np.power(f, m)


def fit_exponential(depths: Sequence[float], values: Sequence[float],
                    sigma: Optional[Sequence[float]] = None) -> DecayFit:
    """Weighted least-squares fit of ``A f**m``.

    ``sigma`` are absolute standard errors; zero entries are floored so that
    noise-free points act as tight constraints instead of singular weights.
    """
    m = np.asarray(depths, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(np.unique(m)) < 2:
        raise ValueError("need at least two distinct depths")
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        floor = max(1e-9, 1e-6 * float(np.max(sigma))) if np.any(sigma > 0) else 1e-9
        sigma = np.maximum(sigma, floor)
    pos = y > 0
    if pos.sum() >= 2 and len(np.unique(m[pos])) >= 2:
        slope, intercept = np.polyfit(m[pos], np.log(y[pos]), 1)
        p0 = (float(np.exp(intercept)), float(np.clip(np.exp(slope), 1e-3, 1.5)))
    else:
        p0 = (float(y[0]) if y[0] != 0 else 1.0, 0.9)
    popt, pcov = curve_fit(_model, m, y, p0=p0, sigma=sigma,
                           absolute_sigma=sigma is not None, maxfev=20000)
    err = np.sqrt(np.clip(np.diag(pcov), 0, None))
    if not np.all(np.isfinite(popt)):
        raise RuntimeError("exponential fit failed")
    return DecayFit(float(popt[0]), float(popt[1]), float(err[0]), float(err[1]))
