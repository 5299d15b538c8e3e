"""Rate-distortion curves and Bjontegaard deltas."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator


def psnr_db(mse, peak=1.0):
    mse = np.maximum(np.asarray(mse, dtype=float), 1e-30)
    return 10.0 * np.log10(peak**2 / mse)


@dataclass
class RDCurve:
    """Ordered (rate, quality) points; quality is PSNR in dB."""

    rates: np.ndarray
    qualities: np.ndarray
    label: str = ""

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        q = np.asarray(self.qualities, dtype=float)
        order = np.argsort(r)
        r, q = r[order], q[order]
        if np.any(np.diff(r) <= 0):
            raise ValueError("rates must be strictly increasing")
        self.rates = r
        self.qualities = q

    def __len__(self):
        return self.rates.size


def _fit(x, y):
    """Cubic fit y(x); falls back to monotone PCHIP when the cubic wiggles."""
    order = np.argsort(x)
    x, y = np.asarray(x)[order], np.asarray(y)[order]
    coeffs = np.polyfit(x, y, 3)
    deriv = np.polyder(coeffs)
    grid = np.linspace(x[0], x[-1], 257)
    slopes = np.polyval(deriv, grid)
    if slopes.min() < 0 < slopes.max():  # non-monotone cubic
        interp = PchipInterpolator(x, y)
        return interp, interp.antiderivative()
    poly = np.poly1d(coeffs)
    return poly, np.poly1d(np.polyint(coeffs))


def _check_curves(a: RDCurve, b: RDCurve):
    if len(a) < 4 or len(b) < 4:
        raise ValueError("BD metrics need at least 4 points per curve")


def bd_rate(anchor: RDCurve, test: RDCurve) -> float:
    """Average rate difference (%) of ``test`` vs ``anchor`` at equal quality.

    Negative means the test curve needs less rate.
    """
    _check_curves(anchor, test)
    lo = max(anchor.qualities.min(), test.qualities.min())
    hi = min(anchor.qualities.max(), test.qualities.max())
    if hi <= lo:
        raise ValueError("no overlap between quality ranges")
    _, int_a = _fit(anchor.qualities, np.log(anchor.rates))
    _, int_b = _fit(test.qualities, np.log(test.rates))
    avg = ((int_b(hi) - int_b(lo)) - (int_a(hi) - int_a(lo))) / (hi - lo)
    return float((np.exp(avg) - 1.0) * 100.0)


def bd_psnr(anchor: RDCurve, test: RDCurve) -> float:
    """Average quality difference (dB) of ``test`` vs ``anchor`` at equal rate."""
    _check_curves(anchor, test)
    la, lb = np.log(anchor.rates), np.log(test.rates)
    lo = max(la.min(), lb.min())
    hi = min(la.max(), lb.max())
    if hi <= lo:
        raise ValueError("no overlap between rate ranges")
    _, int_a = _fit(la, anchor.qualities)
    _, int_b = _fit(lb, test.qualities)
    return float(((int_b(hi) - int_b(lo)) - (int_a(hi) - int_a(lo))) / (hi - lo))
