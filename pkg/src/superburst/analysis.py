"""Peak detection and scaling fits for emission records.

Fits are linear least squares in log space. fit_power_law models
peak = prefactor * N**exponent; fit_share models the approach of a
photon share to unity as 1 - share = prefactor * N**(-exponent), i.e.
share(N) = 1 - A / N**B with A = prefactor and B = exponent. The share
fit is deliberately linearized rather than run through a nonlinear
optimizer; tolerances downstream absorb the difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .records import EmissionRecord


@dataclass(frozen=True)
class FitResult:
    """Log-log linear fit. residual is the RMS residual in log space."""

    exponent: float
    prefactor: float
    residual: float
    n_range: tuple[int, ...]

    def __post_init__(self):
        if self.residual < 0:
            raise ValueError("residual cannot be negative")


def _select_series(record: EmissionRecord, channel: str) -> np.ndarray:
    if channel == "total":
        return record.total_rate
    if channel in record.channel_rates:
        return record.channel_rates[channel]
    if channel.startswith("dir_") and channel[4:] in record.directional:
        return record.directional[channel[4:]]
    raise KeyError(f"record has no channel {channel!r}")


def find_peak(record: EmissionRecord, channel: str = "total"):
    """Peak location, height and burst flag for one rate series.

    The discrete maximum is refined with a parabola through its
    neighbours. A maximum at the first sample means monotone decay:
    burst = False and t_peak = 0.
    """
    t = record.times
    y = _select_series(record, channel)
    if t.size == 0:
        raise ValueError("record is empty")
    i = int(np.argmax(y))
    if i == 0:
        return 0.0, float(y[0]), False
    if i == t.size - 1:
        return float(t[i]), float(y[i]), True
    denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
    if denom >= 0.0:  # flat or noisy top, keep the grid point
        return float(t[i]), float(y[i]), True
    shift = 0.5 * (y[i - 1] - y[i + 1]) / denom
    h = t[i + 1] - t[i]
    t_peak = float(t[i] + shift * h)
    r_peak = float(y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift)
    return t_peak, r_peak, True


def _loglog_fit(x_vals, y_ratios, n_used, y_offset):
    x = np.log(np.asarray(x_vals, dtype=float))
    y = np.log(np.asarray(y_ratios, dtype=float))
    xc = x - x.mean()
    slope = float((xc @ (y - y.mean())) / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean()) + y_offset
    resid = y + y_offset - (slope * x + intercept)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return slope, intercept, rms, tuple(int(v) for v in n_used)


def fit_power_law(pairs, n_min: int = 20) -> FitResult:
    """Least squares of ln(peak) against ln(N) for N >= n_min.

    The slope is computed from peak ratios against the first retained
    point, so rescaling every peak by a common power of two leaves the
    exponent bit-identical and moves only the prefactor.
    """
    kept = [(n, p) for n, p in pairs if n >= n_min]
    if len(kept) < 3:
        raise ValueError(f"need at least 3 points with N >= {n_min}")
    sizes = [n for n, _ in kept]
    peaks = np.array([p for _, p in kept], dtype=float)
    if np.any(peaks <= 0):
        raise ValueError("peaks must be positive for a log fit")
    slope, intercept, rms, used = _loglog_fit(
        sizes, peaks / peaks[0], sizes, float(np.log(peaks[0])))
    return FitResult(slope, float(np.exp(intercept)), rms, used)


def fit_share(pairs, n_min: int = 20) -> FitResult:
    """Fit share(N) = 1 - A / N**B on ln(1 - share) vs ln(N)."""
    kept = [(n, s) for n, s in pairs if n >= n_min]
    if len(kept) < 3:
        raise ValueError(f"need at least 3 points with N >= {n_min}")
    shares = np.array([s for _, s in kept], dtype=float)
    if np.any(shares >= 1.0) or np.any(shares <= 0.0):
        raise ValueError("shares must lie strictly inside (0, 1)")
    sizes = [n for n, _ in kept]
    gaps = 1.0 - shares
    slope, intercept, rms, used = _loglog_fit(
        sizes, gaps / gaps[0], sizes, float(np.log(gaps[0])))
    return FitResult(-slope, float(np.exp(intercept)), rms, used)


def photon_shares(record: EmissionRecord) -> dict[str, float]:
    """Fraction of emitted photons per channel, by trapezoidal counts."""
    integrals = {lab: float(np.trapezoid(r, record.times))
                 for lab, r in record.channel_rates.items()}
    total = sum(integrals.values())
    if total <= 0:
        raise ValueError("record carries no emission")
    return {lab: v / total for lab, v in integrals.items()}
