"""Offline receiver-trace analysis: spectral densities, clearance and
bandwidth extraction, linearity and responsivity fits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.signal import welch

from .frames import IQFrame

# Clearance anchor points of a receiver of the modeled class: dB values at
# 10/100/200/300 MHz plus the 10 dB point at 150 MHz that sets the usable
# bandwidth.  Interpolated monotonically in log-frequency.
DEFAULT_CLEARANCE_POINTS = (
    (10e6, 26.0), (100e6, 14.0), (150e6, 10.0), (200e6, 9.0), (300e6, 6.0),
)


@dataclass(frozen=True)
class PsdCurve:
    """One-sided (real traces) or centered two-sided (complex) density."""

    frequencies: np.ndarray
    density: np.ndarray
    resolution_bandwidth: float

    def __post_init__(self) -> None:
        if np.any(self.density < 0):
            raise ValueError("spectral density cannot be negative")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequency grid must be strictly increasing")

    def integral(self) -> float:
        """Total power by trapezoidal integration over the grid."""
        return float(np.trapezoid(self.density, self.frequencies))


def compute_psd(trace: IQFrame, segment_len: int = 4096,
                overlap: float = 0.5) -> PsdCurve:
    """Averaged modified periodogram (Hann window, 50% overlap by default).

    Density normalization: integrating the curve over frequency returns the
    time-domain variance of the trace.
    """
    samples = trace.samples
    if len(samples) < segment_len:
        raise ValueError(
            f"trace of {len(samples)} samples is shorter than one "
            f"{segment_len}-sample segment")
    onesided = not np.iscomplexobj(samples)
    freqs, density = welch(samples, fs=trace.sample_rate, window="hann",
                           nperseg=segment_len,
                           noverlap=int(segment_len * overlap),
                           detrend=False, return_onesided=onesided,
                           scaling="density")
    if not onesided:
        order = np.argsort(freqs)
        freqs, density = freqs[order], density[order]
    return PsdCurve(frequencies=freqs, density=np.abs(density),
                    resolution_bandwidth=trace.sample_rate / segment_len)


def clearance_curve(illuminated: PsdCurve, dark: PsdCurve) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise clearance 10 log10(illuminated / dark) on the common grid."""
    if illuminated.frequencies.shape != dark.frequencies.shape or \
            not np.allclose(illuminated.frequencies, dark.frequencies):
        raise ValueError("curves must share a frequency grid")
    if np.any(dark.density <= 0):
        raise ValueError("dark density has zeros; clearance undefined")
    return illuminated.frequencies.copy(), \
        10.0 * np.log10(illuminated.density / dark.density)


def bandwidth_at_clearance(frequencies: np.ndarray, clearance_db: np.ndarray,
                           threshold_db: float) -> Optional[float]:
    """Largest frequency at which the clearance still reaches the threshold.

    The crossing is linearly interpolated between grid points; returns None
    when the curve never reaches the threshold.
    """
    above = clearance_db >= threshold_db
    if not above.any():
        return None
    last = int(np.flatnonzero(above)[-1])
    if last == len(frequencies) - 1:
        return float(frequencies[-1])
    f0, f1 = frequencies[last], frequencies[last + 1]
    c0, c1 = clearance_db[last], clearance_db[last + 1]
    return float(f0 + (f1 - f0) * (c0 - threshold_db) / (c0 - c1))


def clearance_profile(frequencies: np.ndarray,
                      points: Sequence[tuple[float, float]] = DEFAULT_CLEARANCE_POINTS
                      ) -> np.ndarray:
    """Clearance (dB) at ``frequencies`` via monotone log-f interpolation
    through the anchor table, clamped to the end values outside it."""
    pts = sorted(points)
    logf = np.log10(np.clip(frequencies, pts[0][0] * 1e-3, None))
    interp = PchipInterpolator([np.log10(p[0]) for p in pts],
                               [p[1] for p in pts], extrapolate=False)
    out = interp(logf)
    out = np.where(logf <= np.log10(pts[0][0]), pts[0][1], out)
    out = np.where(logf >= np.log10(pts[-1][0]), pts[-1][1], out)
    return np.asarray(out, dtype=float)


@dataclass(frozen=True)
class LinearityFit:
    slope: float
    intercept: float
    relative_nonlinearity: float
    saturation_point: Optional[float]


def linearity_fit(powers: Sequence[float], integrated_noise: Sequence[float],
                  residual_threshold: float = 0.02) -> LinearityFit:
    """Least-squares line over the sub-saturation region.

    Starting from the first two points, the fit is extended while the next
    point's relative residual stays within ``residual_threshold`` of the
    fitted span; the first point that departs (strictly) marks saturation.
    Relative nonlinearity is the maximum residual over the fitted span.
    """
    p = np.asarray(powers, dtype=float)
    v = np.asarray(integrated_noise, dtype=float)
    if p.size < 3:
        raise ValueError("need at least 3 points")
    if np.ptp(p) == 0 or np.ptp(v) == 0:
        raise ValueError("degenerate (constant) input")

    k = 2
    saturation = None
    while k < p.size:
        slope, intercept = np.polyfit(p[:k], v[:k], 1)
        predicted = slope * p[k] + intercept
        span = np.ptp(slope * p[:k + 1] + intercept)
        if span > 0 and abs(v[k] - predicted) / span > residual_threshold:
            saturation = float(p[k])
            break
        k += 1
    slope, intercept = np.polyfit(p[:k], v[:k], 1)
    fitted = slope * p[:k] + intercept
    span = np.ptp(fitted)
    rel = float(np.max(np.abs(v[:k] - fitted)) / span) if span > 0 else 0.0
    return LinearityFit(slope=float(slope), intercept=float(intercept),
                        relative_nonlinearity=rel, saturation_point=saturation)


MAX_RESPONSIVITY_A_W = 1.25   # ideal responsivity at 1550 nm


def responsivity_efficiency(currents: Sequence[tuple[float, float]],
                            lo_powers: Sequence[float]) -> float:
    """Detection efficiency from the photocurrent-vs-LO-power slope.

    eta = slope of (I+ + I-) against P_LO, divided by the 1.25 A/W maximal
    responsivity.
    """
    p = np.asarray(lo_powers, dtype=float)
    if p.size < 2:
        raise ValueError("need at least two power points")
    if np.any(np.diff(p) <= 0):
        raise ValueError("LO powers must be strictly increasing")
    total = np.array([ip + im for ip, im in currents], dtype=float)
    slope = np.polyfit(p, total, 1)[0]
    return float(slope / MAX_RESPONSIVITY_A_W)
