"""Root-raised-cosine filter design and low-level array DSP helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve


@dataclass(frozen=True)
class FilterTaps:
    """Real, linear-phase FIR taps for pulse shaping / matched filtering.

    Taps are energy-normalized (sum of squares = 1) so the cascaded TX+RX
    response has unit gain at the symbol sampling instant.
    """

    coefficients: np.ndarray
    span: int
    sps: int
    roll_off: float

    def __post_init__(self) -> None:
        coeff = np.ascontiguousarray(self.coefficients, dtype=np.float64)
        coeff.setflags(write=False)
        object.__setattr__(self, "coefficients", coeff)

    def __len__(self) -> int:
        return self.coefficients.size


def rrc_taps(beta: float, sps: int, span: int = 40) -> FilterTaps:
    """Design root-raised-cosine taps.

    The impulse response in symbol time t,

        h(t) = [sin(pi t (1-b)) + 4 b t cos(pi t (1+b))]
               / [pi t (1 - (4 b t)^2)],

    has removable singularities at t = 0 and t = +-1/(4b) which are filled
    with their analytic limits.  The b -> 0 limit is the normalized sinc.

    Args:
        beta: roll-off factor, 0 < beta <= 1.
        sps: samples per symbol, >= 2.
        span: one-sided extent is span/2 symbols; total length span*sps + 1.
    """
    if not 0 < beta <= 1:
        raise ValueError(f"roll-off must be in (0, 1], got {beta}")
    if sps < 2:
        raise ValueError(f"need at least 2 samples per symbol, got {sps}")
    if span < 8:
        raise ValueError(f"filter span below 8 symbols truncates too hard, got {span}")
    if span % 2:
        raise ValueError("filter span must be even (keeps the group delay "
                         "on the symbol grid)")

    n = span * sps + 1
    t = (np.arange(n) - (n - 1) / 2) / sps

    h = np.empty_like(t)
    at_zero = np.isclose(t, 0.0)
    at_sing = np.isclose(np.abs(t), 1.0 / (4.0 * beta))
    regular = ~(at_zero | at_sing)

    tr = t[regular]
    num = np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    den = np.pi * tr * (1 - (4 * beta * tr) ** 2)
    h[regular] = num / den
    h[at_zero] = 1.0 - beta + 4.0 * beta / np.pi
    h[at_sing] = (beta / np.sqrt(2)) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
        + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
    )

    h /= np.sqrt(np.sum(h * h))
    return FilterTaps(h, span=span, sps=sps, roll_off=beta)


def fir_filter(samples: np.ndarray, taps: FilterTaps | np.ndarray) -> np.ndarray:
    """Center-aligned FIR filtering (same-length output)."""
    coeff = taps.coefficients if isinstance(taps, FilterTaps) else taps
    return fftconvolve(samples, coeff, mode="same")


def mix(samples: np.ndarray, freq: float, sample_rate: float,
        start_index: int = 0) -> np.ndarray:
    """Multiply by a complex exponential at ``freq`` Hz.

    ``start_index`` anchors the phase of the exponential so that slices of a
    longer capture can be mixed consistently with the full-length version.
    """
    n = np.arange(start_index, start_index + len(samples))
    return samples * np.exp(2j * np.pi * freq * n / sample_rate)


def fractional_delay(samples: np.ndarray, delay: float) -> np.ndarray:
    """Band-limited delay by a (fractional) number of samples via FFT phase ramp."""
    if delay == 0.0:
        return samples
    n = len(samples)
    freqs = np.fft.fftfreq(n)
    spectrum = np.fft.fft(samples) * np.exp(-2j * np.pi * freqs * delay)
    return np.fft.ifft(spectrum)


def band_power_fraction(samples: np.ndarray, sample_rate: float,
                        band: tuple[float, float]) -> float:
    """Fraction of total power inside [band[0], band[1]] Hz (signed freqs)."""
    spectrum = np.abs(np.fft.fft(samples)) ** 2
    freqs = np.fft.fftfreq(len(samples), d=1.0 / sample_rate)
    total = float(np.sum(spectrum))
    if total == 0.0:
        return 0.0
    inside = (freqs >= band[0]) & (freqs <= band[1])
    return float(np.sum(spectrum[inside])) / total
