"""Shot-noise-unit conventions and calibration arithmetic.

Conventions used throughout the package (hbar = 2):

* vacuum (shot) noise has unit variance, so a symbol of modulation variance
  va carries <n> = va/2 mean photons;
* Alice's symbols satisfy E[|x|^2] = va (va/2 per quadrature);
* Bob's recovered symbols are normalized so that a shot-noise-only
  acquisition, processed by the same DSP, has unit complex variance
  E[|z|^2] = 1.  The RF-heterodyne measurement then obeys
  E[y | x] = sqrt(eta T / 2) x with total noise 1 + v_el + (eta T / 2) xi.

Calibration measures the shot and electronic symbol variances by running
noise-only traces through the same matched-filter-and-decimate chain as the
quantum signal (no synchronization is needed for stationary noise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert

from .config import DspConfig
from .filters import FilterTaps, fir_filter, mix, rrc_taps
from .frames import Domain, IQFrame


class CalibrationError(ValueError):
    """Raised when noise traces cannot yield a valid shot-noise reference."""


def photons_per_symbol(va: float) -> float:
    """Mean photon number of a frame with modulation variance ``va``: va/2."""
    if va < 0:
        raise ValueError(f"modulation variance must be non-negative, got {va}")
    return va / 2.0


@dataclass(frozen=True)
class SnuCalibration:
    """Shot / electronic noise reference measured through the receiver DSP.

    ``shot_variance`` and ``elec_variance`` are complex symbol variances in
    raw units; ``conversion_factor`` rescales raw symbols to SNU.
    """

    shot_variance: float
    elec_variance: float

    def __post_init__(self) -> None:
        if self.shot_variance <= 0:
            raise CalibrationError(
                f"shot variance must be positive, got {self.shot_variance}")
        if self.elec_variance < 0:
            raise CalibrationError("electronic variance cannot be negative")

    @property
    def v_el(self) -> float:
        return self.elec_variance / self.shot_variance

    @property
    def conversion_factor(self) -> float:
        return 1.0 / np.sqrt(self.shot_variance)


def noise_dsp(trace: IQFrame, dsp: DspConfig, taps: FilterTaps | None = None) -> np.ndarray:
    """Process a noise-only trace with the quantum-signal DSP (no sync).

    Downconverts the quantum band to baseband, applies the matched RRC
    filter and decimates at an arbitrary phase; the trace must be long
    enough that dropping the filter edge transients leaves samples.
    """
    if taps is None:
        taps = rrc_taps(dsp.roll_off, dsp.sps, dsp.filter_span_symbols)
    samples = trace.samples
    if trace.domain is Domain.PASSBAND:
        samples = hilbert(samples)
    if len(samples) < 4 * len(taps):
        raise CalibrationError(
            f"trace of {len(samples)} samples is too short for the "
            f"{len(taps)}-tap receiver filter")
    bb = mix(samples, -dsp.freq_shift_hz, trace.sample_rate)
    bb = fir_filter(bb, taps)
    edge = len(taps)
    symbols = bb[edge:-edge:dsp.sps]
    return symbols


def calibrate_noise(shot_trace: IQFrame, dark_trace: IQFrame,
                    dsp: DspConfig) -> SnuCalibration:
    """Build the SNU reference from an illuminated and a dark acquisition.

    The illuminated trace contains shot + electronic noise, the dark trace
    electronic noise only; the shot variance is their difference after both
    pass through the same DSP.
    """
    taps = rrc_taps(dsp.roll_off, dsp.sps, dsp.filter_span_symbols)
    tot = noise_dsp(shot_trace, dsp, taps)
    dark = noise_dsp(dark_trace, dsp, taps)
    var_tot = float(np.mean(np.abs(tot) ** 2))
    var_dark = float(np.mean(np.abs(dark) ** 2))
    if var_tot <= var_dark:
        raise CalibrationError(
            f"illuminated variance ({var_tot:.4g}) does not exceed dark "
            f"variance ({var_dark:.4g}); no shot noise present")
    return SnuCalibration(shot_variance=var_tot - var_dark, elec_variance=var_dark)


def normalize_to_snu(raw: IQFrame, calib: SnuCalibration) -> IQFrame:
    """Rescale a frame so shot noise has unit complex variance.

    Idempotent for a fixed calibration: the applied factor is recorded in
    ``scale`` and only the difference to the target factor is applied.
    """
    factor = calib.conversion_factor
    if raw.scale == factor:
        return raw
    adjust = factor / raw.scale
    return raw.with_samples(raw.samples * adjust, scale=factor)


def normalize_symbols(symbols: np.ndarray, calib: SnuCalibration) -> np.ndarray:
    """SNU-normalize an array of recovered symbols."""
    return symbols * calib.conversion_factor
