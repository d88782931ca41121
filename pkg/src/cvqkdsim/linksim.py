"""Quantum channel and physical receiver emulation (protocol steps 2-3).

The chain applies, in order: channel attenuation and excess noise, laser
frequency offset and phase noise, ADC clock skew, then RF-heterodyne
photodetection with efficiency, shot noise and electronic noise.  Ground
truth for every randomized impairment is recorded alongside the output so
closed-loop tests can compare estimates against it; the record is never
visible to the receiver DSP.

Noise levels follow the package SNU convention: shot noise is injected as
real white noise of variance 1/2 per passband sample (per unit of squared
frame scale).  The analytic-signal reconstruction doubles the in-band noise
density, so a shot-only acquisition comes out of the receiver DSP with
complex symbol variance 4 * (1/2) = 2 and, after SNU normalization, the
measurement takes the form y = sqrt(eta T / 2) x + n with unit shot noise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import resample

from .config import DspConfig
from .filters import band_power_fraction
from .frames import Domain, IQFrame

IMAGE_SUPPRESSION_DB = -40.0


@dataclass(frozen=True)
class ChannelParams:
    """Quantum channel ground truth: transmittance and excess noise.

    Either set ``transmittance`` directly or give ``distance_km`` (with
    ``fiber_alpha_db_km``) and let T = 10^(-alpha d / 10).  ``excess_noise``
    is the Alice-side (channel-input referred) xi in SNU.
    """

    transmittance: Optional[float] = None
    excess_noise: float = 0.0
    fiber_alpha_db_km: float = 0.2
    distance_km: Optional[float] = None

    def __post_init__(self) -> None:
        if self.transmittance is None:
            if self.distance_km is None:
                raise ValueError("give either transmittance or distance_km")
            t = 10 ** (-self.fiber_alpha_db_km * self.distance_km / 10)
            object.__setattr__(self, "transmittance", t)
        if not 0 < self.transmittance <= 1:
            raise ValueError(
                f"transmittance must be in (0, 1], got {self.transmittance}")
        if self.excess_noise < 0:
            raise ValueError("excess noise cannot be negative")


@dataclass(frozen=True)
class ReceiverModel:
    """Trusted receiver parameters and local-oscillator impairments.

    ``laser_offset_hz = None`` draws the beat frequency uniformly from
    +-laser_offset_span_hz once per frame; a number fixes it.  The optional
    ``clearance_profile`` is a table of (frequency Hz, clearance dB) points,
    interpolated log-linearly, that shapes the electronic noise spectrum;
    when present it supersedes the flat ``v_el`` during detection.
    """

    efficiency: float = 1.0
    v_el: float = 0.0
    laser_offset_hz: Optional[float] = 0.0
    laser_offset_span_hz: float = 3e6
    linewidth_hz: float = 0.0
    clock_ppm: float = 0.0
    clearance_profile: Optional[tuple[tuple[float, float], ...]] = None
    clip_level: Optional[float] = None
    shot_noise: bool = True   # False only for idealized loopback tests

    def __post_init__(self) -> None:
        if not 0 < self.efficiency <= 1:
            raise ValueError(f"efficiency must be in (0, 1], got {self.efficiency}")
        if self.v_el < 0:
            raise ValueError("v_el cannot be negative")


@dataclass(frozen=True)
class GroundTruth:
    """Exact impairment values used for one simulated frame (record only)."""

    transmittance: float
    excess_noise: float
    efficiency: float
    v_el: float
    laser_offset_hz: float
    linewidth_hz: float
    clock_ppm: float
    meta: dict = field(default_factory=dict)

    @property
    def xi_bob(self) -> float:
        return self.efficiency * self.transmittance * self.excess_noise


def apply_channel(frame: IQFrame, ch: ChannelParams,
                  rng: np.random.Generator) -> IQFrame:
    """Attenuate by sqrt(T) and add the channel excess noise.

    The excess noise is complex white Gaussian confined to the quantum band
    (per-quadrature variance T xi / 2 in frame-scale units), so that the
    matched-filtered symbols pick up exactly T xi of complex noise power
    regardless of timing phase.
    """
    out = np.sqrt(ch.transmittance) * frame.samples
    xi = ch.excess_noise
    if xi > 0:
        if frame.band is None:
            raise ValueError("frame has no band tag; cannot place excess noise")
        n = len(out)
        var = ch.transmittance * xi * frame.scale ** 2
        white = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        white *= np.sqrt(var / 2)
        spectrum = np.fft.fft(white)
        freqs = np.fft.fftfreq(n, d=1.0 / frame.sample_rate)
        spectrum[(freqs < frame.band[0]) | (freqs > frame.band[1])] = 0.0
        out = out + np.fft.ifft(spectrum)
    return frame.with_samples(out)


def apply_laser_impairments(frame: IQFrame, rx: ReceiverModel,
                            rng: np.random.Generator) -> IQFrame:
    """Impose the beat between the two lasers and Wiener phase noise.

    The realized beat frequency is recorded in the output frame metadata.
    """
    offset = rx.laser_offset_hz
    if offset is None:
        offset = float(rng.uniform(-rx.laser_offset_span_hz, rx.laser_offset_span_hz))
    n = len(frame)
    phase = 2 * np.pi * offset * np.arange(n) / frame.sample_rate
    if rx.linewidth_hz > 0:
        # Wiener process: Var[phi(t+tau) - phi(t)] = 2 pi linewidth tau
        step_var = 2 * np.pi * rx.linewidth_hz / frame.sample_rate
        phase = phase + np.cumsum(rng.standard_normal(n)) * np.sqrt(step_var)
    out = frame.with_samples(frame.samples * np.exp(1j * phase))
    out.meta["laser_offset_hz"] = offset
    return out


def apply_clock_skew(frame: IQFrame, ppm: float) -> IQFrame:
    """Covertly resample by 1 + ppm*1e-6 (the sample_rate tag is unchanged)."""
    if abs(ppm) >= 1000:
        raise ValueError(f"clock skew beyond +-1000 ppm is not plausible, got {ppm}")
    if ppm == 0.0:
        return frame
    factor = 1.0 + ppm * 1e-6
    num = round(len(frame) / factor)
    return frame.with_samples(resample(frame.samples, num))


def _shaped_electronic_noise(n: int, sample_rate: float,
                             profile: tuple[tuple[float, float], ...],
                             rng: np.random.Generator) -> np.ndarray:
    """Electronic noise with PSD shot_psd / (clearance(f) - 1), log-f interpolated."""
    freqs_p = np.array([p[0] for p in profile])
    clear_db = np.array([p[1] for p in profile])
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    logf = np.log10(np.maximum(f, freqs_p[0] / 10))
    cl_db = np.interp(logf, np.log10(freqs_p), clear_db)
    cl = 10 ** (cl_db / 10)
    spectrum *= np.sqrt(1.0 / np.maximum(cl - 1.0, 1e-12))
    return np.fft.irfft(spectrum, n)


def detect(frame: IQFrame, rx: ReceiverModel, rng: np.random.Generator,
           adc_rate_hz: float | None = None, shot: bool | None = None) -> IQFrame:
    """RF-heterodyne balanced detection: one real output carrying both quadratures.

    Efficiency acts as a beamsplitter (amplitude sqrt(eta); the vacuum that
    replaces the lost signal is part of the unit shot noise).  The real
    passband signal is the real part of the analytic input, resampled to the
    ADC rate if it differs, plus real shot and electronic noise.  A frame
    whose image band is not suppressed below -40 dB relative to the signal
    band gets a warning flag in its metadata.
    """
    if frame.domain is Domain.PASSBAND:
        raise ValueError("detect() expects a complex baseband (analytic) frame")
    if shot is None:
        shot = rx.shot_noise
    meta = dict(frame.meta)
    if frame.band is not None:
        lo, hi = frame.band
        sig = band_power_fraction(frame.samples, frame.sample_rate, (lo, hi))
        img = band_power_fraction(frame.samples, frame.sample_rate, (-hi, -lo))
        if sig > 0 and img > 0 and 10 * np.log10(img / sig) > IMAGE_SUPPRESSION_DB:
            meta["image_leakage_warning"] = True
            warnings.warn("image band is not suppressed; RF-heterodyne "
                          "reconstruction will be corrupted", stacklevel=2)

    r = np.sqrt(rx.efficiency) * np.real(frame.samples)
    rate = frame.sample_rate
    if adc_rate_hz is not None and adc_rate_hz != rate:
        r = resample(r, round(len(r) * adc_rate_hz / rate))
        rate = adc_rate_hz
    n = len(r)
    noise_std = frame.scale * np.sqrt(0.5)
    if shot:
        r = r + noise_std * rng.standard_normal(n)
    if rx.clearance_profile is not None:
        r = r + noise_std * _shaped_electronic_noise(
            n, rate, rx.clearance_profile, rng)
    elif rx.v_el > 0:
        r = r + noise_std * np.sqrt(rx.v_el) * rng.standard_normal(n)
    if rx.clip_level is not None:
        r = np.clip(r, -rx.clip_level, rx.clip_level)
    return IQFrame(r, sample_rate=rate, domain=Domain.PASSBAND,
                   scale=frame.scale, band=frame.band, meta=meta)


def simulate_link(tx_frame: IQFrame, ch: ChannelParams, rx: ReceiverModel,
                  rng: np.random.Generator,
                  adc_rate_hz: float | None = None) -> tuple[IQFrame, GroundTruth]:
    """Channel -> laser impairments -> clock skew -> detection."""
    out = apply_channel(tx_frame, ch, rng)
    out = apply_laser_impairments(out, rx, rng)
    offset = out.meta["laser_offset_hz"]
    out = apply_clock_skew(out, rx.clock_ppm)
    detected = detect(out, rx, rng, adc_rate_hz=adc_rate_hz)
    truth = GroundTruth(
        transmittance=ch.transmittance,
        excess_noise=ch.excess_noise,
        efficiency=rx.efficiency,
        v_el=rx.v_el,
        laser_offset_hz=offset,
        linewidth_hz=rx.linewidth_hz,
        clock_ppm=rx.clock_ppm,
        meta={"image_leakage": detected.meta.get("image_leakage_warning", False)},
    )
    return detected, truth


def noise_traces(rx: ReceiverModel, cfg: DspConfig, n_samples: int,
                 rng: np.random.Generator) -> tuple[IQFrame, IQFrame]:
    """Fresh shot+electronic and electronic-only acquisitions for calibration."""
    zeros = IQFrame(np.zeros(n_samples, dtype=np.complex128),
                    sample_rate=cfg.adc_rate_hz)
    shot_trace = detect(zeros, rx, rng, shot=True)
    dark_trace = detect(zeros, rx, rng, shot=False)
    return shot_trace, dark_trace
