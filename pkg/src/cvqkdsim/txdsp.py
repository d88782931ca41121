"""Alice's transmit DSP: upsampling, RRC shaping, single-sideband frequency
displacement, pilot insertion and Zadoff-Chu preamble assembly."""

from __future__ import annotations

import math

import numpy as np

from .config import DspConfig
from .filters import FilterTaps, fir_filter, mix, rrc_taps
from .frames import Domain, IQFrame, SymbolFrame


def upsample_and_shape(frame: SymbolFrame, taps: FilterTaps,
                       sample_rate: float | None = None) -> IQFrame:
    """Zero-stuff to taps.sps samples per symbol and apply the RRC filter.

    The full convolution is kept (length n*sps + span*sps), including the
    filter ring-in and ring-out; symbol k is centered at sample
    span*sps/2 + k*sps.  Truncating the ring-in would transmit the first
    symbols with half their pulse.
    """
    from scipy.signal import fftconvolve

    sps = taps.sps
    up = np.zeros(len(frame) * sps, dtype=np.complex128)
    up[::sps] = frame.symbols
    shaped = fftconvolve(up, taps.coefficients, mode="full")
    rate = sample_rate if sample_rate is not None else float(sps)
    return IQFrame(shaped, sample_rate=rate, domain=Domain.BASEBAND)


def frequency_shift(frame: IQFrame, f: float) -> IQFrame:
    """Translate the spectrum by ``f`` Hz (multiplication by exp(i 2 pi f t))."""
    if abs(f) >= frame.sample_rate / 2:
        raise ValueError(
            f"shift of {f:.3e} Hz violates the Nyquist margin at "
            f"{frame.sample_rate:.3e} S/s")
    shifted = mix(frame.samples, f, frame.sample_rate)
    band = None
    if frame.band is not None:
        band = (frame.band[0] + f, frame.band[1] + f)
    return frame.with_samples(shifted, band=band)


def add_pilots(frame: IQFrame, cfg: DspConfig) -> IQFrame:
    """Add the two pilot tones above the quantum band.

    Each tone is a complex exponential whose power sits
    ``cfg.pilot_to_signal_db`` above the quantum-band power of the frame.
    The tone phase reference is sample 0 of the frame.
    """
    if frame.band is not None:
        lo, hi = frame.band
        for f in cfg.pilot_freqs_hz:
            if lo < f < hi:
                raise ValueError(f"pilot at {f:.3e} Hz falls inside the signal band")
    signal_power = float(np.mean(np.abs(frame.samples) ** 2))
    amp = math.sqrt(signal_power * 10 ** (cfg.pilot_to_signal_db / 10))
    n = np.arange(len(frame))
    out = frame.samples.astype(np.complex128)
    for f in cfg.pilot_freqs_hz:
        out = out + amp * np.exp(2j * np.pi * f * n / frame.sample_rate)
    return frame.with_samples(out)


def zadoff_chu(u: int, length: int, sample_rate: float = 1.0) -> IQFrame:
    """Zadoff-Chu chip sequence x[k] = exp(-i pi u k (k+1) / L).

    Constant amplitude with ideal (zero) circular autocorrelation at nonzero
    lags for odd L coprime with the root u.
    """
    if length % 2 == 0:
        raise ValueError(f"Zadoff-Chu length must be odd, got {length}")
    if math.gcd(u, length) != 1:
        raise ValueError(f"root {u} is not coprime with length {length}")
    k = np.arange(length, dtype=np.int64)
    phase = np.mod(u * k * (k + 1), 2 * length)   # exact integer arithmetic
    chips = np.exp(-1j * np.pi * phase / length)
    return IQFrame(chips, sample_rate=sample_rate, domain=Domain.BASEBAND)


def assemble_frame(payload: IQFrame, preamble: IQFrame,
                   preamble_rms_ratio: float = 1.0) -> IQFrame:
    """Concatenate [preamble | payload], scaling the preamble vs. signal RMS."""
    if preamble.sample_rate != payload.sample_rate:
        raise ValueError(
            f"sample rate mismatch: preamble {preamble.sample_rate:.3e} vs "
            f"payload {payload.sample_rate:.3e}")
    pre = preamble.samples
    if len(pre):
        target_rms = preamble_rms_ratio * np.sqrt(np.mean(np.abs(payload.samples) ** 2))
        current_rms = np.sqrt(np.mean(np.abs(pre) ** 2))
        if current_rms > 0:
            pre = pre * (target_rms / current_rms)
    return payload.with_samples(np.concatenate([pre, payload.samples]))


def make_preamble(cfg: DspConfig) -> IQFrame:
    """Zadoff-Chu preamble displaced to the quantum band center.

    Chips run at the symbol rate and are band-limited-upsampled to the DAC
    rate (FFT interpolation, which preserves the circular correlation
    structure), so the shifted preamble stays inside the quantum band and
    survives the single-sideband constraint of the RF-heterodyne receiver.
    """
    from scipy.signal import resample

    chips = zadoff_chu(cfg.zc_root, cfg.zc_length, sample_rate=cfg.symbol_rate_hz)
    upsampled = resample(chips.samples, cfg.zc_length * cfg.sps)
    frame = IQFrame(upsampled, sample_rate=cfg.dac_rate_hz, domain=Domain.BASEBAND)
    return frequency_shift(frame, cfg.freq_shift_hz)


def build_tx_frame(frame: SymbolFrame, cfg: DspConfig,
                   taps: FilterTaps | None = None,
                   lead_pad: int | None = None) -> IQFrame:
    """Full transmit chain: shape, displace, add pilots, prepend the preamble.

    ``lead_pad`` zero samples are placed before the preamble (and a filter
    tail after the payload) to emulate an acquisition that starts before the
    frame; default is one preamble length.
    """
    if taps is None:
        taps = rrc_taps(cfg.roll_off, cfg.sps, cfg.filter_span_symbols)
    shaped = upsample_and_shape(frame, taps, sample_rate=cfg.dac_rate_hz)
    shaped = frame_with_band(shaped, cfg)
    shifted = frequency_shift(shaped, cfg.freq_shift_hz)
    with_pilots = add_pilots(shifted, cfg)
    assembled = assemble_frame(with_pilots, make_preamble(cfg),
                               cfg.preamble_rms_ratio)
    pad = cfg.zc_length if lead_pad is None else lead_pad
    tail = 4 * cfg.filter_span_symbols * cfg.sps
    samples = np.concatenate([
        np.zeros(pad, dtype=np.complex128),
        assembled.samples,
        np.zeros(tail, dtype=np.complex128),
    ])
    return assembled.with_samples(samples)


def frame_with_band(frame: IQFrame, cfg: DspConfig) -> IQFrame:
    """Tag a baseband frame with its occupied bandwidth."""
    half = cfg.bandwidth_hz / 2
    return frame.with_samples(frame.samples, band=(-half, half))
