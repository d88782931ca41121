"""Link DSP configuration and its validity rules.

Field names carry explicit units; unit mistakes are the dominant failure
mode in shot-noise-unit systems, so the config format makes them loud.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict


class ConfigError(ValueError):
    """A configuration field violates an invariant of the frequency plan."""


@dataclass(frozen=True)
class DspConfig:
    """Frequency plan and frame geometry shared by both ends of the link.

    Defaults follow the reference parameter set of the modeled system:
    100 MBaud, roll-off 0.3 (130 MHz occupied band centered at 125 MHz),
    pilots at 190 and 200 MHz roughly 12 dB above the quantum signal, and a
    10^6-symbol frame preceded by a Zadoff-Chu preamble.
    """

    symbol_rate_hz: float = 100e6
    roll_off: float = 0.3
    freq_shift_hz: float = 125e6
    pilot_freqs_hz: tuple[float, float] = (190e6, 200e6)
    pilot_to_signal_db: float = 12.0
    num_symbols: int = 1_000_000
    dac_rate_hz: float = 500e6
    adc_rate_hz: float = 500e6
    zc_root: int = 5
    zc_length: int = 3989

    # shaping / receiver knobs (config-exposed implementation choices)
    filter_span_symbols: int = 40
    preamble_rms_ratio: float = 1.0
    sync_threshold: float = 0.4
    tone_window_symbols: int = 200
    pilot_search_hz: float = 5e6
    pilot_prominence_db: float = 10.0
    calib_samples: int | None = None   # None -> one frame length

    def __post_init__(self) -> None:
        if self.symbol_rate_hz <= 0:
            raise ConfigError("symbol_rate_hz must be positive")
        if not 0 < self.roll_off <= 1:
            raise ConfigError(f"roll_off must be in (0, 1], got {self.roll_off}")
        if self.num_symbols <= 0:
            raise ConfigError("num_symbols must be positive")
        sps = self.dac_rate_hz / self.symbol_rate_hz
        if abs(sps - round(sps)) > 1e-9 or round(sps) < 2:
            raise ConfigError(
                f"dac_rate_hz must be an integer multiple (>= 2) of symbol_rate_hz, "
                f"got ratio {sps}")
        half_band = self.bandwidth_hz / 2
        if self.freq_shift_hz <= half_band:
            raise ConfigError(
                f"freq_shift_hz must exceed half the occupied bandwidth "
                f"({half_band:.3e} Hz) for single-sideband operation, "
                f"got {self.freq_shift_hz:.3e}")
        f1, f2 = self.pilot_freqs_hz
        if f1 == f2:
            raise ConfigError("pilot_freqs_hz must differ")
        band_top = self.freq_shift_hz + half_band
        for f in (f1, f2):
            if f < band_top - 1e-6:
                raise ConfigError(
                    f"pilot at {f:.3e} Hz sits inside the quantum band "
                    f"(top edge {band_top:.3e} Hz)")
            if f >= self.adc_rate_hz / 2:
                raise ConfigError(
                    f"pilot at {f:.3e} Hz is not below adc_rate_hz/2")
        if self.zc_length % 2 == 0:
            raise ConfigError("zc_length must be odd")
        if math.gcd(self.zc_root, self.zc_length) != 1:
            raise ConfigError("zc_root must be coprime with zc_length")
        if not 0 < self.sync_threshold < 1:
            raise ConfigError("sync_threshold must be in (0, 1)")

    @property
    def bandwidth_hz(self) -> float:
        """Occupied signal bandwidth B = R (1 + roll_off)."""
        return self.symbol_rate_hz * (1 + self.roll_off)

    @property
    def sps(self) -> int:
        """Samples per symbol at the DAC rate."""
        return round(self.dac_rate_hz / self.symbol_rate_hz)

    @property
    def quantum_band_hz(self) -> tuple[float, float]:
        half = self.bandwidth_hz / 2
        return (self.freq_shift_hz - half, self.freq_shift_hz + half)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pilot_freqs_hz"] = list(self.pilot_freqs_hz)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DspConfig":
        d = dict(d)
        if "pilot_freqs_hz" in d:
            d["pilot_freqs_hz"] = tuple(d["pilot_freqs_hz"])
        return cls(**d)
