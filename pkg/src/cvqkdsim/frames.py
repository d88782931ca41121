"""Shared payload containers for the simulation chain.

Two payload types move through the link: ``SymbolFrame`` (protocol-level
complex symbols, in shot-noise units) and ``IQFrame`` (physical-layer sampled
waveforms, either complex baseband or real passband).  Both are immutable
value objects: the sample buffers are marked read-only so frames can be
shared freely between pipeline stages and threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


class Domain(Enum):
    """Waveform domain of an IQFrame."""

    BASEBAND = "baseband"   # complex samples, analytic content
    PASSBAND = "passband"   # real samples out of the balanced detector


class ModulationKind(Enum):
    GAUSSIAN = "gaussian"
    PSK = "psk"
    QAM = "qam"
    PCS_QAM = "pcs-qam"


@dataclass(frozen=True)
class ModulationSpec:
    """Constellation identifier carried with a symbol frame.

    ``order`` applies to the discrete constellations, ``shaping`` is the
    Maxwell-Boltzmann rate of PCS-QAM.
    """

    kind: ModulationKind
    order: Optional[int] = None
    shaping: Optional[float] = None

    def __str__(self) -> str:
        if self.kind is ModulationKind.GAUSSIAN:
            return "gaussian"
        if self.kind is ModulationKind.PCS_QAM:
            return f"pcs-qam{self.order}(nu={self.shaping})"
        return f"{self.kind.value}{self.order}"


GAUSSIAN = ModulationSpec(ModulationKind.GAUSSIAN)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SymbolFrame:
    """Complex symbols in SNU with their modulation metadata.

    ``target_va`` is the modulation variance the frame was scaled to:
    E[|x|^2] = target_va, i.e. va/2 per quadrature.  Recovered frames on
    Bob's side carry ``modulation=None`` and ``target_va=None``.
    """

    symbols: np.ndarray
    modulation: Optional[ModulationSpec] = None
    target_va: Optional[float] = None

    def __post_init__(self) -> None:
        symbols = np.ascontiguousarray(self.symbols, dtype=np.complex128)
        if symbols.ndim != 1 or symbols.size == 0:
            raise ValueError("symbols must be a non-empty 1-d array")
        if not np.all(np.isfinite(symbols.view(np.float64))):
            raise ValueError("symbols must be finite (no NaN/Inf)")
        object.__setattr__(self, "symbols", _readonly(symbols))

    def __len__(self) -> int:
        return self.symbols.size

    @property
    def mean_power(self) -> float:
        """Empirical E[|x|^2] of the frame."""
        return float(np.mean(np.abs(self.symbols) ** 2))


@dataclass(frozen=True)
class IQFrame:
    """Sampled waveform with its rate and provenance tags.

    ``scale`` is the SNU conversion factor that has been applied to the
    samples (1.0 for raw, un-normalized frames).  ``band`` optionally records
    the occupied quantum band (f_lo, f_hi) in Hz so downstream stages can
    reason about in-band operations.  ``meta`` carries free-form provenance
    flags (e.g. image-leakage warnings); it never affects the DSP.
    """

    samples: np.ndarray
    sample_rate: float
    domain: Domain = Domain.BASEBAND
    scale: float = 1.0
    band: Optional[tuple[float, float]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        dtype = np.float64 if self.domain is Domain.PASSBAND else np.complex128
        samples = np.ascontiguousarray(self.samples, dtype=dtype)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-d array")
        object.__setattr__(self, "samples", _readonly(samples))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples: np.ndarray, **overrides) -> "IQFrame":
        """New frame with replaced samples, inheriting rate/tags unless overridden."""
        kwargs = dict(
            sample_rate=self.sample_rate,
            domain=self.domain,
            scale=self.scale,
            band=self.band,
            meta=dict(self.meta),
        )
        kwargs.update(overrides)
        return IQFrame(samples, **kwargs)
