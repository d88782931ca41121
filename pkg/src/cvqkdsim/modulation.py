"""Alice's random symbol generation (protocol step 1, symbol part).

All generators return frames scaled to E[|x|^2] = va.  Discrete
constellations are scaled deterministically by their analytic RMS so the
second moment is exact; the Gaussian generator is scaled by the target
parameter (not empirically renormalized) to keep symbols i.i.d.

A standard seeded pseudo-random generator stands in for the entropy source;
in a deployed system this is where a QRNG would plug in.
"""

from __future__ import annotations

import numpy as np

from .frames import GAUSSIAN, ModulationKind, ModulationSpec, SymbolFrame

EntropySource = np.random.Generator


def entropy_source(seed: int | None = None) -> EntropySource:
    """Seedable entropy stream with deterministic replay."""
    return np.random.default_rng(seed)


def _check(n: int, va: float) -> None:
    if n <= 0:
        raise ValueError(f"number of symbols must be positive, got {n}")
    if va <= 0:
        raise ValueError(f"modulation variance must be positive, got {va}")


def gen_gaussian(n: int, va: float, rng: EntropySource) -> SymbolFrame:
    """i.i.d. circularly-symmetric complex Gaussian symbols, E[|x|^2] = va."""
    _check(n, va)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return SymbolFrame(np.sqrt(va / 2) * x, GAUSSIAN, va)


def gen_psk(n: int, m: int, va: float, rng: EntropySource) -> SymbolFrame:
    """Uniform m-PSK on a ring of radius sqrt(va).

    The ring is rotated by pi/m, which puts QPSK points on the diagonals.
    """
    _check(n, va)
    if m < 4 or m & (m - 1):
        raise ValueError(f"PSK order must be a power of two >= 4, got {m}")
    k = rng.integers(0, m, size=n)
    points = np.sqrt(va) * np.exp(1j * (2 * np.pi * k + np.pi) / m)
    return SymbolFrame(points, ModulationSpec(ModulationKind.PSK, m), va)


def _qam_grid(m: int) -> np.ndarray:
    side = round(np.sqrt(m))
    if side * side != m:
        raise ValueError(f"QAM order must be a perfect square, got {m}")
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    re, im = np.meshgrid(levels, levels)
    return (re + 1j * im).ravel()


def gen_qam(n: int, m: int, va: float, rng: EntropySource) -> SymbolFrame:
    """Uniform square-grid QAM scaled to E[|x|^2] = va."""
    _check(n, va)
    grid = _qam_grid(m)
    grid *= np.sqrt(va / np.mean(np.abs(grid) ** 2))
    points = grid[rng.integers(0, m, size=n)]
    return SymbolFrame(points, ModulationSpec(ModulationKind.QAM, m), va)


def gen_pcs_qam(n: int, m: int, nu: float, va: float, rng: EntropySource) -> SymbolFrame:
    """Probabilistically-shaped QAM, P(x) proportional to exp(-nu |x|^2).

    Probabilities are evaluated on the unscaled odd-integer grid and sampled
    by inverse CDF over the finite alphabet (exact, no rejection loop); the
    alphabet is then rescaled to the target second moment.
    """
    _check(n, va)
    if nu <= 0:
        raise ValueError(f"shaping rate must be positive, got {nu}")
    grid = _qam_grid(m)
    weights = np.exp(-nu * np.abs(grid) ** 2)
    probs = weights / weights.sum()
    grid *= np.sqrt(va / np.sum(probs * np.abs(grid) ** 2))
    points = grid[rng.choice(m, size=n, p=probs)]
    return SymbolFrame(points, ModulationSpec(ModulationKind.PCS_QAM, m, nu), va)


def pcs_probabilities(m: int, nu: float) -> np.ndarray:
    """Maxwell-Boltzmann point probabilities over the unscaled QAM grid."""
    grid = _qam_grid(m)
    weights = np.exp(-nu * np.abs(grid) ** 2)
    return weights / weights.sum()


def scale_to_va(frame: SymbolFrame, measured_power_ratio: float) -> SymbolFrame:
    """Rescale a frame to the variance implied by the monitored output power.

    ``measured_power_ratio`` is the mean photon number per symbol implied by
    the power monitor; the frame is rescaled so its second moment matches
    va = 2 <n> and ``target_va`` is updated accordingly.
    """
    if measured_power_ratio <= 0:
        raise ValueError("measured power ratio must be positive")
    new_va = 2.0 * measured_power_ratio
    gain = np.sqrt(new_va / frame.target_va)
    return SymbolFrame(frame.symbols * gain, frame.modulation, new_va)
