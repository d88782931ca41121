"""Covariance-based parameter estimation from disclosed symbol pairs
(protocol step 5).

Moments are taken at the complex-symbol level, consistently with the SNU
convention of :mod:`cvqkdsim.snu`:

    <XY>  = mean(Re(conj(x) y))          -> T = 2 <XY>^2 / (eta va^2)
    <Y^2> = mean(|y|^2)                  -> xi = 2 (<Y^2> - 1 - v_el
                                                   - (eta T / 2) va) / (eta T)

With y = sqrt(eta T / 2) x + n and E[|n|^2] = 1 + v_el + (eta T / 2) xi,
both estimators are exact in expectation.  No bias correction is applied to
the squared-covariance estimator (small-sample caveat: T_hat inherits a
positive O(1/N) bias from the squaring).

Disclosed symbols (even frame indices, half the frame by default) are used
here and only here; the key-rate accounting sees just their count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

DISCLOSURE_FRACTION = 0.5
HISTOGRAM_BINS = 20


@dataclass(frozen=True)
class EstimationResult:
    """Estimates from one frame's disclosed subset."""

    va_hat: float
    t_hat: float
    xi_hat: float
    xi_b_hat: float
    v_el: float
    n_disclosed: int

    def __post_init__(self) -> None:
        if self.n_disclosed <= 0:
            raise ValueError("estimation needs at least one disclosed symbol")


def disclose_split(symbols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Uniformly interleaved split: (disclosed even indices, kept odd indices)."""
    return symbols[0::2], symbols[1::2]


def estimate_transmittance(x: np.ndarray, y: np.ndarray, eta: float,
                           va: float) -> float:
    """T_hat = 2 <XY>^2 / (eta va^2) over the disclosed pairs."""
    if len(x) == 0 or len(x) != len(y):
        raise ValueError("need non-empty paired sequences")
    if va <= 0:
        raise ValueError("modulation variance must be positive")
    if not 0 < eta <= 1:
        raise ValueError("efficiency must be in (0, 1]")
    xy = float(np.mean(np.real(np.conj(x) * y)))
    return 2.0 * xy ** 2 / (eta * va ** 2)


def estimate_excess_noise(x: np.ndarray, y: np.ndarray, eta: float,
                          t_hat: float, va: float,
                          v_el: float) -> tuple[float, float]:
    """(xi_hat, xi_b_hat) from Bob's second moment.

    xi_hat keeps its sign on finite samples; clipping negative values would
    bias the long-run average.
    """
    if t_hat <= 0:
        raise ValueError("transmittance estimate must be positive")
    y2 = float(np.mean(np.abs(y) ** 2))
    xi_hat = 2.0 * (y2 - 1.0 - v_el - eta * t_hat / 2.0 * va) / (eta * t_hat)
    return xi_hat, eta * t_hat * xi_hat


def estimate_va(monitor_power_ratio: float, conversion_factor: float) -> float:
    """va_hat = 2 <n> from the monitoring photodiode reading."""
    if monitor_power_ratio <= 0 or conversion_factor <= 0:
        raise ValueError("monitor reading and conversion factor must be positive")
    return 2.0 * monitor_power_ratio * conversion_factor


def estimate_frame(x: np.ndarray, y: np.ndarray, eta: float, va: float,
                   v_el: float) -> EstimationResult:
    """Run both estimators on one frame's disclosed pairs."""
    t_hat = estimate_transmittance(x, y, eta, va)
    xi_hat, xi_b_hat = estimate_excess_noise(x, y, eta, t_hat, va, v_el)
    return EstimationResult(va_hat=va, t_hat=t_hat, xi_hat=xi_hat,
                            xi_b_hat=xi_b_hat, v_el=v_el, n_disclosed=len(x))


@dataclass(frozen=True)
class BatchSummary:
    """Batch statistics shaped like the run reports: time series plus
    20-bin histograms of T and xi_B, and the frame error rate."""

    results: tuple[EstimationResult, ...]
    fer: float
    t_mean: float
    t_var: float
    xi_b_mean: float
    xi_b_var: float
    t_hist: tuple[np.ndarray, np.ndarray]
    xi_b_hist: tuple[np.ndarray, np.ndarray]


def run_estimation(pairs: Sequence[Optional[tuple[np.ndarray, np.ndarray]]],
                   eta: float, va: float, v_el: float,
                   bins: int = HISTOGRAM_BINS) -> BatchSummary:
    """Estimate every frame of a batch; ``None`` entries are failed frames.

    Raises if the batch is empty or every frame failed.
    """
    if not pairs:
        raise ValueError("empty batch")
    results = []
    failed = 0
    for pair in pairs:
        if pair is None:
            failed += 1
            continue
        x, y = pair
        results.append(estimate_frame(x, y, eta, va, v_el))
    if not results:
        raise ValueError("all frames in the batch were rejected")
    t = np.array([r.t_hat for r in results])
    xb = np.array([r.xi_b_hat for r in results])
    return BatchSummary(
        results=tuple(results),
        fer=failed / len(pairs),
        t_mean=float(t.mean()), t_var=float(t.var()),
        xi_b_mean=float(xb.mean()), xi_b_var=float(xb.var()),
        t_hist=np.histogram(t, bins=bins),
        xi_b_hist=np.histogram(xb, bins=bins),
    )
