"""
Non-uniformity scoring of fault distributions (weighted Fourier magnitude sum).

The distribution is resampled onto 200 equal-width time bins whose heights sum
to 100; a cycle straddling a bin edge is split by overlap. The score is
sum(i * |fft_i|) over the one-sided indices 0..100. A constant distribution
scores 0, sharp isolated peaks score high.
"""

import io
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from distribution_core import FaultDistribution

logger = logging.getLogger(__name__)

BINS = 200
SPECTRUM_LENGTH = BINS // 2 + 1
HEIGHT_TOTAL = 100.0
ZERO_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class NonUniformityScore:
    value: float
    bins: np.ndarray
    spectrum: np.ndarray

    def to_csv(self) -> str:
        """The one-sided spectrum as ``index,magnitude`` rows."""
        frame = pd.DataFrame({'index': np.arange(self.spectrum.shape[0]), 'magnitude': self.spectrum})
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, lineterminator='\n')
        return buffer.getvalue()


def resample(d: FaultDistribution, bins: int = BINS) -> np.ndarray:
    """Fault counts spread over ``bins`` equal-width bins, scaled to sum to 100.

    Cycle ``t`` covers the interval ``[t, t+1)`` and its count is split between
    the (at most two) bins that interval overlaps, in proportion to the overlap.
    Stretching a distribution in time therefore leaves the bins unchanged.
    Spans shorter than ``bins`` give one cycle per bin and trailing empty bins.
    """
    offsets = d.times - d.t_start
    weights = d.counts.astype(float)
    if d.span < bins:
        heights = np.bincount(offsets, weights=weights, minlength=bins)
        return heights * (HEIGHT_TOTAL / heights.sum())
    first = offsets * bins // d.span
    # bin edges sit at multiples of span / bins; everything below is scaled by bins
    inside = np.minimum((first + 1) * d.span - offsets * bins, bins) / bins
    heights = np.bincount(first, weights=weights * inside, minlength=bins)
    # the last cycle always ends on the last edge, so the spill there is zero
    heights += np.bincount(np.minimum(first + 1, bins - 1), weights=weights * (1.0 - inside), minlength=bins)
    return heights * (HEIGHT_TOTAL / heights.sum())


def wfft(d: FaultDistribution, bins: int = BINS, tolerance: float = ZERO_TOLERANCE) -> NonUniformityScore:
    """Weighted sum of one-sided Fourier magnitudes of the normalized distribution."""
    normalized = resample(d, bins)
    spectrum = np.abs(np.fft.fft(normalized))[:bins // 2 + 1]
    # rounding residue of exactly flat bins
    spectrum[spectrum < tolerance] = 0.0
    value = float(np.dot(np.arange(spectrum.shape[0]), spectrum))
    return NonUniformityScore(value=value, bins=normalized, spectrum=spectrum)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation; 0.0 when either side is constant or too short."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"Length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2 or np.std(x) == 0 or np.std(y) == 0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])
