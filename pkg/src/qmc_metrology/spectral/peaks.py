"""Peak detection by contour prominence and half-prominence width."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Spectrum
from ..errors import EmptySpectrum, InvalidValue


@dataclass(frozen=True)
class PeakConfig:
    min_prominence: float = 5.0
    fwhm_range_nm: tuple[float, float] = (0.01, 5.0)
    max_peaks: int = 8

    def __post_init__(self):
        lo, hi = self.fwhm_range_nm
        if not lo < hi:
            raise InvalidValue("fwhm_range low must be below high", fwhm_range_nm=self.fwhm_range_nm)
        if self.max_peaks < 1:
            raise InvalidValue("max_peaks must be >= 1")
        if self.min_prominence < 0:
            raise InvalidValue("min_prominence must be >= 0")


@dataclass(frozen=True)
class PeakCandidate:
    center_nm: float
    prominence: float
    fwhm_nm: float
    height: float
    index: int = -1


def local_maxima(y: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima; flat tops report their middle sample."""
    n = y.size
    out = []
    i = 1
    while i < n - 1:
        if y[i - 1] < y[i]:
            j = i
            while j + 1 < n and y[j + 1] == y[i]:
                j += 1
            if j + 1 < n and y[j + 1] < y[i]:
                out.append((i + j) // 2)
            i = j + 1
        else:
            i += 1
    return np.asarray(out, dtype=np.int64)


def prominences(y: np.ndarray, peaks: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Contour prominence: height above the higher of the two lowest saddles.

    The search on each side stops at the first strictly higher sample or the
    array boundary. Returns ``(prominence, left_base, right_base)``.
    """
    prom = np.empty(peaks.size)
    lb = np.empty(peaks.size, dtype=np.int64)
    rb = np.empty(peaks.size, dtype=np.int64)
    for k, p in enumerate(peaks):
        h = y[p]
        i = p
        left_min_idx = p
        while i > 0 and y[i - 1] <= h:
            i -= 1
            if y[i] < y[left_min_idx]:
                left_min_idx = i
        j = p
        right_min_idx = p
        while j < y.size - 1 and y[j + 1] <= h:
            j += 1
            if y[j] < y[right_min_idx]:
                right_min_idx = j
        base = max(y[left_min_idx], y[right_min_idx])
        prom[k] = h - base
        lb[k], rb[k] = left_min_idx, right_min_idx
    return prom, lb, rb


def half_prominence_width(
    y: np.ndarray, peak: int, prominence: float, left_base: int, right_base: int
) -> tuple[float, float]:
    """Fractional sample positions where ``y`` crosses ``height - prominence/2``."""
    ref = y[peak] - 0.5 * prominence
    i = peak
    while i > left_base and y[i] > ref:
        i -= 1
    left = float(i)
    if y[i] < ref:
        left += (ref - y[i]) / (y[i + 1] - y[i])
    j = peak
    while j < right_base and y[j] > ref:
        j += 1
    right = float(j)
    if y[j] < ref:
        right -= (ref - y[j]) / (y[j - 1] - y[j])
    return left, right


def _subsample_center(y: np.ndarray, p: int) -> float:
    a, b, c = y[p - 1], y[p], y[p + 1]
    denom = a - 2 * b + c
    if denom >= 0:
        return float(p)
    return p + 0.5 * (a - c) / denom


def find_peaks(spectrum: Spectrum, cfg: PeakConfig = PeakConfig()) -> list[PeakCandidate]:
    """Local maxima passing the prominence and linewidth gates, most prominent first."""
    y = spectrum.intensity
    if y.size < 3:
        raise EmptySpectrum("need at least 3 samples to locate peaks", n=int(y.size))
    wl = spectrum.wavelength_nm
    idx = np.arange(y.size, dtype=np.float64)
    peaks = local_maxima(y)
    if peaks.size == 0:
        return []
    # prominence can never exceed height above the global minimum
    peaks = peaks[y[peaks] - y.min() >= cfg.min_prominence]
    if peaks.size == 0:
        return []
    prom, lb, rb = prominences(y, peaks)
    lo, hi = cfg.fwhm_range_nm
    found = []
    for p, pr, l_base, r_base in zip(peaks, prom, lb, rb):
        if pr < cfg.min_prominence or pr <= 0:
            continue
        left, right = half_prominence_width(y, p, pr, l_base, r_base)
        fwhm = float(np.interp(right, idx, wl) - np.interp(left, idx, wl))
        if not lo <= fwhm <= hi:
            continue
        center = float(np.interp(_subsample_center(y, p), idx, wl))
        found.append(PeakCandidate(center, float(pr), fwhm, float(y[p]), int(p)))
    found.sort(key=lambda c: (-c.prominence, c.index))
    return found[: cfg.max_peaks]
