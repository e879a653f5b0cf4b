"""Resonance tracking across tuning frames and emitter enhancement ratios."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from ..core import Spectrum
from ..errors import (
    InvalidValue,
    SeedPeakNotFound,
    TooFewSamples,
    TrackLost,
    ZeroOffResonanceSignal,
)
from .lineshapes import fit_lorentzian
from .peaks import PeakConfig, find_peaks

SEARCH_RADIUS_NM = 1.0


@dataclass(frozen=True)
class TrackConfig:
    peaks: PeakConfig = field(default_factory=PeakConfig)
    search_radius_nm: float = SEARCH_RADIUS_NM
    max_gap: int = 5


@dataclass(frozen=True)
class TuningTrajectory:
    frames: np.ndarray
    center_nm: list[float | None]
    q: list[float | None]

    @property
    def present(self) -> list[int]:
        return [i for i, c in enumerate(self.center_nm) if c is not None]

    @property
    def total_shift_nm(self) -> float:
        idx = self.present
        return self.center_nm[idx[-1]] - self.center_nm[idx[0]]

    @property
    def direction(self) -> int:
        return int(np.sign(self.total_shift_nm))


def _fit_nearest(frame: Spectrum, target: float, cfg: TrackConfig, window=None):
    dl = float(np.median(np.diff(frame.wavelength_nm)))
    cands = find_peaks(frame, cfg.peaks)
    if window is not None:
        cands = [c for c in cands if window[0] <= c.center_nm <= window[1]]
    else:
        cands = [c for c in cands if abs(c.center_nm - target) <= cfg.search_radius_nm]
    if not cands:
        return None
    cand = min(cands, key=lambda c: (abs(c.center_nm - target), -c.prominence))
    half = max(4.0 * cand.fwhm_nm, 4.0 * dl)
    try:
        fit = fit_lorentzian(frame, (cand.center_nm - half, cand.center_nm + half), cand)
    except InvalidValue:
        return None
    if not fit.converged:
        return None
    if window is None and abs(fit.center_nm - target) > cfg.search_radius_nm:
        return None
    return fit


def track_resonance_shift(
    frames: Sequence[Spectrum], seed_window: tuple[float, float], cfg: TrackConfig = TrackConfig()
) -> TuningTrajectory:
    """Follow one resonance through ordered frames.

    Frame 0 seeds the track with the most prominent peak inside
    ``seed_window``; each later frame takes the peak nearest the last found
    centre within ``search_radius_nm``. Frames without a match are absent.
    """
    if len(frames) < 2:
        raise TooFewSamples("tracking needs at least two frames", n=len(frames))
    lo, hi = seed_window
    first = _fit_nearest(frames[0], 0.5 * (lo + hi), cfg, window=(lo, hi))
    if first is None:
        raise SeedPeakNotFound("no peak in the seed window of frame 0", window=seed_window)
    centers: list[float | None] = [first.center_nm]
    qs: list[float | None] = [first.Q]
    last = first.center_nm
    gap = 0
    for k, frame in enumerate(frames[1:], start=1):
        fit = _fit_nearest(frame, last, cfg)
        if fit is None:
            centers.append(None)
            qs.append(None)
            gap += 1
            if gap >= cfg.max_gap:
                raise TrackLost(f"resonance absent for {gap} consecutive frames", frame=k)
            continue
        gap = 0
        last = fit.center_nm
        centers.append(fit.center_nm)
        qs.append(fit.Q)
    return TuningTrajectory(np.arange(len(frames)), centers, qs)


def _net_integral(s: Spectrum, lo: float, hi: float) -> float:
    inside = s.window(lo, hi)
    outside = ~inside
    if inside.sum() < 2 or outside.sum() < 1:
        raise InvalidValue("window must hold >= 2 samples and leave samples outside")
    background = float(np.median(s.intensity[outside]))
    return float(trapezoid(s.intensity[inside] - background, s.wavelength_nm[inside]))


def enhancement_factor(on: Spectrum, off: Spectrum, line_nm: float, half_width_nm: float) -> float:
    """Ratio of background-subtracted line integrals, on-resonance over off."""
    lo, hi = line_nm - half_width_nm, line_nm + half_width_nm
    for s in (on, off):
        if s.wavelength_nm[0] > lo or s.wavelength_nm[-1] < hi:
            raise InvalidValue("spectrum does not cover the integration window")
    off_int = _net_integral(off, lo, hi)
    if off_int <= 0:
        raise ZeroOffResonanceSignal("off-resonance line integral is not positive", value=off_int)
    return _net_integral(on, lo, hi) / off_int
