"""Resonance extraction from spectra, raster cubes and ringdown records."""

from .cavity_map import (
    CavityMap,
    CavityRecord,
    ChipletGrid,
    build_cavity_map,
    map_from_records,
    records_table,
    summarize_mask,
)
from .lineshapes import FanoFit, LorentzianFit, fano, fit_fano, fit_lorentzian, lorentzian
from .peaks import PeakCandidate, PeakConfig, find_peaks
from .ringdown import RingdownMode, RingdownModes, prony_ringdown_q
from .tracking import TrackConfig, TuningTrajectory, enhancement_factor, track_resonance_shift

__all__ = [
    "CavityMap",
    "CavityRecord",
    "ChipletGrid",
    "FanoFit",
    "LorentzianFit",
    "PeakCandidate",
    "PeakConfig",
    "RingdownMode",
    "RingdownModes",
    "TrackConfig",
    "TuningTrajectory",
    "build_cavity_map",
    "enhancement_factor",
    "fano",
    "find_peaks",
    "fit_fano",
    "fit_lorentzian",
    "lorentzian",
    "map_from_records",
    "prony_ringdown_q",
    "records_table",
    "summarize_mask",
    "track_resonance_shift",
]
