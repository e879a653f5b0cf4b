"""Shared value types: lengths, angles, spectra and Gaussian specs.

Lengths are stored in micrometers and angles in radians. Numeric APIs
elsewhere in the package take plain floats whose unit is spelled out in the
argument name (``wavelength_nm``, ``W_um``); these types are used where a
value crosses a boundary (files, CLI) or where unit mistakes are likely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import DegenerateTilt, EmptySpectrum, InvalidValue, NonMonotonicAxis, UnknownUnit

_LENGTH_EXPONENT = {"nm": -3, "um": 0, "µm": 0, "μm": 0, "mm": 3}


def _exponent(unit: str) -> int:
    try:
        return _LENGTH_EXPONENT[unit]
    except KeyError:
        raise UnknownUnit(f"unknown length unit {unit!r}", unit=unit) from None


def _finite(value: float, name: str = "value") -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidValue(f"{name} must be finite, got {value}", name=name)
    return value


def convert_length(value: float, from_unit: str, to_unit: str) -> float:
    """Convert ``value`` between nm, µm and mm with a single rounding step."""
    value = _finite(value)
    shift = _exponent(from_unit) - _exponent(to_unit)
    if shift >= 0:
        return value * 10**shift
    return value / 10 ** (-shift)


@dataclass(frozen=True, order=True)
class Length:
    """A length held in micrometers."""

    value_um: float

    def __post_init__(self):
        object.__setattr__(self, "value_um", _finite(self.value_um, "length"))

    @classmethod
    def of(cls, value: float, unit: str = "um") -> "Length":
        return cls(convert_length(value, unit, "um"))

    @classmethod
    def from_nm(cls, value: float) -> "Length":
        return cls.of(value, "nm")

    @property
    def um(self) -> float:
        return self.value_um

    @property
    def nm(self) -> float:
        return convert_length(self.value_um, "um", "nm")

    def to(self, unit: str) -> float:
        return convert_length(self.value_um, "um", unit)

    def require_nonnegative(self, name: str = "length") -> "Length":
        if self.value_um < 0:
            raise InvalidValue(f"{name} must be non-negative", name=name, value_um=self.value_um)
        return self


@dataclass(frozen=True, order=True)
class Angle:
    """An angle held in radians."""

    value_rad: float

    def __post_init__(self):
        object.__setattr__(self, "value_rad", _finite(self.value_rad, "angle"))

    @classmethod
    def from_degrees(cls, deg: float) -> "Angle":
        return cls(math.radians(_finite(deg, "angle")))

    @property
    def rad(self) -> float:
        return self.value_rad

    @property
    def deg(self) -> float:
        return math.degrees(self.value_rad)


def validate_tilt(theta: Angle) -> Angle:
    if not 0.0 < theta.rad < math.pi / 2:
        raise DegenerateTilt(f"tilt must lie in (0, 90) deg, got {theta.deg}", theta_deg=theta.deg)
    return theta


def validate_apparent(psi: Angle) -> Angle:
    if not -math.pi / 2 < psi.rad < math.pi / 2:
        raise InvalidValue(f"apparent angle must lie in (-90, 90) deg, got {psi.deg}")
    return psi


@dataclass(frozen=True)
class GaussianSpec:
    mean: float
    std: float

    def __post_init__(self):
        _finite(self.mean, "mean")
        if _finite(self.std, "std") < 0:
            raise InvalidValue("std must be >= 0", std=self.std)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Intensity sampled on a strictly increasing wavelength axis (nm)."""

    wavelength_nm: np.ndarray
    intensity: np.ndarray
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        wl = np.array(self.wavelength_nm, dtype=np.float64)
        y = np.array(self.intensity, dtype=np.float64)
        if wl.ndim != 1 or y.shape != wl.shape:
            raise InvalidValue("wavelength and intensity arrays must be 1-D and equal length")
        if wl.size < 2:
            raise EmptySpectrum("spectrum needs at least 2 samples", n=int(wl.size))
        if not (np.all(np.isfinite(wl)) and np.all(np.isfinite(y))):
            raise InvalidValue("spectrum contains non-finite values")
        if np.any(np.diff(wl) <= 0):
            raise NonMonotonicAxis("wavelength axis must be strictly increasing")
        if np.any(y < 0):
            raise InvalidValue("intensities must be non-negative")
        wl.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "wavelength_nm", wl)
        object.__setattr__(self, "intensity", y)

    def __len__(self) -> int:
        return self.wavelength_nm.size

    def window(self, lo_nm: float, hi_nm: float) -> np.ndarray:
        """Boolean mask of samples inside ``[lo_nm, hi_nm]``."""
        return (self.wavelength_nm >= lo_nm) & (self.wavelength_nm <= hi_nm)
