"""Closed-form integration-effort and replacement-yield models."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidValue
from .spectral.cavity_map import CavityMap, fill_fraction_of


@dataclass(frozen=True)
class EffortParams:
    """Transfer overhead ``E0``, per-membrane effort ``Eu``, ``Nc`` chiplets per membrane, ``B`` membranes."""

    E0: float
    Eu: float
    Nc: int = 120
    B: int = 1

    def __post_init__(self):
        if self.E0 < 0 or self.Eu < 0:
            raise InvalidValue("E0 and Eu must be non-negative")
        if int(self.Nc) != self.Nc or self.Nc < 1 or int(self.B) != self.B or self.B < 1:
            raise InvalidValue("Nc and B must be positive integers")


@dataclass(frozen=True)
class Effort:
    E: float
    per_chiplet: float


def integration_effort(p: EffortParams) -> Effort:
    E = p.E0 + p.B * p.Eu
    return Effort(E, E / (p.B * p.Nc))


@dataclass(frozen=True)
class ReplacementParams:
    """``N`` sites, per-attempt success probability ``p``, up to ``r`` replacements."""

    N: int
    p: float
    r: int = 0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise InvalidValue("N must be a non-negative integer")
        if not 0.0 <= self.p <= 1.0:
            raise InvalidValue("p must lie in [0, 1]", p=self.p)
        if int(self.r) != self.r or self.r < 0:
            raise InvalidValue("r must be a non-negative integer")


@dataclass(frozen=True)
class Replacement:
    n_good: float
    residual_defect: float


def expected_functional(p: ReplacementParams) -> Replacement:
    defect = (1.0 - p.p) ** (p.r + 1)
    return Replacement(p.N * (1.0 - defect), defect)


def fill_fraction(cmap: CavityMap, chiplet: tuple[int, int]) -> float:
    """Share of a chiplet's nanobeams carrying at least one record."""
    return fill_fraction_of(cmap.records, cmap.grid, chiplet)
