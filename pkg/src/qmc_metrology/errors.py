"""Closed error taxonomy shared by every module.

Each failure mode named by an operation contract is a subclass of
:class:`QmcError` carrying a stable ``code`` string. Subclasses of
:class:`InputError` are validation failures (CLI exit code 2); subclasses of
:class:`AnalysisError` are runtime failures of an analysis (exit code 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class ErrorReport:
    code: str
    message: str
    context: dict[str, Any] = field(default_factory=dict)

    def one_line(self) -> str:
        extra = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
        return f"{self.code}: {self.message}" + (f" ({extra})" if extra else "")


class QmcError(Exception):
    code = "QmcError"
    exit_code = 3

    def __init__(self, message: str = "", **context: Any):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.context = context

    @property
    def report(self) -> ErrorReport:
        return ErrorReport(self.code, self.message, dict(self.context))


class InputError(QmcError):
    code = "InputError"
    exit_code = 2


class AnalysisError(QmcError):
    code = "AnalysisError"
    exit_code = 3


def _define(name: str, base: type[QmcError], doc: str) -> type[QmcError]:
    return type(name, (base,), {"code": name, "__doc__": doc, "__module__": __name__})


# core / io
InvalidValue = _define("InvalidValue", InputError, "Non-finite or out-of-domain scalar.")
UnknownUnit = _define("UnknownUnit", InputError, "Length or angle unit not supported.")
BadMagic = _define("BadMagic", InputError, "Cube file does not start with the expected magic.")
HeaderMismatch = _define("HeaderMismatch", InputError, "Declared sizes disagree with payload.")
NonMonotonicAxis = _define("NonMonotonicAxis", InputError, "Wavelength axis not strictly increasing.")
UnsupportedFormat = _define("UnsupportedFormat", InputError, "Image or table format not supported.")
MissingScale = _define("MissingScale", InputError, "Image pixel scale not provided.")
IoFailure = _define("IoFailure", AnalysisError, "Read or write failed.")

# spectral
EmptySpectrum = _define("EmptySpectrum", InputError, "Spectrum has no usable samples.")
WindowTooSmall = _define("WindowTooSmall", InputError, "Fit window holds fewer than 5 samples.")
NonConvergence = _define("NonConvergence", AnalysisError, "Least-squares fit did not converge.")
TooFewSamples = _define("TooFewSamples", InputError, "Not enough samples for the requested model.")
AllModesUnresolved = _define("AllModesUnresolved", AnalysisError, "Ringdown contains no modes.")
SeedPeakNotFound = _define("SeedPeakNotFound", AnalysisError, "No peak inside the seed window.")
TrackLost = _define("TrackLost", AnalysisError, "Resonance missing for too many frames.")
ZeroOffResonanceSignal = _define(
    "ZeroOffResonanceSignal", AnalysisError, "Off-resonance integral is not positive."
)

# sem
ImageTooSmall = _define("ImageTooSmall", InputError, "Image smaller than 32x32 px.")
LowCoherence = _define("LowCoherence", AnalysisError, "Structure tensor too isotropic.")
EdgeCountMismatch = _define("EdgeCountMismatch", AnalysisError, "Did not find four beam edges.")
TrapezoidViolation = _define("TrapezoidViolation", AnalysisError, "Top width exceeds bottom width.")
RidgeCountMismatch = _define("RidgeCountMismatch", AnalysisError, "Fewer than three ridges.")
NonParallelRidges = _define("NonParallelRidges", AnalysisError, "Ridge lines are not parallel.")
InvalidGeometry = _define("InvalidGeometry", AnalysisError, "Reconstructed thickness not positive.")
DegenerateTilt = _define("DegenerateTilt", InputError, "Tilt angle outside (0, 90) degrees.")
UnstableGeometry = _define("UnstableGeometry", AnalysisError, "Too many invalid MC geometries.")

# surrogate / monte carlo
OutOfValidityRange = _define("OutOfValidityRange", InputError, "Wavelength outside Sellmeier range.")
PoleProximity = _define("PoleProximity", InputError, "Wavelength too close to a Sellmeier pole.")
OutOfValidityBox = _define("OutOfValidityBox", InputError, "Geometry outside surrogate validity box.")
RankDeficient = _define("RankDeficient", AnalysisError, "Design matrix is rank deficient.")
NoSignChange = _define("NoSignChange", AnalysisError, "Residual does not change sign on bracket.")
NonMonotoneOnBracket = _define(
    "NonMonotoneOnBracket", AnalysisError, "Surrogate not monotone in thickness on bracket."
)
TooManyFailures = _define("TooManyFailures", AnalysisError, "More than 20% of inversions failed.")

# spatial / yield / cli
NoPairsInRange = _define("NoPairsInRange", AnalysisError, "No point pairs fall in any lag bin.")
ChipletOutOfRange = _define("ChipletOutOfRange", InputError, "Chiplet index outside the grid.")
UnknownCommand = _define("UnknownCommand", InputError, "CLI subcommand not recognised.")
