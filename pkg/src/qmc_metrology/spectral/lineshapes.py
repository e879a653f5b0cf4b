"""Lorentzian and Fano lineshape models and their least-squares fits.

Lorentzian::

    I = A (G/2)^2 / ((x - x0)^2 + (G/2)^2) + B

Fano::

    I = A (q G/2 + (x - x0))^2 / ((G/2)^2 + (x - x0)^2) + B

The Fano fit is carried out in the regular parametrisation
``I = (c1 G/2 + c2 d)^2 / ((G/2)^2 + d^2) + B`` with ``A = c2^2`` and
``q = c1 / c2``, which stays well conditioned at both ``q -> 0`` and
``q -> inf``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._lsq import levenberg_marquardt
from ..core import Spectrum
from ..errors import InvalidValue, WindowTooSmall
from .peaks import PeakCandidate


def lorentzian(x, center, fwhm, amplitude, offset):
    h = 0.5 * fwhm
    d = np.asarray(x, dtype=np.float64) - center
    return amplitude * h * h / (d * d + h * h) + offset


def fano(x, center, fwhm, q, amplitude, offset):
    h = 0.5 * fwhm
    d = np.asarray(x, dtype=np.float64) - center
    return amplitude * (q * h + d) ** 2 / (h * h + d * d) + offset


@dataclass(frozen=True)
class LorentzianFit:
    center_nm: float
    fwhm_nm: float
    amplitude: float
    offset: float
    residual_rms: float
    converged: bool = True
    n_iter: int = 0
    message: str = ""

    @property
    def Q(self) -> float:
        return self.center_nm / self.fwhm_nm

    def model(self, x):
        return lorentzian(x, self.center_nm, self.fwhm_nm, self.amplitude, self.offset)


@dataclass(frozen=True)
class FanoFit:
    center_nm: float
    fwhm_nm: float
    q: float
    amplitude: float
    offset: float
    residual_rms: float
    converged: bool = True
    n_iter: int = 0
    message: str = ""

    @property
    def Q(self) -> float:
        return self.center_nm / self.fwhm_nm

    def model(self, x):
        return fano(x, self.center_nm, self.fwhm_nm, self.q, self.amplitude, self.offset)


def _window(spectrum: Spectrum, window: tuple[float, float], init: PeakCandidate):
    lo, hi = window
    if not lo < hi:
        raise InvalidValue("window low must be below high", window=window)
    mask = spectrum.window(lo, hi)
    if mask.sum() < 5:
        raise WindowTooSmall("fit window holds fewer than 5 samples", n=int(mask.sum()))
    if not lo <= init.center_nm <= hi:
        raise InvalidValue("initial center lies outside the fit window", center=init.center_nm)
    return spectrum.wavelength_nm[mask], spectrum.intensity[mask]


def _lorentz_jac(x, p):
    c, g, a, _ = p
    h = 0.5 * g
    d = x - c
    D = d * d + h * h
    J = np.empty((x.size, 4))
    J[:, 0] = a * h * h * 2 * d / D**2
    J[:, 1] = a * h * d * d / D**2
    J[:, 2] = h * h / D
    J[:, 3] = 1.0
    return J


def fit_lorentzian(
    spectrum: Spectrum, window: tuple[float, float], init: PeakCandidate, max_iter: int = 200
) -> LorentzianFit:
    """Fit a Lorentzian inside ``window`` starting from a peak candidate.

    A fit that fails to converge, or whose amplitude collapses so that the
    linewidth is unidentifiable, is returned with ``converged=False``.
    """
    x, y = _window(spectrum, window, init)
    b0 = float(y.min())
    a0 = max(float(init.height) - b0, 1e-12 * max(abs(b0), 1.0))
    g0 = init.fwhm_nm if init.fwhm_nm > 0 else float(x[-1] - x[0]) / 4
    p0 = np.array([init.center_nm, g0, a0, b0])
    span = float(x[-1] - x[0])
    yscale = max(float(np.ptp(y)), abs(b0), 1e-300)

    res = levenberg_marquardt(
        lambda p: lorentzian(x, *p) - y,
        lambda p: _lorentz_jac(x, p),
        p0,
        scale=np.array([span, span * 1e-3, yscale, yscale]),
        max_iter=max_iter,
    )
    c, g, a, b = res.params
    g = abs(g)
    rms = float(np.sqrt(np.mean((lorentzian(x, c, g, a, b) - y) ** 2)))
    converged, message = res.converged, res.message
    if a <= 1e-9 * max(abs(b), float(np.ptp(y)), 1e-300):
        converged, message = False, "amplitude not positive; linewidth unidentifiable"
    elif not (x[0] <= c <= x[-1]) or g == 0.0 or g > 10 * span:
        converged, message = False, "fit left the window"
    return LorentzianFit(float(c), float(g), float(a), float(b), rms, converged, res.n_iter, message)


def _fano_model(x, p):
    c, g, c1, c2, b = p
    h = 0.5 * g
    d = x - c
    return (c1 * h + c2 * d) ** 2 / (h * h + d * d) + b


def _fano_jac(x, p):
    c, g, c1, c2, _ = p
    h = 0.5 * g
    d = x - c
    N = c1 * h + c2 * d
    D = h * h + d * d
    J = np.empty((x.size, 5))
    J[:, 0] = (-2 * N * c2 * D + 2 * N * N * d) / D**2
    J[:, 1] = (N * c1 * D - N * N * h) / D**2
    J[:, 2] = 2 * N * h / D
    J[:, 3] = 2 * N * d / D
    J[:, 4] = 1.0
    return J


def _fano_start(x, y, c, g, q):
    """Linear least squares for scale and offset at fixed centre, width and q."""
    h = 0.5 * g
    d = x - c
    if np.isinf(q):
        shape = h * h / (h * h + d * d)
    else:
        shape = (q * h + d) ** 2 / (h * h + d * d)
    M = np.column_stack([shape, np.ones_like(x)])
    (s, b), *_ = np.linalg.lstsq(M, y, rcond=None)
    s = max(float(s), 1e-12)
    if np.isinf(q):
        return np.array([c, g, np.sqrt(s), 0.0, b])
    return np.array([c, g, q * np.sqrt(s), np.sqrt(s), b])


def fit_fano(
    spectrum: Spectrum, window: tuple[float, float], init: PeakCandidate, max_iter: int = 200
) -> FanoFit:
    """Fit a Fano lineshape; several asymmetry starts are tried, best cost wins."""
    x, y = _window(spectrum, window, init)
    g0 = init.fwhm_nm if init.fwhm_nm > 0 else float(x[-1] - x[0]) / 4
    span = float(x[-1] - x[0])
    yscale = max(float(np.ptp(y)), float(np.abs(y).max()), 1e-300)
    amp_scale = np.sqrt(yscale)
    best = None
    for q0 in (np.inf, 2.0, -2.0, 0.5, -0.5, 0.0):
        p0 = _fano_start(x, y, init.center_nm, g0, q0)
        res = levenberg_marquardt(
            lambda p: _fano_model(x, p) - y,
            lambda p: _fano_jac(x, p),
            p0,
            scale=np.array([span, span * 1e-3, amp_scale, amp_scale, yscale]),
            max_iter=max_iter,
        )
        if best is None or res.cost < best.cost:
            best = res
    c, g, c1, c2, b = best.params
    g = abs(g)
    if c2 < 0:
        c1, c2 = -c1, -c2
    amplitude = float(c2 * c2)
    q = float(c1 / c2) if c2 != 0 else float(np.copysign(np.finfo(float).max, c1))
    rms = float(np.sqrt(np.mean((_fano_model(x, (c, g, c1, c2, b)) - y) ** 2)))
    converged, message = best.converged, best.message
    if c1 == 0 and c2 == 0:
        converged, message = False, "amplitude collapsed"
    return FanoFit(float(c), float(g), q, amplitude, float(b), rms, converged, best.n_iter, message)
