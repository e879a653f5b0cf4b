"""Generators for synthetic spectra, raster cubes and ringdown records.

These are the closed-form references the tests compare against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Spectrum
from .io_formats import HyperspectralCube
from .spectral.cavity_map import ChipletGrid
from .spectral.lineshapes import fano, lorentzian

C_UM_PER_S = 299_792_458.0e6


def wavelength_axis(lo_nm: float, hi_nm: float, n: int) -> np.ndarray:
    return np.linspace(lo_nm, hi_nm, n)


def lorentzian_spectrum(
    wavelength_nm, lines, offset: float = 0.0, noise_std: float = 0.0, rng=None
) -> Spectrum:
    """Sum of Lorentzians given as ``(center_nm, fwhm_nm, amplitude)`` tuples."""
    x = np.asarray(wavelength_nm, dtype=np.float64)
    y = np.full_like(x, offset)
    for c, g, a in lines:
        y += lorentzian(x, c, g, a, 0.0)
    if noise_std > 0:
        y = y + (rng or np.random.default_rng(0)).normal(0.0, noise_std, x.size)
    return Spectrum(x, np.clip(y, 0.0, None))


def fano_spectrum(wavelength_nm, center, fwhm, q, amplitude, offset) -> Spectrum:
    x = np.asarray(wavelength_nm, dtype=np.float64)
    return Spectrum(x, fano(x, center, fwhm, q, amplitude, offset))


def gaussian_line_spectrum(wavelength_nm, center, sigma, area, background) -> Spectrum:
    x = np.asarray(wavelength_nm, dtype=np.float64)
    y = background + area * np.exp(-0.5 * ((x - center) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))
    return Spectrum(x, y)


def damped_ringdown(
    n: int, dt: float, modes, carrier_frequency: float = 0.0, complex_output: bool = True
) -> np.ndarray:
    """Sum of ``(frequency, Q, amplitude, phase)`` modes with field decay ``pi f / Q``.

    With ``complex_output`` the record is the baseband ``exp(-i 2 pi f_c t)``
    times the analytic signal; otherwise the real cosine sum is returned.
    """
    t = np.arange(n) * dt
    out = np.zeros(n, dtype=np.complex128)
    for f, q, a, ph in modes:
        gamma = np.pi * f / q if np.isfinite(q) else 0.0
        if complex_output:
            out += a * np.exp(1j * ph) * np.exp((1j * 2 * np.pi * (f - carrier_frequency) - gamma) * t)
        else:
            out += a * np.cos(2 * np.pi * f * t + ph) * np.exp(-gamma * t)
    return out if complex_output else out.real


@dataclass(frozen=True)
class PlantedCavity:
    x_idx: int
    y_idx: int
    chiplet: tuple[int, int]
    nanobeam: int
    center_nm: float
    fwhm_nm: float
    amplitude: float


def planted_chiplet_cube(
    grid: ChipletGrid,
    wavelength_nm: np.ndarray,
    seed: int,
    chiplet_mean_nm: float = 635.0,
    chiplet_std_nm: float = 8.44,
    within_std_nm: float = 1.0,
    fill_prob: float = 0.6,
    empty_chiplets: int = 6,
    q_range: tuple[float, float] = (2500.0, 5000.0),
    amplitude: float = 200.0,
    offset: float = 10.0,
    noise_std: float = 0.5,
) -> tuple[HyperspectralCube, list[PlantedCavity]]:
    """Raster with one single-pixel cavity on a random subset of nanobeams.

    Each chiplet draws a centre wavelength from ``N(mean, std)``; its cavities
    scatter around that centre by ``within_std_nm``. Cavities sit on the beam
    centre rows and are placed so that no two planted pixels are 8-adjacent.
    """
    rng = np.random.default_rng(seed)
    nx = grid.cols * grid.chiplet_w_px
    ny = grid.rows * grid.chiplet_h_px
    x = np.asarray(wavelength_nm, dtype=np.float64)
    data = np.full((ny, nx, x.size), offset, dtype=np.float64)
    data += rng.normal(0.0, noise_std, data.shape)
    lo, hi = float(x[0]) + 1.0, float(x[-1]) - 1.0
    empty = set(map(int, rng.choice(grid.n_chiplets, size=empty_chiplets, replace=False)))
    planted: list[PlantedCavity] = []
    occupied: set[tuple[int, int]] = set()
    for row in range(grid.rows):
        for col in range(grid.cols):
            chip_center = float(rng.normal(chiplet_mean_nm, chiplet_std_nm))
            if row * grid.cols + col in empty:
                continue
            for beam in range(grid.nanobeams):
                if rng.random() >= fill_prob:
                    continue
                c = float(np.clip(rng.normal(chip_center, within_std_nm), lo, hi))
                q = float(rng.uniform(*q_range))
                g = c / q
                yy = grid.beam_row_px(row, beam)
                while True:
                    xx = col * grid.chiplet_w_px + int(rng.integers(1, grid.chiplet_w_px - 1))
                    if not any((yy + dy, xx + dx) in occupied for dy in (-1, 0, 1) for dx in (-1, 0, 1)):
                        break
                occupied.add((yy, xx))
                data[yy, xx] += lorentzian(x, c, g, amplitude, 0.0)
                planted.append(PlantedCavity(xx, yy, (row, col), beam, c, g, amplitude))
    cube = HyperspectralCube(x, np.clip(data, 0.0, None).astype(np.float32))
    return cube, planted
