"""Gradients, Canny edges, the beam axis and beam-frame resampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate, gaussian_filter, map_coordinates
from skimage.filters import apply_hysteresis_threshold

from ..errors import ImageTooSmall, InvalidValue, LowCoherence
from ..io_formats import GrayImage

MIN_SIDE_PX = 32
STRUCTURE_RHO_PX = 8.0
MIN_COHERENCE = 0.2

_SCHARR_X = np.array([[-3.0, 0.0, 3.0], [-10.0, 0.0, 10.0], [-3.0, 0.0, 3.0]]) / 32.0


@dataclass(frozen=True)
class EdgeConfig:
    denoise_sigma: float = 1.0
    canny_low: float = 70.0
    canny_high: float = 90.0
    # gradient magnitudes below median + k * MAD are treated as noise
    noise_floor_k: float = 5.0

    def __post_init__(self):
        if self.denoise_sigma < 0:
            raise InvalidValue("denoise_sigma must be >= 0")
        if not 0 <= self.canny_low <= self.canny_high <= 100:
            raise InvalidValue("need 0 <= canny_low <= canny_high <= 100")


@dataclass(frozen=True, eq=False)
class EdgeMap:
    edges: np.ndarray
    magnitude: np.ndarray
    gx: np.ndarray
    gy: np.ndarray

    @property
    def width(self) -> int:
        return self.edges.shape[1]

    @property
    def height(self) -> int:
        return self.edges.shape[0]

    @property
    def direction(self) -> np.ndarray:
        return np.arctan2(self.gy, self.gx)


def _check_size(image: GrayImage) -> None:
    if image.width < MIN_SIDE_PX or image.height < MIN_SIDE_PX:
        raise ImageTooSmall(
            f"image is {image.width}x{image.height}, need >= {MIN_SIDE_PX}x{MIN_SIDE_PX}"
        )


def scharr_gradients(pixels: np.ndarray, sigma: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian pre-smoothing followed by Scharr derivatives (per pixel)."""
    img = pixels.astype(np.float64)
    if sigma > 0:
        img = gaussian_filter(img, sigma, mode="nearest")
    gx = correlate(img, _SCHARR_X, mode="nearest")
    gy = correlate(img, _SCHARR_X.T, mode="nearest")
    return gx, gy


def _non_max_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Keep pixels that are maxima along the quantised gradient direction."""
    ang = (np.rad2deg(np.arctan2(gy, gx)) + 180.0) % 180.0
    q = np.digitize(ang, [22.5, 67.5, 112.5, 157.5]) % 4
    p = np.pad(mag, 1, mode="constant")
    h, w = mag.shape
    c = p[1:-1, 1:-1]
    shifts = {0: ((0, 1), (0, -1)), 1: ((1, 1), (-1, -1)), 2: ((1, 0), (-1, 0)), 3: ((1, -1), (-1, 1))}
    keep = np.zeros(mag.shape, dtype=bool)
    for k, ((dy1, dx1), (dy2, dx2)) in shifts.items():
        a = p[1 + dy1 : 1 + dy1 + h, 1 + dx1 : 1 + dx1 + w]
        b = p[1 + dy2 : 1 + dy2 + h, 1 + dx2 : 1 + dx2 + w]
        keep |= (q == k) & (c >= a) & (c > b)
    return keep & (mag > 0)


def preprocess(image: GrayImage, cfg: EdgeConfig = EdgeConfig()) -> EdgeMap:
    """Smoothed Scharr gradients and Canny edges with percentile thresholds.

    The hysteresis thresholds are percentiles of the gradient magnitude over
    the whole image, each raised to at least a robust noise floor
    (median + k MAD). On sparse images the floor dominates and only real edges
    survive; on busy images the percentiles do.
    """
    _check_size(image)
    gx, gy = scharr_gradients(image.pixels, cfg.denoise_sigma)
    mag = np.hypot(gx, gy)
    thin = _non_max_suppression(mag, gx, gy)
    med = float(np.median(mag))
    mad = float(np.median(np.abs(mag - med))) * 1.4826
    floor = med + cfg.noise_floor_k * mad
    lo, hi = np.percentile(mag, [cfg.canny_low, cfg.canny_high])
    lo, hi = max(lo, floor), max(hi, floor)
    cand = thin & (mag > lo)
    if not cand.any():
        return EdgeMap(np.zeros(mag.shape, dtype=bool), mag, gx, gy)
    sup = np.where(cand, mag, 0.0)
    edges = apply_hysteresis_threshold(sup, lo, hi) & cand
    return EdgeMap(edges, mag, gx, gy)


@dataclass(frozen=True)
class BeamAxis:
    angle_deg: float
    coherence: float

    @property
    def angle_rad(self) -> float:
        return math.radians(self.angle_deg)

    @property
    def direction(self) -> tuple[float, float]:
        return math.cos(self.angle_rad), math.sin(self.angle_rad)

    @property
    def normal(self) -> tuple[float, float]:
        return -math.sin(self.angle_rad), math.cos(self.angle_rad)


def _wrap_half_turn(deg: float) -> float:
    """Map an orientation to (-90, 90]."""
    d = (deg + 90.0) % 180.0 - 90.0
    return 90.0 if d == -90.0 else d


def estimate_beam_axis(image: GrayImage, sigma: float = 1.0, rho: float = STRUCTURE_RHO_PX,
                       min_coherence: float = MIN_COHERENCE) -> BeamAxis:
    """Beam direction from the globally averaged structure tensor.

    Angles are measured from +x toward +y (increasing row index).
    """
    _check_size(image)
    gx, gy = scharr_gradients(image.pixels, sigma)
    jxx = gaussian_filter(gx * gx, rho, mode="nearest").mean()
    jxy = gaussian_filter(gx * gy, rho, mode="nearest").mean()
    jyy = gaussian_filter(gy * gy, rho, mode="nearest").mean()
    tr = jxx + jyy
    if tr <= 0:
        raise LowCoherence("image has no gradient energy", coherence=0.0)
    coherence = float(math.hypot(jxx - jyy, 2 * jxy) / tr)
    normal_deg = 0.5 * math.degrees(math.atan2(2 * jxy, jxx - jyy))
    axis = BeamAxis(_wrap_half_turn(normal_deg + 90.0), coherence)
    if coherence < min_coherence:
        raise LowCoherence(f"structure coherence {coherence:.3f} below {min_coherence}", coherence=coherence)
    return axis


@dataclass(frozen=True, eq=False)
class BeamFrame:
    """Image values resampled on a grid aligned with the beam.

    ``values[i, j]`` sits at normal offset ``v[i]`` and axial offset ``s[j]``
    from the image centre; samples that fall outside the image are NaN.
    """

    s: np.ndarray
    v: np.ndarray
    values: np.ndarray
    angle_deg: float
    centre: tuple[float, float]

    def to_image(self, s, v):
        a = math.radians(self.angle_deg)
        x = self.centre[0] + np.asarray(s) * math.cos(a) - np.asarray(v) * math.sin(a)
        y = self.centre[1] + np.asarray(s) * math.sin(a) + np.asarray(v) * math.cos(a)
        return x, y


def resample_beam_frame(field: np.ndarray, angle_deg: float, step: float = 1.0) -> BeamFrame:
    h, w = field.shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    half = 0.5 * math.hypot(w, h)
    s = np.arange(-half, half + step, step)
    v = np.arange(-half, half + step, step)
    a = math.radians(angle_deg)
    S, V = np.meshgrid(s, v)
    x = cx + S * math.cos(a) - V * math.sin(a)
    y = cy + S * math.sin(a) + V * math.cos(a)
    vals = map_coordinates(field, [y, x], order=1, mode="constant", cval=np.nan)
    inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    vals = np.where(inside, vals, np.nan)
    return BeamFrame(s, v, vals, angle_deg, (cx, cy))


def normal_gradient(image: GrayImage, axis_deg: float, sigma: float = 1.0) -> np.ndarray:
    """Signed intensity derivative along the beam normal."""
    gx, gy = scharr_gradients(image.pixels, sigma)
    a = math.radians(axis_deg)
    return -gx * math.sin(a) + gy * math.cos(a)
