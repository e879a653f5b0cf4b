"""Parametric SEM renders with known geometry, used as ground truth.

Straight beam edges are rendered analytically as Gaussian-blurred steps along
the image normal ``v``; holes are rasterised with supersampled coverage and
blurred numerically. Coordinates are in pixels with the origin at the image
centre, ``x`` to the right and ``y`` (row index) downward. A beam at angle
``a`` runs along ``(cos a, sin a)`` and ``v = -x sin a + y cos a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.special import erf

from ..io_formats import GrayImage

BACKGROUND = 40.0
SIDEWALL = 190.0
TOP = 110.0
HOLE = 40.0


@dataclass(frozen=True)
class BeamGeometry:
    """Trapezoidal nanobeam cross-section and hole row, lengths in nm."""

    W_top_nm: float = 280.0
    W_bottom_nm: float = 330.0
    thickness_nm: float = 129.0
    hole_radius_nm: float = 45.0
    n_holes: int = 16
    hole_pitch_px: float = 60.0


@dataclass(frozen=True)
class RenderConfig:
    shape: tuple[int, int] = (448, 1152)
    scale_nm_per_px: float = 2.0
    blur_px: float = 1.5
    noise_std: float = 3.0
    supersample: int = 4
    seed: int = 0


def _grid(shape):
    h, w = shape
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    return x - (w - 1) / 2.0, y - (h - 1) / 2.0


def _steps(v: np.ndarray, levels: list[tuple[float, float]], base: float, blur: float) -> np.ndarray:
    """``base`` plus blurred steps; ``levels`` holds ``(position, jump)`` pairs."""
    out = np.full(v.shape, base)
    for pos, jump in levels:
        out += jump * 0.5 * (1.0 + erf((v - pos) / (math.sqrt(2.0) * blur)))
    return out


def _disk_layer(centres, radius_px, shape, ss: int, blur: float) -> np.ndarray:
    """Blurred coverage of a set of disks at output resolution."""
    h, w = shape
    cov = np.zeros(shape)
    offs = (np.arange(ss) + 0.5) / ss - 0.5
    pad = int(math.ceil(radius_px + 1))
    for cx, cy in centres:
        x0, x1 = max(0, int(cx) - pad), min(w, int(cx) + pad + 2)
        y0, y1 = max(0, int(cy) - pad), min(h, int(cy) + pad + 2)
        if x0 >= x1 or y0 >= y1:
            continue
        yy, xx = np.mgrid[y0:y1, x0:x1].astype(np.float64)
        acc = np.zeros(xx.shape)
        for oy in offs:
            for ox in offs:
                acc += ((xx + ox - cx) ** 2 + (yy + oy - cy) ** 2) <= radius_px**2
        cov[y0:y1, x0:x1] = np.maximum(cov[y0:y1, x0:x1], acc / ss**2)
    return gaussian_filter(cov, blur, mode="nearest")


def _finish(img: np.ndarray, cfg: RenderConfig, tilt_deg=None) -> GrayImage:
    rng = np.random.default_rng(cfg.seed)
    if cfg.noise_std > 0:
        img = img + rng.normal(0.0, cfg.noise_std, img.shape)
    pix = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return GrayImage(pix, cfg.scale_nm_per_px, tilt_deg)


def hole_centres(geom: BeamGeometry, shape, angle_deg: float = 0.0, offset_px: float = 0.0):
    """Pixel centres of the hole row, symmetric about the image centre."""
    h, w = shape
    a = math.radians(angle_deg)
    s = (np.arange(geom.n_holes) - (geom.n_holes - 1) / 2.0) * geom.hole_pitch_px
    cx = (w - 1) / 2.0 + s * math.cos(a) - offset_px * math.sin(a)
    cy = (h - 1) / 2.0 + s * math.sin(a) + offset_px * math.cos(a)
    return list(zip(cx.tolist(), cy.tolist()))


def render_top_view(
    geom: BeamGeometry = BeamGeometry(),
    cfg: RenderConfig = RenderConfig(),
    angle_deg: float = 0.0,
    extra_holes: tuple[tuple[float, float, float], ...] = (),
    holes: bool = True,
) -> GrayImage:
    """Top view: dark substrate, bright sloped sidewalls, mid-grey top face.

    ``extra_holes`` adds ``(offset_along_px, offset_normal_px, radius_nm)``
    disks relative to the image centre in the beam frame.
    """
    x, y = _grid(cfg.shape)
    a = math.radians(angle_deg)
    v = -x * math.sin(a) + y * math.cos(a)
    sc = cfg.scale_nm_per_px
    hb, ht = geom.W_bottom_nm / (2 * sc), geom.W_top_nm / (2 * sc)
    img = _steps(
        v,
        [(-hb, SIDEWALL - BACKGROUND), (-ht, TOP - SIDEWALL), (ht, SIDEWALL - TOP), (hb, BACKGROUND - SIDEWALL)],
        BACKGROUND,
        cfg.blur_px,
    )
    h, w = cfg.shape
    if holes and geom.n_holes > 0:
        cov = _disk_layer(hole_centres(geom, cfg.shape, angle_deg), geom.hole_radius_nm / sc,
                          cfg.shape, cfg.supersample, cfg.blur_px)
        img = img - (TOP - HOLE) * cov
    for s_off, v_off, r_nm in extra_holes:
        c = ((w - 1) / 2.0 + s_off * math.cos(a) - v_off * math.sin(a),
             (h - 1) / 2.0 + s_off * math.sin(a) + v_off * math.cos(a))
        cov = _disk_layer([c], r_nm / sc, cfg.shape, cfg.supersample, cfg.blur_px)
        img = img - (TOP - HOLE) * cov
    return _finish(img, cfg)


@dataclass(frozen=True)
class TiltedProjection:
    """Ridge positions (px along the image normal) and their separations."""

    far_top: float
    near_top: float
    near_bottom: float

    @property
    def d_T(self) -> float:
        return self.near_top - self.far_top

    @property
    def d_NB(self) -> float:
        return self.near_bottom - self.near_top


def project_tilted(geom: BeamGeometry, tilt_deg: float, scale_nm_per_px: float) -> TiltedProjection:
    """Orthographic view after tilting about the beam axis by ``tilt_deg``.

    A point at lateral position ``y`` and height ``z`` lands at
    ``v = y cos(theta) - z sin(theta)``; the result is centred on the image.
    """
    th = math.radians(tilt_deg)
    c, s = math.cos(th), math.sin(th)
    t = geom.thickness_nm
    far_top = -0.5 * geom.W_top_nm * c - t * s
    near_top = 0.5 * geom.W_top_nm * c - t * s
    near_bottom = 0.5 * geom.W_bottom_nm * c
    mid = 0.5 * (far_top + near_bottom)
    return TiltedProjection(*((p - mid) / scale_nm_per_px for p in (far_top, near_top, near_bottom)))


def render_tilted_view(
    geom: BeamGeometry = BeamGeometry(),
    cfg: RenderConfig = RenderConfig(),
    tilt_deg: float = 45.0,
    psi_deg: float = 0.0,
    erase_bottom: bool = False,
) -> GrayImage:
    """Tilted view with three ridges: far-top, near-top and near-bottom edge.

    The far sidewall is hidden behind the top face. ``psi_deg`` rotates the
    projected beam in the image plane. ``erase_bottom`` gives the near
    sidewall the substrate brightness so the bottom ridge vanishes.
    """
    x, y = _grid(cfg.shape)
    a = math.radians(psi_deg)
    v = -x * math.sin(a) + y * math.cos(a)
    p = project_tilted(geom, tilt_deg, cfg.scale_nm_per_px)
    side = BACKGROUND if erase_bottom else SIDEWALL
    img = _steps(
        v,
        [(p.far_top, TOP - BACKGROUND), (p.near_top, side - TOP), (p.near_bottom, BACKGROUND - side)],
        BACKGROUND,
        cfg.blur_px,
    )
    return _finish(img, cfg, tilt_deg)


def render_noise(cfg: RenderConfig = RenderConfig(), mean: float = 100.0, std: float = 20.0) -> GrayImage:
    rng = np.random.default_rng(cfg.seed)
    img = rng.normal(mean, std, cfg.shape)
    return GrayImage(np.clip(np.rint(img), 0, 255).astype(np.uint8), cfg.scale_nm_per_px)


def render_uniform(cfg: RenderConfig = RenderConfig(), level: int = 100) -> GrayImage:
    return GrayImage(np.full(cfg.shape, level, dtype=np.uint8), cfg.scale_nm_per_px)
