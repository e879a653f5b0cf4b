"""Hole detection: gradient-directed circle voting, circle refinement, filters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter, uniform_filter

from ..errors import InvalidValue
from ..io_formats import GrayImage
from .edges import BeamAxis, EdgeConfig, preprocess


@dataclass(frozen=True)
class HoleConfig:
    r_range_nm: tuple[float, float] = (30.0, 60.0)
    max_midline_offset_nm: float = 20.0
    min_spacing_nm: float = 50.0
    # minimum share of the circumference that must vote for a centre
    min_vote_fraction: float = 0.35
    fit_band_px: float = 3.0

    def __post_init__(self):
        lo, hi = self.r_range_nm
        if not 0 < lo < hi:
            raise InvalidValue("r_range must satisfy 0 < low < high")
        if self.max_midline_offset_nm < 0 or self.min_spacing_nm < 0:
            raise InvalidValue("offset and spacing limits must be non-negative")


@dataclass(frozen=True)
class Hole:
    x_px: float
    y_px: float
    r_nm: float
    votes: float


@dataclass(frozen=True)
class HoleSet:
    holes: tuple[Hole, ...]

    def __len__(self) -> int:
        return len(self.holes)

    @property
    def radii_nm(self) -> np.ndarray:
        return np.array([h.r_nm for h in self.holes])

    @property
    def mean_r_nm(self) -> float | None:
        return float(self.radii_nm.mean()) if self.holes else None

    @property
    def std_r_nm(self) -> float | None:
        return float(self.radii_nm.std(ddof=1)) if len(self.holes) > 1 else None


def kasa_circle(x, y) -> tuple[float, float, float]:
    """Algebraic least-squares circle ``(cx, cy, r)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mx, my = x.mean(), y.mean()
    u, v = x - mx, y - my
    A = np.column_stack([u, v, np.ones_like(u)])
    b = u * u + v * v
    (a, bb, c), *_ = np.linalg.lstsq(A, b, rcond=None)
    cx, cy = a / 2, bb / 2
    return float(cx + mx), float(cy + my), float(math.sqrt(max(c + cx * cx + cy * cy, 0.0)))


def gauss_newton_circle(x, y, cx, cy, r, steps: int = 1):
    """Geometric circle refinement minimising ``sum (|p - c| - r)^2``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    for _ in range(steps):
        dx, dy = x - cx, y - cy
        d = np.hypot(dx, dy)
        d = np.where(d > 0, d, 1e-12)
        J = np.column_stack([-dx / d, -dy / d, -np.ones_like(d)])
        res = d - r
        delta, *_ = np.linalg.lstsq(J, -res, rcond=None)
        cx, cy, r = cx + delta[0], cy + delta[1], r + delta[2]
    return float(cx), float(cy), float(r)


def _subpixel_edges(mag: np.ndarray, ys: np.ndarray, xs: np.ndarray, gx, gy):
    """Shift each edge pixel to the parabolic peak of |grad| along the gradient."""
    h, w = mag.shape
    g = np.hypot(gx[ys, xs], gy[ys, xs])
    ux, uy = gx[ys, xs] / g, gy[ys, xs] / g

    def sample(px, py):
        ix = np.clip(np.rint(px).astype(int), 0, w - 1)
        iy = np.clip(np.rint(py).astype(int), 0, h - 1)
        return mag[iy, ix]

    m0 = mag[ys, xs]
    mp = sample(xs + ux, ys + uy)
    mm = sample(xs - ux, ys - uy)
    den = mm - 2 * m0 + mp
    off = np.where(den < 0, 0.5 * (mm - mp) / np.where(den < 0, den, -1.0), 0.0)
    off = np.clip(off, -0.5, 0.5)
    return xs + off * ux, ys + off * uy


def _vote(edge_y, edge_x, ux, uy, radii, shape, weights):
    h, w = shape
    acc = np.zeros((len(radii), h, w))
    for k, r in enumerate(radii):
        for sgn in (1.0, -1.0):
            cx = np.rint(edge_x - sgn * r * ux).astype(np.int64)
            cy = np.rint(edge_y - sgn * r * uy).astype(np.int64)
            ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
            np.add.at(acc[k], (cy[ok], cx[ok]), weights[ok])
    return acc


def detect_holes(
    image: GrayImage,
    axis: BeamAxis,
    cfg: HoleConfig = HoleConfig(),
    midline_offset_px: float | None = None,
    edge_cfg: EdgeConfig = EdgeConfig(),
) -> HoleSet:
    """Find circular holes near the beam midline.

    Edge pixels vote for centres one radius away along their gradient; each
    accumulator peak is refined by a circle fit to the edge points within a
    thin band, then filtered by radius range, distance from the midline and
    minimum spacing, in that order. ``midline_offset_px`` is the midline's
    normal offset from the image centre (default: median of candidate
    offsets).
    """
    sc = image.scale_nm_per_px
    em = preprocess(image, edge_cfg)
    ys, xs = np.nonzero(em.edges)
    if ys.size == 0:
        return HoleSet(())
    ex, ey = _subpixel_edges(em.magnitude, ys, xs, em.gx, em.gy)
    g = em.magnitude[ys, xs]
    ux, uy = em.gx[ys, xs] / g, em.gy[ys, xs] / g

    r_lo = cfg.r_range_nm[0] / sc
    r_hi = cfg.r_range_nm[1] / sc
    # search a little wider than the accepted range so edge cases are refined, not clipped
    radii = np.arange(max(2.0, math.floor(r_lo * 0.8)), math.ceil(r_hi * 1.2) + 1.0)
    acc = _vote(ey, ex, ux, uy, radii, em.edges.shape, np.ones_like(g))
    # rounding splits a centre's votes over neighbouring cells and radii; pool them
    acc = uniform_filter(acc, size=3, mode="constant") * 27.0
    need = cfg.min_vote_fraction * 2 * np.pi * radii[:, None, None]
    peaks = (acc == maximum_filter(acc, size=(3, 5, 5), mode="constant")) & (acc >= need)
    kk, py, px = np.nonzero(peaks)
    order = np.lexsort((px, py, -acc[kk, py, px]))
    cands = []
    tree_x, tree_y = ex, ey
    for i in order:
        r0, cx0, cy0 = radii[kk[i]], float(px[i]), float(py[i])
        d = np.hypot(tree_x - cx0, tree_y - cy0)
        near = np.abs(d - r0) < cfg.fit_band_px + 1.0
        if near.sum() < 12:
            continue
        cx, cy, r = kasa_circle(tree_x[near], tree_y[near])
        d = np.hypot(tree_x - cx, tree_y - cy)
        near = np.abs(d - r) < cfg.fit_band_px
        if near.sum() < 12:
            continue
        cx, cy, r = gauss_newton_circle(tree_x[near], tree_y[near], *kasa_circle(tree_x[near], tree_y[near]))
        # angular coverage guards against arcs of straight edges
        ang = np.arctan2(tree_y[near] - cy, tree_x[near] - cx)
        if np.unique(np.floor((ang + np.pi) / (np.pi / 8))).size < 12:
            continue
        cands.append(Hole(cx, cy, r * sc, float(acc[kk[i], py[i], px[i]])))
    h, w = em.edges.shape
    cands = [c for c in cands if 0 <= c.x_px <= w - 1 and 0 <= c.y_px <= h - 1]
    # identical circles found from neighbouring radius slices collapse here
    dedup: list[Hole] = []
    for c in cands:
        if all(math.hypot(c.x_px - d.x_px, c.y_px - d.y_px) > 2.0 for d in dedup):
            dedup.append(c)

    # 1. radius range
    kept = [c for c in dedup if cfg.r_range_nm[0] <= c.r_nm <= cfg.r_range_nm[1]]
    # 2. midline
    if kept:
        xs_c = np.array([c.x_px for c in kept])
        ys_c = np.array([c.y_px for c in kept])
        nx, ny = axis.normal
        off = (xs_c - (w - 1) / 2.0) * nx + (ys_c - (h - 1) / 2.0) * ny
        mid = float(np.median(off)) if midline_offset_px is None else float(midline_offset_px)
        dist = np.abs(off - mid) * sc
        kept = [c for c, dd in zip(kept, dist) if dd <= cfg.max_midline_offset_nm]
    # 3. minimum spacing, strongest first
    final: list[Hole] = []
    for c in sorted(kept, key=lambda c: (-c.votes, c.x_px, c.y_px)):
        if all(math.hypot(c.x_px - d.x_px, c.y_px - d.y_px) * sc >= cfg.min_spacing_nm for d in final):
            final.append(c)
    dx, dy = axis.direction
    final.sort(key=lambda c: c.x_px * dx + c.y_px * dy)
    return HoleSet(tuple(final))
