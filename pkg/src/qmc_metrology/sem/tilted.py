"""Three-ridge extraction from tilted-view images."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation
from skimage.transform import probabilistic_hough_line

from ..errors import NonParallelRidges, RidgeCountMismatch
from ..io_formats import GrayImage
from .edges import EdgeConfig, normal_gradient, preprocess, resample_beam_frame
from .lines import RobustLine, line_separation, welsch_line_fit

PARALLEL_TOL_DEG = 2.0


@dataclass(frozen=True)
class RidgeConfig:
    hough_threshold: int = 10
    min_segment_fraction: float = 0.125
    line_gap_px: int = 3
    angle_window_deg: float = 5.0
    group_gap_px: float = 3.0
    refine_half_window_px: int = 4
    hough_seed: int = 0


@dataclass(frozen=True, eq=False)
class TiltedRidges:
    """Far-top, near-top and near-bottom ridge lines in the beam frame.

    Lines are ``v = offset + slope * s`` about the image centre in a frame
    rotated by ``frame_deg``. Separations are in pixels, measured at the
    image centre.
    """

    lines: tuple[RobustLine, RobustLine, RobustLine]
    frame_deg: float
    d_T: float
    d_NB: float
    psi_deg: float
    psi_spread_deg: float

    @property
    def ratio(self) -> float:
        return self.d_NB / self.d_T

    @property
    def angles_deg(self) -> tuple[float, ...]:
        return tuple(self.frame_deg + ln.angle_deg for ln in self.lines)


def _segment_stats(segments):
    p0 = np.array([s[0] for s in segments], dtype=np.float64)
    p1 = np.array([s[1] for s in segments], dtype=np.float64)
    d = p1 - p0
    ang = np.degrees(np.arctan2(d[:, 1], d[:, 0]))
    ang = (ang + 90.0) % 180.0 - 90.0
    return 0.5 * (p0 + p1), ang, np.hypot(d[:, 0], d[:, 1])


def _weighted_median(x, w):
    order = np.argsort(x, kind="stable")
    cw = np.cumsum(w[order])
    return float(x[order][np.searchsorted(cw, 0.5 * cw[-1])])


def _kmeans_1d(x, w, centres, max_iter: int = 100):
    c = np.array(sorted(centres), dtype=np.float64)
    lab = None
    for _ in range(max_iter):
        new = np.argmin(np.abs(x[:, None] - c[None, :]), axis=1)
        if lab is not None and np.array_equal(new, lab):
            break
        lab = new
        for k in range(c.size):
            m = lab == k
            if m.any():
                c[k] = np.dot(w[m], x[m]) / w[m].sum()
    return c, lab


def _refine_ridge(frame, v_c: float, half: int) -> RobustLine:
    i0 = int(np.argmin(np.abs(frame.v - v_c)))
    lo, hi = max(i0 - half, 1), min(i0 + half, frame.v.size - 2)
    block = frame.values[lo - 1 : hi + 2]
    good = np.all(np.isfinite(block), axis=0)
    s_pts, v_pts, w_pts = [], [], []
    core = block[1:-1]
    for j in np.nonzero(good)[0]:
        k = int(np.argmax(core[:, j]))
        ym, y0, yp = block[k, j], block[k + 1, j], block[k + 2, j]
        den = ym - 2 * y0 + yp
        d = 0.5 * (ym - yp) / den if den < 0 else 0.0
        s_pts.append(frame.s[j])
        v_pts.append(frame.v[lo + k] + max(-0.5, min(0.5, d)))
        w_pts.append(y0)
    if len(s_pts) < 8:
        raise RidgeCountMismatch("ridge has too few usable samples", n=len(s_pts))
    return welsch_line_fit(np.array(s_pts), np.array(v_pts), np.array(w_pts))


def detect_ridges_tilted(
    image: GrayImage, cfg: RidgeConfig = RidgeConfig(), edge_cfg: EdgeConfig = EdgeConfig()
) -> TiltedRidges:
    """Fit the three visible ridges of a tilted beam.

    Probabilistic Hough segments near the dominant direction are grouped by
    perpendicular offset; the three strongest groups seed a 1-D k-means, and
    each ridge is then fitted with a Welsch-weighted line through subpixel
    gradient maxima. Ridges are ordered by increasing row (far-top first).
    """
    em = preprocess(image, edge_cfg)
    min_len = max(10, int(cfg.min_segment_fraction * max(image.width, image.height)))
    if not em.edges.any():
        raise RidgeCountMismatch("no edges in image", n=0)
    # a ridge on a half-pixel thins to a chain zig-zagging between two rows;
    # a 3x3 dilation turns it into a band that Hough reads as one line
    band = binary_dilation(em.edges, structure=np.ones((3, 3), bool))
    segs = probabilistic_hough_line(
        band, threshold=cfg.hough_threshold, line_length=min_len,
        line_gap=cfg.line_gap_px, rng=cfg.hough_seed,
    )
    if len(segs) < 3:
        raise RidgeCountMismatch(f"only {len(segs)} line segments found", n=len(segs))
    mid, ang, length = _segment_stats(segs)
    dom = _weighted_median(ang, length)
    diff = (ang - dom + 90.0) % 180.0 - 90.0
    keep = np.abs(diff) <= cfg.angle_window_deg
    mid, length = mid[keep], length[keep]
    a = math.radians(dom)
    h, w = em.edges.shape
    off = -(mid[:, 0] - (w - 1) / 2.0) * math.sin(a) + (mid[:, 1] - (h - 1) / 2.0) * math.cos(a)

    order = np.argsort(off, kind="stable")
    groups: list[list[int]] = [[int(order[0])]]
    for i in order[1:]:
        if off[i] - off[groups[-1][-1]] > cfg.group_gap_px:
            groups.append([int(i)])
        else:
            groups[-1].append(int(i))
    if len(groups) < 3:
        raise RidgeCountMismatch(f"found {len(groups)} ridge groups, need 3", n=len(groups))
    strength = [length[g].sum() for g in groups]
    top3 = sorted(range(len(groups)), key=lambda k: (-strength[k], k))[:3]
    members = np.array(sorted(i for k in top3 for i in groups[k]))
    seeds = [float(np.dot(length[groups[k]], off[groups[k]]) / length[groups[k]].sum()) for k in top3]
    centres, _ = _kmeans_1d(off[members], length[members], seeds)

    g = np.abs(normal_gradient(image, dom, edge_cfg.denoise_sigma))
    frame = resample_beam_frame(g, dom)
    lines = tuple(_refine_ridge(frame, c, cfg.refine_half_window_px) for c in sorted(centres))
    lines = tuple(sorted(lines, key=lambda ln: ln(0.0)))
    angles = [dom + ln.angle_deg for ln in lines]
    spread = max(angles) - min(angles)
    if spread > PARALLEL_TOL_DEG:
        raise NonParallelRidges(f"ridge angles differ by {spread:.2f} deg", spread_deg=spread)
    d_T = line_separation(lines[0], lines[1])
    d_NB = line_separation(lines[1], lines[2])
    if not (d_T > 0 and d_NB > 0):
        raise RidgeCountMismatch("ridges are not distinct", d_T=d_T, d_NB=d_NB)
    return TiltedRidges(lines, dom, d_T, d_NB, float(np.mean(angles)), spread)
