"""Top and bottom beam widths from the signed normal-gradient profile."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks as _scipy_peaks

from ..errors import EdgeCountMismatch, InvalidValue, TrapezoidViolation
from ..io_formats import GrayImage
from .edges import BeamAxis, BeamFrame, normal_gradient, resample_beam_frame
from .lines import RobustLine, line_separation, welsch_line_fit


@dataclass(frozen=True)
class WidthConfig:
    sigma: float = 1.0
    peak_fraction: float = 0.4
    refine_half_window_px: int = 4
    irls_iterations: int = 10
    irls_tol_px: float = 0.01
    trapezoid_tol_px: float = 1.0


@dataclass(frozen=True, eq=False)
class EdgeFit:
    polarity: int
    line: RobustLine
    n_points: int


@dataclass(frozen=True, eq=False)
class WidthMeasurement:
    W_top_nm: float
    W_bottom_nm: float
    sigma_top_nm: float = 0.0
    sigma_bottom_nm: float = 0.0
    edges: tuple[EdgeFit, ...] = ()
    axis_deg: float = 0.0
    scale_nm_per_px: float = 1.0

    @property
    def W_top_um(self) -> float:
        return self.W_top_nm * 1e-3

    @property
    def W_bottom_um(self) -> float:
        return self.W_bottom_nm * 1e-3

    @property
    def midline_px(self) -> float:
        """Normal offset of the beam centre line from the image centre."""
        if not self.edges:
            return 0.0
        return 0.5 * (self.edges[0].line(0.0) + self.edges[-1].line(0.0))


def edge_profile(frame: BeamFrame) -> np.ndarray:
    """Median signed gradient across axial positions, per normal offset."""
    vals = frame.values
    valid = np.isfinite(vals)
    out = np.full(vals.shape[0], np.nan)
    rows = valid.sum(axis=1) >= max(8, 0.05 * vals.shape[1])
    if rows.any():
        out[rows] = np.nanmedian(vals[rows], axis=1)
    return out


def profile_peaks(profile: np.ndarray, fraction: float) -> list[tuple[int, int]]:
    """``(index, polarity)`` of signed extrema above ``fraction`` of the peak |value|."""
    p = np.nan_to_num(profile, nan=0.0)
    top = float(np.max(np.abs(p))) if p.size else 0.0
    if top <= 0:
        return []
    found = []
    for sign in (1, -1):
        idx, _ = _scipy_peaks(sign * p, height=fraction * top, distance=3)
        found += [(int(i), sign) for i in idx]
    return sorted(found)


def _refine_edge(frame: BeamFrame, v_idx: int, polarity: int, cfg: WidthConfig) -> EdgeFit:
    half = cfg.refine_half_window_px
    lo, hi = max(v_idx - half, 1), min(v_idx + half, frame.v.size - 2)
    block = polarity * frame.values[lo - 1 : hi + 2]
    good_cols = np.all(np.isfinite(block), axis=0)
    s_pts, v_pts, w_pts = [], [], []
    core = block[1:-1]
    for j in np.nonzero(good_cols)[0]:
        col = core[:, j]
        k = int(np.argmax(col))
        if col[k] <= 0:
            continue
        ym, y0, yp = block[k, j], block[k + 1, j], block[k + 2, j]
        den = ym - 2 * y0 + yp
        d = 0.5 * (ym - yp) / den if den < 0 else 0.0
        d = max(-0.5, min(0.5, d))
        s_pts.append(frame.s[j])
        v_pts.append(frame.v[lo + k] + d)
        w_pts.append(y0)
    if len(s_pts) < 8:
        raise EdgeCountMismatch("too few edge samples to refine an edge", n=len(s_pts))
    line = welsch_line_fit(
        np.array(s_pts), np.array(v_pts), np.array(w_pts),
        max_iter=cfg.irls_iterations, tol=cfg.irls_tol_px,
    )
    return EdgeFit(polarity, line, len(s_pts))


def measure_widths(image: GrayImage, axis: BeamAxis, cfg: WidthConfig = WidthConfig()) -> WidthMeasurement:
    """Locate four alternating edges across the beam and convert to widths.

    Outer opposite-polarity pair gives the bottom width, inner pair the top
    width. Each edge is refined by a gradient-weighted robust line fit.
    """
    if axis.coherence < 0.2:
        raise InvalidValue("beam axis coherence below 0.2", coherence=axis.coherence)
    g = normal_gradient(image, axis.angle_deg, cfg.sigma)
    frame = resample_beam_frame(g, axis.angle_deg)
    peaks = profile_peaks(edge_profile(frame), cfg.peak_fraction)
    if len(peaks) != 4:
        raise EdgeCountMismatch(f"found {len(peaks)} edge peaks, need 4", n=len(peaks))
    signs = [p[1] for p in peaks]
    if any(signs[i] == signs[i + 1] for i in range(3)):
        raise EdgeCountMismatch("edge polarities do not alternate", polarities=str(signs))
    fits = tuple(_refine_edge(frame, i, sgn, cfg) for i, sgn in peaks)
    sc = image.scale_nm_per_px
    wb_px = line_separation(fits[0].line, fits[3].line)
    wt_px = line_separation(fits[1].line, fits[2].line)
    if wt_px > wb_px + cfg.trapezoid_tol_px:
        raise TrapezoidViolation(
            f"top width {wt_px * sc:.2f} nm exceeds bottom width {wb_px * sc:.2f} nm"
        )
    se = [f.line.offset_se for f in fits]
    return WidthMeasurement(
        wt_px * sc,
        wb_px * sc,
        math.hypot(se[1], se[2]) * sc,
        math.hypot(se[0], se[3]) * sc,
        fits,
        axis.angle_deg,
        sc,
    )
