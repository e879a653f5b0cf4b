"""Robust straight-line fits with the Welsch loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidValue

WELSCH_C_PX = 2.0


@dataclass(frozen=True, eq=False)
class RobustLine:
    """``v = offset + slope * s`` with the final IRLS weights."""

    offset: float
    slope: float
    weights: np.ndarray
    n_iter: int
    offset_se: float = 0.0

    @property
    def angle_deg(self) -> float:
        return math.degrees(math.atan(self.slope))

    def __call__(self, s):
        return self.offset + self.slope * np.asarray(s, dtype=np.float64)


def welsch_weights(residual, c: float = WELSCH_C_PX):
    return np.exp(-((np.asarray(residual) / c) ** 2))


def _wls(s, v, w):
    sw = w.sum()
    sm = np.dot(w, s) / sw
    vm = np.dot(w, v) / sw
    ds = s - sm
    den = np.dot(w, ds * ds)
    slope = np.dot(w, ds * (v - vm)) / den if den > 0 else 0.0
    return vm - slope * sm, slope


def welsch_line_fit(
    s,
    v,
    base_weights=None,
    c: float = WELSCH_C_PX,
    max_iter: int = 50,
    tol: float = 0.01,
    anneal: tuple[float, ...] = (8.0, 4.0, 2.0),
) -> RobustLine:
    """IRLS line fit; weights are ``base_weights * exp(-(e/c)^2)``.

    The loss scale starts wide (``anneal`` multiples of ``c``) and narrows to
    ``c`` so that a least-squares start pulled by gross outliers still lands
    on the inlier line. Iteration stops once the offset and the line's end
    points move less than ``tol``.
    """
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if s.shape != v.shape or s.ndim != 1:
        raise InvalidValue("s and v must be 1-D arrays of equal length")
    if s.size < 2:
        raise InvalidValue("need at least two points for a line")
    base = np.ones_like(s) if base_weights is None else np.asarray(base_weights, dtype=np.float64)
    if np.any(base < 0):
        raise InvalidValue("base weights must be non-negative")
    span = float(np.ptp(s)) or 1.0
    b, m = _wls(s, v, base)
    w = base
    it = 0
    for scale in (*anneal, 1.0):
        cc = c * scale
        for _ in range(max_iter):
            it += 1
            w = base * welsch_weights(v - (b + m * s), cc)
            if w.sum() <= 0:
                break
            b_new, m_new = _wls(s, v, w)
            step = max(abs(b_new - b), abs(m_new - m) * span)
            b, m = b_new, m_new
            if step < tol:
                break
    w = base * welsch_weights(v - (b + m * s), c)
    e = v - (b + m * s)
    sw = w.sum()
    n_eff = sw * sw / max(np.dot(w, w), 1e-300)
    se = math.sqrt(max(np.dot(w, e * e) / sw, 0.0) / max(n_eff - 2, 1.0)) if sw > 0 else float("inf")
    return RobustLine(float(b), float(m), w, it, se)


def line_separation(a: RobustLine, b: RobustLine, at_s: float = 0.0) -> float:
    """Perpendicular distance from line ``a`` to line ``b`` at axial position ``at_s``."""
    m = 0.5 * (a.slope + b.slope)
    return float((b(at_s) - a(at_s)) / math.sqrt(1.0 + m * m))
