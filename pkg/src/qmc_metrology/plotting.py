"""Minimal deterministic SVG plots.

Every number is written with a fixed format and elements are emitted in
input order, so identical data produce identical bytes.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Mapping
from xml.sax.saxutils import escape

import numpy as np

from .errors import InvalidValue, IoFailure

KINDS = ("spectrum", "map", "histogram", "variogram", "trajectory")

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 20, 70

# colour ramp for map markers (blue -> red)
_RAMP = ((49, 54, 149), (69, 117, 180), (171, 217, 233), (254, 224, 144), (244, 109, 67), (165, 0, 38))


def _f(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    out = []
    k = 0
    while first + k * step <= hi + 1e-9 * step:
        out.append(round(first + k * step, 12))
        k += 1
    return out


def _range(v: np.ndarray) -> tuple[float, float]:
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi == lo:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def _colour(frac: float) -> str:
    frac = min(max(frac, 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(frac), len(_RAMP) - 2)
    w = frac - i
    c = [round(a + (b - a) * w) for a, b in zip(_RAMP[i], _RAMP[i + 1])]
    return "#{:02x}{:02x}{:02x}".format(*c)


class _Canvas:
    def __init__(self, xr, yr, xlabel: str, ylabel: str, title: str):
        self.x0, self.x1 = xr
        self.y0, self.y1 = yr
        self.parts: list[str] = []
        self.xlabel, self.ylabel, self.title = xlabel, ylabel, title

    def px(self, x) -> float:
        return LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)

    def py(self, y) -> float:
        return HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)

    def add(self, s: str) -> None:
        self.parts.append(s)

    def polyline(self, x, y, colour="#1f4e79", dash: str | None = None) -> None:
        pts = " ".join(f"{_f(self.px(a))},{_f(self.py(b))}" for a, b in zip(x, y))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5"{extra} points="{pts}"/>')

    def markers(self, x, y, colours, r=3.0) -> None:
        for a, b, c in zip(x, y, colours):
            self.add(f'<circle cx="{_f(self.px(a))}" cy="{_f(self.py(b))}" r="{_f(r)}" fill="{c}"/>')

    def axes(self) -> list[str]:
        out = []
        xa, xb = LEFT, WIDTH - RIGHT
        ya, yb = HEIGHT - BOTTOM, TOP
        out.append(f'<rect x="{xa}" y="{yb}" width="{xb - xa}" height="{ya - yb}" fill="none" stroke="#000"/>')
        for t in _nice_ticks(self.x0, self.x1):
            p = _f(self.px(t))
            out.append(f'<line x1="{p}" y1="{ya}" x2="{p}" y2="{ya + 5}" stroke="#000"/>')
            out.append(f'<text x="{p}" y="{ya + 18}" text-anchor="middle">{_tick_label(t)}</text>')
        for t in _nice_ticks(self.y0, self.y1):
            p = _f(self.py(t))
            out.append(f'<line x1="{xa - 5}" y1="{p}" x2="{xa}" y2="{p}" stroke="#000"/>')
            out.append(f'<text x="{xa - 8}" y="{p}" text-anchor="end" dominant-baseline="middle">{_tick_label(t)}</text>')
        out.append(f'<text x="{(xa + xb) / 2:.2f}" y="{ya + 38}" text-anchor="middle">{escape(self.xlabel)}</text>')
        cy = (ya + yb) / 2
        out.append(
            f'<text x="16" y="{cy:.2f}" text-anchor="middle" transform="rotate(-90 16 {cy:.2f})">{escape(self.ylabel)}</text>'
        )
        if self.title:
            out.append(f'<text x="{(xa + xb) / 2:.2f}" y="14" text-anchor="middle">{escape(self.title)}</text>')
        return out

    def svg(self, provenance: str) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">'
        )
        foot = f'<text x="4" y="{HEIGHT - 6}" font-size="9" fill="#555">{escape(provenance)}</text>'
        body = [head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>', *self.axes(), *self.parts, foot, "</svg>"]
        return "\n".join(body) + "\n"


def _arr(data: Mapping[str, Any], key: str) -> np.ndarray:
    if key not in data:
        raise InvalidValue(f"plot data needs '{key}'")
    a = np.asarray(data[key], dtype=np.float64).ravel()
    if a.size == 0:
        raise InvalidValue(f"plot data '{key}' is empty")
    if not np.all(np.isfinite(a)):
        raise InvalidValue(f"plot data '{key}' has non-finite values")
    return a


def _xy(data, xlabel, ylabel, title):
    x, y = _arr(data, "x"), _arr(data, "y")
    if x.size != y.size:
        raise InvalidValue("x and y must have equal length")
    return x, y, _Canvas(_range(x), _range(y), data.get("xlabel", xlabel), data.get("ylabel", ylabel), title)


def _spectrum(data, title):
    x, y, cv = _xy(data, "wavelength (nm)", "intensity (counts)", title)
    cv.polyline(x, y)
    for m in np.asarray(data.get("markers", []), dtype=np.float64):
        p = _f(cv.px(m))
        cv.add(f'<line x1="{p}" y1="{TOP}" x2="{p}" y2="{HEIGHT - BOTTOM}" stroke="#c00" stroke-dasharray="3,3"/>')
    return cv


def _trajectory(data, title):
    x, y, cv = _xy(data, "frame", "resonance (nm)", title)
    cv.polyline(x, y)
    cv.markers(x, y, ["#1f4e79"] * x.size, r=2.5)
    return cv


def _histogram(data, title):
    v = _arr(data, "values")
    bins = int(data.get("bins", 20))
    if bins < 1:
        raise InvalidValue("bins must be >= 1")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        d = abs(lo) * 0.01 or 0.5
        edges = np.array([lo - d, hi + d])
        counts = np.array([v.size])
    else:
        counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    cv = _Canvas((float(edges[0]), float(edges[-1])), (0.0, float(counts.max()) * 1.08),
                 data.get("xlabel", "value"), data.get("ylabel", "count"), title)
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        if c == 0:
            continue
        x0, x1 = cv.px(a), cv.px(b)
        y0, y1 = cv.py(c), cv.py(0.0)
        cv.add(f'<rect class="bar" x="{_f(x0)}" y="{_f(y0)}" width="{_f(x1 - x0)}" height="{_f(y1 - y0)}" fill="#6a9fcf" stroke="#1f4e79"/>')
    return cv


def _variogram(data, title):
    h, g = _arr(data, "lags"), _arr(data, "gammas")
    if h.size != g.size:
        raise InvalidValue("lags and gammas must have equal length")
    ys = [g]
    overlay = data.get("overlay")
    if overlay is not None:
        overlay = _arr(data, "overlay")
        ys.append(overlay)
    allg = np.concatenate(ys)
    cv = _Canvas(_range(np.concatenate([[0.0], h])), (0.0, float(allg.max()) * 1.08 or 1.0),
                 data.get("xlabel", "lag (um)"), data.get("ylabel", "semivariance (nm^2)"), title)
    cv.polyline(h, g)
    cv.markers(h, g, ["#1f4e79"] * h.size)
    if overlay is not None:
        cv.polyline(h, overlay, colour="#c00", dash="5,3")
    return cv


def _map(data, title):
    x, y, c = _arr(data, "x"), _arr(data, "y"), _arr(data, "c")
    if not (x.size == y.size == c.size):
        raise InvalidValue("x, y and c must have equal length")
    cv = _Canvas(_range(x), _range(y), data.get("xlabel", "x (um)"), data.get("ylabel", "y (um)"), title)
    # rows grow downward in the source raster, so flip y for display
    cv.y0, cv.y1 = cv.y1, cv.y0
    for x0, y0, x1, y1 in data.get("cells", []):
        a, b = cv.px(x0), cv.py(y0)
        w, hh = cv.px(x1) - a, cv.py(y1) - b
        cv.add(f'<rect x="{_f(min(a, a + w))}" y="{_f(min(b, b + hh))}" width="{_f(abs(w))}" height="{_f(abs(hh))}" fill="none" stroke="#bbb"/>')
    lo, hi = float(c.min()), float(c.max())
    span = hi - lo or 1.0
    cv.markers(x, y, [_colour((v - lo) / span) for v in c])
    unit = data.get("clabel", "lambda0 (nm)")
    cv.add(f'<text x="{WIDTH - RIGHT}" y="{HEIGHT - BOTTOM + 56}" text-anchor="end">{escape(unit)}: {_tick_label(lo)} to {_tick_label(hi)}</text>')
    return cv


_BUILDERS = {
    "spectrum": _spectrum,
    "map": _map,
    "histogram": _histogram,
    "variogram": _variogram,
    "trajectory": _trajectory,
}


def render_plot(data: Mapping[str, Any], kind: str, provenance: str = "", title: str = "") -> str:
    if kind not in _BUILDERS:
        raise InvalidValue(f"unknown plot kind {kind!r}; choose from {', '.join(KINDS)}")
    if not data:
        raise InvalidValue("plot data is empty")
    return _BUILDERS[kind](data, title).svg(provenance)


def emit_plot(data: Mapping[str, Any], kind: str, path: str | Path, provenance: str = "", title: str = "") -> None:
    """Write a standalone SVG of ``kind`` to ``path``."""
    svg = render_plot(data, kind, provenance, title)
    try:
        Path(path).write_bytes(svg.encode("utf-8"))
    except OSError as e:
        raise IoFailure(f"cannot write plot {path}: {e}") from None
