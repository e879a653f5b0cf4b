"""Cavity maps from hyperspectral raster scans and per-chiplet statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ChipletOutOfRange, InvalidValue
from ..io_formats import HyperspectralCube, ResultTable
from .lineshapes import LorentzianFit, fit_lorentzian
from .peaks import PeakConfig, find_peaks

MERGE_TOL_NM = 0.3


@dataclass(frozen=True)
class ChipletGrid:
    """Chiplet layout over the raster.

    Chiplets tile the raster in ``rows x cols`` blocks of ``chiplet_h_px x
    chiplet_w_px`` starting at ``origin_px = (x0, y0)``. Each chiplet carries
    ``nanobeams`` beams running along x and stacked evenly along y.
    """

    rows: int = 8
    cols: int = 15
    nanobeams: int = 15
    chiplet_w_px: int = 25
    chiplet_h_px: int = 25
    origin_px: tuple[int, int] = (0, 0)

    def __post_init__(self):
        for name in ("rows", "cols", "nanobeams", "chiplet_w_px", "chiplet_h_px"):
            if getattr(self, name) < 1:
                raise InvalidValue(f"{name} must be positive")

    @property
    def n_chiplets(self) -> int:
        return self.rows * self.cols

    def locate(self, x_idx: int, y_idx: int) -> tuple[int, int, int] | None:
        """``(row, col, nanobeam)`` of a raster pixel, or None outside the grid."""
        lx = x_idx - self.origin_px[0]
        ly = y_idx - self.origin_px[1]
        col, row = lx // self.chiplet_w_px, ly // self.chiplet_h_px
        if not (0 <= col < self.cols and 0 <= row < self.rows):
            return None
        beam = (ly - row * self.chiplet_h_px) * self.nanobeams // self.chiplet_h_px
        return int(row), int(col), int(beam)

    def beam_row_px(self, row: int, beam: int) -> int:
        """Raster row at the centre of a nanobeam band."""
        top = self.origin_px[1] + row * self.chiplet_h_px
        return top + int((beam + 0.5) * self.chiplet_h_px / self.nanobeams)

    def check_chiplet(self, chiplet: tuple[int, int]) -> None:
        r, c = chiplet
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise ChipletOutOfRange(f"chiplet {chiplet} outside {self.rows}x{self.cols} grid")


@dataclass(frozen=True)
class CavityRecord:
    x_idx: int
    y_idx: int
    chiplet: tuple[int, int] | None
    nanobeam: int | None
    fit: LorentzianFit
    n_pixels: int = 1


@dataclass
class CavityMap:
    records: list[CavityRecord]
    grid: ChipletGrid
    raster_shape: tuple[int, int] = (0, 0)
    provenance: dict = field(default_factory=dict)


def _fit_window(center: float, fwhm: float, dl: float) -> tuple[float, float]:
    half = max(4.0 * fwhm, 4.0 * dl)
    return center - half, center + half


def _pixel_fits(spectrum, cfg: PeakConfig) -> list[LorentzianFit]:
    dl = float(np.median(np.diff(spectrum.wavelength_nm)))
    fits = []
    for cand in find_peaks(spectrum, cfg):
        try:
            fit = fit_lorentzian(spectrum, _fit_window(cand.center_nm, cand.fwhm_nm, dl), cand)
        except InvalidValue:
            continue
        if fit.converged:
            fits.append(fit)
    return fits


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller root wins so the result does not depend on visit order
            self.parent[max(ra, rb)] = min(ra, rb)


def build_cavity_map(
    cube: HyperspectralCube,
    grid: ChipletGrid,
    cfg: PeakConfig = PeakConfig(),
    merge_tol_nm: float = MERGE_TOL_NM,
) -> CavityMap:
    """Find and fit resonances per pixel, then merge 8-connected duplicates.

    Pixels whose dynamic range is below ``min_prominence`` cannot contain a
    qualifying peak and are skipped without changing the result.
    """
    gx = grid.origin_px[0] + grid.cols * grid.chiplet_w_px
    gy = grid.origin_px[1] + grid.rows * grid.chiplet_h_px
    if grid.origin_px[0] > 0 or grid.origin_px[1] > 0 or gx < cube.nx or gy < cube.ny:
        raise InvalidValue("chiplet grid does not cover the cube raster", grid=str(grid))
    data = cube.data
    span = data.max(axis=2).astype(np.float64) - data.min(axis=2).astype(np.float64)
    ys, xs = np.nonzero(span >= cfg.min_prominence)

    nodes: list[tuple[int, int, LorentzianFit]] = []
    by_pixel: dict[tuple[int, int], list[int]] = {}
    for y, x in zip(ys.tolist(), xs.tolist()):
        for fit in _pixel_fits(cube.spectrum_at(x, y), cfg):
            by_pixel.setdefault((y, x), []).append(len(nodes))
            nodes.append((y, x, fit))

    ds = _DisjointSet(len(nodes))
    for (y, x), ids in by_pixel.items():
        for dy, dx in ((0, 1), (1, -1), (1, 0), (1, 1)):
            other = by_pixel.get((y + dy, x + dx))
            if not other:
                continue
            for i in ids:
                for j in other:
                    if abs(nodes[i][2].center_nm - nodes[j][2].center_nm) < merge_tol_nm:
                        ds.union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(len(nodes)):
        groups.setdefault(ds.find(i), []).append(i)
    records = []
    for root in sorted(groups):
        members = groups[root]
        best = max(members, key=lambda i: (nodes[i][2].amplitude, -i))
        y, x, fit = nodes[best]
        loc = grid.locate(x, y)
        chiplet, beam = (None, None) if loc is None else ((loc[0], loc[1]), loc[2])
        records.append(CavityRecord(x, y, chiplet, beam, fit, len({nodes[i][:2] for i in members})))
    records.sort(key=lambda r: (r.y_idx, r.x_idx, r.fit.center_nm))
    return CavityMap(
        records,
        grid,
        (cube.ny, cube.nx),
        {"n_lambda": cube.n_lambda, "min_prominence": cfg.min_prominence, "merge_tol_nm": merge_tol_nm},
    )


def fill_fraction_of(records, grid: ChipletGrid, chiplet: tuple[int, int]) -> float:
    grid.check_chiplet(chiplet)
    beams = {r.nanobeam for r in records if r.chiplet == tuple(chiplet) and r.nanobeam is not None}
    return len(beams) / grid.nanobeams


SUMMARY_COLUMNS = (
    "chiplet_row",
    "chiplet_col",
    "n_cavities",
    "mean_lambda_nm",
    "std_lambda_nm",
    "mean_q",
    "std_q",
    "fill_fraction",
)


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    mean = math.fsum(values) / len(values)
    if len(values) < 2:
        return mean, None
    var = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)


def summarize_mask(cmap: CavityMap) -> ResultTable:
    """One row per chiplet; chiplets without records get null statistics."""
    grid = cmap.grid
    per: dict[tuple[int, int], list[CavityRecord]] = {}
    for r in cmap.records:
        if r.chiplet is not None:
            per.setdefault(r.chiplet, []).append(r)
    rows = []
    for row in range(grid.rows):
        for col in range(grid.cols):
            recs = per.get((row, col), [])
            ml, sl = _mean_std([r.fit.center_nm for r in recs])
            mq, sq = _mean_std([r.fit.Q for r in recs])
            rows.append(
                {
                    "chiplet_row": row,
                    "chiplet_col": col,
                    "n_cavities": len(recs),
                    "mean_lambda_nm": ml,
                    "std_lambda_nm": sl,
                    "mean_q": mq,
                    "std_q": sq,
                    "fill_fraction": fill_fraction_of(recs, grid, (row, col)),
                }
            )
    kinds = {n: "real" for n in SUMMARY_COLUMNS}
    kinds.update(chiplet_row="integer", chiplet_col="integer", n_cavities="integer")
    return ResultTable.from_rows(rows, SUMMARY_COLUMNS, kinds)


RECORD_COLUMNS = (
    "x_idx",
    "y_idx",
    "chiplet_row",
    "chiplet_col",
    "nanobeam",
    "lambda0_nm",
    "fwhm_nm",
    "amplitude",
    "offset",
    "q",
    "residual_rms",
    "n_pixels",
)


def records_table(cmap: CavityMap) -> ResultTable:
    rows = []
    for r in cmap.records:
        rows.append(
            {
                "x_idx": r.x_idx,
                "y_idx": r.y_idx,
                "chiplet_row": None if r.chiplet is None else r.chiplet[0],
                "chiplet_col": None if r.chiplet is None else r.chiplet[1],
                "nanobeam": r.nanobeam,
                "lambda0_nm": r.fit.center_nm,
                "fwhm_nm": r.fit.fwhm_nm,
                "amplitude": r.fit.amplitude,
                "offset": r.fit.offset,
                "q": r.fit.Q,
                "residual_rms": r.fit.residual_rms,
                "n_pixels": r.n_pixels,
            }
        )
    kinds = {n: "real" for n in RECORD_COLUMNS}
    kinds.update(
        x_idx="integer", y_idx="integer", chiplet_row="integer", chiplet_col="integer",
        nanobeam="integer", n_pixels="integer",
    )
    return ResultTable.from_rows(rows, RECORD_COLUMNS, kinds)


def map_from_records(table: ResultTable, grid: ChipletGrid) -> CavityMap:
    """Rebuild a CavityMap from a records table written by :func:`records_table`."""
    records = []
    for row in table.rows():
        loc = grid.locate(int(row["x_idx"]), int(row["y_idx"]))
        chiplet = None if loc is None else (loc[0], loc[1])
        beam = None if loc is None else loc[2]
        fit = LorentzianFit(
            float(row["lambda0_nm"]), float(row["fwhm_nm"]), float(row["amplitude"]),
            float(row["offset"]), float(row["residual_rms"] or 0.0),
        )
        records.append(CavityRecord(int(row["x_idx"]), int(row["y_idx"]), chiplet, beam, fit,
                                    int(row.get("n_pixels") or 1)))
    return CavityMap(records, grid)
