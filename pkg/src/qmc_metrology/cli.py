"""``qmc`` command-line front end.

Every subcommand reads files and flags, runs one stage of the pipeline and
writes tables (CSV/JSON), summaries (JSON) or SVG plots. Flags may also be
given in a TOML file via ``--config``; a ``[<command>]`` table (or top-level
keys) supplies defaults, and explicit flags override them.

Exit codes: 0 success, 2 invalid input, 3 analysis failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import shlex
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .errors import InputError, InvalidValue, IoFailure, QmcError, UnknownCommand
from .io_formats import (
    ResultTable,
    read_cube,
    read_cube_csv,
    read_gray_image,
    read_spectrum_csv,
    read_table,
    write_table,
)
from .plotting import emit_plot

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise InvalidValue(message.replace("\n", " "))


def _opt(p: argparse.ArgumentParser, flag: str, unit: str, help: str, **kw) -> None:
    """Add an option whose help text carries its unit in brackets."""
    p.add_argument(flag, help=f"{help} [{unit}]", **kw)


# JSON / output helpers ------------------------------------------------------


def _clean(v: Any) -> Any:
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def _dumps(obj: dict) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


class _Ctx:
    """Per-invocation state: parsed args, provenance string and stdout."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str], out):
        self.args = args
        self.argv = list(argv)
        self.out = out
        seed = getattr(args, "seed", None)
        self.provenance = "qmc " + " ".join(shlex.quote(a) for a in self.argv)
        if seed is not None:
            self.provenance += f" | seed={seed}"

    def header(self) -> None:
        seed = getattr(self.args, "seed", None)
        if seed is not None:
            print(f"# seed = {seed}", file=self.out)

    def print(self, text: str) -> None:
        print(text, file=self.out, end="" if text.endswith("\n") else "\n")

    def summary(self, obj: dict, path: str | None = None) -> None:
        text = _dumps(obj)
        if path:
            _write_text(path, text)
        self.print(text)

    def plot(self, data: dict, kind: str, title: str = "") -> None:
        path = getattr(self.args, "plot", None)
        if path:
            emit_plot(data, kind, path, self.provenance, title)


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise InvalidValue(f"missing required option(s): {flags}")


def _positive(name: str, v: float) -> None:
    if not (math.isfinite(v) and v > 0):
        raise InvalidValue(f"--{name} must be > 0, got {v}")


# shared option groups -------------------------------------------------------


def _peak_opts(p):
    _opt(p, "--min-prominence", "counts", "minimum contour prominence", type=float, default=5.0)
    _opt(p, "--fwhm-min-nm", "nm", "smallest accepted linewidth", type=float, default=0.01)
    _opt(p, "--fwhm-max-nm", "nm", "largest accepted linewidth", type=float, default=5.0)
    _opt(p, "--max-peaks", "count", "peaks kept per spectrum", type=int, default=8)


def _peak_cfg(a):
    from .spectral import PeakConfig

    return PeakConfig(a.min_prominence, (a.fwhm_min_nm, a.fwhm_max_nm), a.max_peaks)


def _grid_opts(p):
    _opt(p, "--rows", "count", "chiplet rows", type=int, default=8)
    _opt(p, "--cols", "count", "chiplet columns", type=int, default=15)
    _opt(p, "--nanobeams", "count", "nanobeams per chiplet", type=int, default=15)
    _opt(p, "--chiplet-w-px", "px", "chiplet width in raster pixels", type=int, default=25)
    _opt(p, "--chiplet-h-px", "px", "chiplet height in raster pixels", type=int, default=25)


def _grid(a):
    from .spectral import ChipletGrid

    return ChipletGrid(a.rows, a.cols, a.nanobeams, a.chiplet_w_px, a.chiplet_h_px)


def _points_opts(p):
    _opt(p, "--in", "path", "CSV with x_um, y_um and lambda_nm (or lambda0_nm) columns", dest="input")
    _opt(p, "--target-nm", "nm", "design wavelength subtracted from lambda", type=float, default=620.0)
    _opt(p, "--coords", "choice", "x/y columns: physical (x_um, y_um) or raster index (x_idx, y_idx)",
         choices=("um", "index"), default="um")


def _load_field(a):
    from .spatial import SpatialField

    _require(a, "input")
    t = read_table(a.input)
    xc, yc = ("x_um", "y_um") if a.coords == "um" else ("x_idx", "y_idx")
    lc = "lambda_nm" if "lambda_nm" in t.names else "lambda0_nm"
    for c in (xc, yc, lc):
        if c not in t.names:
            raise InvalidValue(f"{a.input} lacks column {c!r}")
    rows = [r for r in t.rows() if None not in (r[xc], r[yc], r[lc])]
    return SpatialField.from_wavelengths(
        [float(r[xc]) for r in rows], [float(r[yc]) for r in rows], [r[lc] for r in rows], a.target_nm
    )


def _sem_opts(p):
    _opt(p, "--image", "path", "PGM (P5) or 8-bit PNG image")
    _opt(p, "--scale-nm-per-px", "nm/px", "pixel scale (overrides sidecar)", type=float)
    _opt(p, "--denoise-sigma", "px", "Gaussian smoothing before gradients", type=float, default=1.0)
    _opt(p, "--canny-low", "percentile", "low hysteresis threshold", type=float, default=70.0)
    _opt(p, "--canny-high", "percentile", "high hysteresis threshold", type=float, default=90.0)


def _edge_cfg(a):
    from .sem import EdgeConfig

    return EdgeConfig(a.denoise_sigma, a.canny_low, a.canny_high)


# commands -------------------------------------------------------------------


def _cmd_peaks(ctx: _Ctx) -> None:
    from .spectral import find_peaks, fit_lorentzian

    a = ctx.args
    _require(a, "input", "out")
    spec = read_spectrum_csv(a.input)
    cands = find_peaks(spec, _peak_cfg(a))
    dl = float(np.median(np.diff(spec.wavelength_nm)))
    rows = []
    for c in cands:
        row = {"center_nm": c.center_nm, "prominence": c.prominence, "fwhm_nm": c.fwhm_nm,
               "height": c.height, "fit_lambda0_nm": None, "fit_fwhm_nm": None, "fit_q": None,
               "fit_converged": None}
        if a.fit == "lorentzian":
            half = max(4.0 * c.fwhm_nm, 4.0 * dl)
            try:
                f = fit_lorentzian(spec, (c.center_nm - half, c.center_nm + half), c)
                row.update(fit_lambda0_nm=f.center_nm, fit_fwhm_nm=f.fwhm_nm, fit_q=f.Q,
                           fit_converged=int(f.converged))
            except InputError:
                row["fit_converged"] = 0
        rows.append(row)
    names = ("center_nm", "prominence", "fwhm_nm", "height", "fit_lambda0_nm", "fit_fwhm_nm",
             "fit_q", "fit_converged")
    kinds = {n: "real" for n in names}
    kinds["fit_converged"] = "integer"
    write_table(ResultTable.from_rows(rows, names, kinds), a.out)
    ctx.plot({"x": spec.wavelength_nm, "y": spec.intensity, "markers": [c.center_nm for c in cands]},
             "spectrum", f"{len(cands)} peaks")
    ctx.print(f"n_peaks = {len(cands)}")


def _read_any_cube(path: str):
    return read_cube_csv(path) if Path(path).suffix.lower() == ".csv" else read_cube(path)


def _map_plot_data(cmap) -> dict:
    g = cmap.grid
    cells = [(c * g.chiplet_w_px, r * g.chiplet_h_px, (c + 1) * g.chiplet_w_px, (r + 1) * g.chiplet_h_px)
             for r in range(g.rows) for c in range(g.cols)]
    return {"x": [r.x_idx for r in cmap.records], "y": [r.y_idx for r in cmap.records],
            "c": [r.fit.center_nm for r in cmap.records], "cells": cells,
            "xlabel": "x (px)", "ylabel": "y (px)"}


def _cmd_map(ctx: _Ctx) -> None:
    from .spectral import build_cavity_map, records_table

    a = ctx.args
    _require(a, "cube", "out")
    cube = _read_any_cube(a.cube)
    cmap = build_cavity_map(cube, _grid(a), _peak_cfg(a), a.merge_tol_nm)
    write_table(records_table(cmap), a.out)
    if cmap.records:
        ctx.plot(_map_plot_data(cmap), "map", "cavity map")
    ctx.print(f"n_records = {len(cmap.records)}")


def _cmd_summarize(ctx: _Ctx) -> None:
    from .spectral import map_from_records, summarize_mask

    a = ctx.args
    _require(a, "records", "out")
    cmap = map_from_records(read_table(a.records), _grid(a))
    table = summarize_mask(cmap)
    write_table(table, a.out)
    lam = [r.fit.center_nm for r in cmap.records]
    if lam:
        ctx.plot({"values": lam, "bins": a.bins, "xlabel": "lambda0 (nm)"}, "histogram", "resonances")
    mean = math.fsum(lam) / len(lam) if lam else None
    ctx.summary({"n_records": len(lam), "n_chiplets": table.n_rows, "mean_lambda_nm": mean})


def _cmd_tune(ctx: _Ctx) -> None:
    from .spectral import TrackConfig, track_resonance_shift

    a = ctx.args
    _require(a, "frames", "seed_window", "out")
    frames = [read_spectrum_csv(f) for f in a.frames]
    cfg = TrackConfig(_peak_cfg(a), a.search_radius_nm, a.max_gap)
    traj = track_resonance_shift(frames, tuple(a.seed_window), cfg)
    rows = [{"frame": int(i), "center_nm": c, "q": q} for i, c, q in zip(traj.frames, traj.center_nm, traj.q)]
    write_table(ResultTable.from_rows(rows, ("frame", "center_nm", "q"),
                                      {"frame": "integer", "center_nm": "real", "q": "real"}), a.out)
    idx = traj.present
    ctx.plot({"x": [int(traj.frames[i]) for i in idx], "y": [traj.center_nm[i] for i in idx]},
             "trajectory", "tuning trajectory")
    ctx.summary({"n_frames": len(frames), "n_present": len(idx),
                 "total_shift_nm": traj.total_shift_nm, "direction": traj.direction})


def _cmd_enhance(ctx: _Ctx) -> None:
    from .spectral import enhancement_factor

    a = ctx.args
    _require(a, "on", "off", "line_nm", "half_width_nm")
    f = enhancement_factor(read_spectrum_csv(a.on), read_spectrum_csv(a.off), a.line_nm, a.half_width_nm)
    ctx.summary({"line_nm": a.line_nm, "half_width_nm": a.half_width_nm, "enhancement": f}, a.out)


def _cmd_sem_top(ctx: _Ctx) -> None:
    from .sem import HoleConfig, WidthConfig, detect_holes, estimate_beam_axis, measure_widths

    a = ctx.args
    _require(a, "image")
    img = read_gray_image(a.image, a.scale_nm_per_px)
    ecfg = _edge_cfg(a)
    axis = estimate_beam_axis(img, ecfg.denoise_sigma)
    w = measure_widths(img, axis, WidthConfig(sigma=ecfg.denoise_sigma))
    hcfg = HoleConfig((a.r_min_nm, a.r_max_nm), a.max_midline_offset_nm, a.min_spacing_nm)
    holes = detect_holes(img, axis, hcfg, w.midline_px, ecfg)
    if a.holes_out:
        rows = [{"x_px": h.x_px, "y_px": h.y_px, "r_nm": h.r_nm, "votes": h.votes} for h in holes.holes]
        write_table(ResultTable.from_rows(rows, ("x_px", "y_px", "r_nm", "votes"),
                                          {k: "real" for k in ("x_px", "y_px", "r_nm", "votes")}), a.holes_out)
    if len(holes):
        ctx.plot({"values": holes.radii_nm, "bins": 10, "xlabel": "hole radius (nm)"}, "histogram", "hole radii")
    ctx.summary({
        "scale_nm_per_px": img.scale_nm_per_px,
        "axis_deg": axis.angle_deg,
        "coherence": axis.coherence,
        "W_top_nm": w.W_top_nm,
        "W_bottom_nm": w.W_bottom_nm,
        "sigma_top_nm": w.sigma_top_nm,
        "sigma_bottom_nm": w.sigma_bottom_nm,
        "n_holes": len(holes),
        "mean_r_nm": holes.mean_r_nm,
        "std_r_nm": holes.std_r_nm,
    }, a.out)


def _cmd_sem_tilt(ctx: _Ctx) -> None:
    from .sem import detect_ridges_tilted

    a = ctx.args
    _require(a, "image")
    img = read_gray_image(a.image, a.scale_nm_per_px, a.theta)
    r = detect_ridges_tilted(img, edge_cfg=_edge_cfg(a))
    ctx.summary({
        "scale_nm_per_px": img.scale_nm_per_px,
        "tilt_deg": img.tilt_deg,
        "d_T_px": r.d_T,
        "d_NB_px": r.d_NB,
        "ratio": r.ratio,
        "psi_deg": r.psi_deg,
        "psi_spread_deg": r.psi_spread_deg,
    }, a.out)


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InvalidValue(f"{path} is not valid JSON: {exc}") from None


def _cmd_thickness(ctx: _Ctx) -> None:
    from .sem import ProjectionNoise, propagate_thickness, thickness_from_projection

    a = ctx.args
    if a.top:
        top = _load_json(a.top)
        a.wt = a.wt if a.wt is not None else top["W_top_nm"] * 1e-3
        a.wb = a.wb if a.wb is not None else top["W_bottom_nm"] * 1e-3
    if a.tilt:
        tilt = _load_json(a.tilt)
        a.dt = a.dt if a.dt is not None else tilt["d_T_px"]
        a.dnb = a.dnb if a.dnb is not None else tilt["d_NB_px"]
        a.psi = a.psi if a.psi is not None else tilt["psi_deg"]
        if a.theta is None and tilt.get("tilt_deg") is not None:
            a.theta = tilt["tilt_deg"]
    _require(a, "wt", "wb", "dt", "dnb", "theta")
    psi = 0.0 if a.psi is None else a.psi
    if a.n_mc is None:
        t = thickness_from_projection(a.wt, a.wb, a.dt, a.dnb, a.theta, psi)
        ctx.print(f"t_um = {t:.6g}")
        if a.out:
            _write_text(a.out, _dumps({"t_um": t, "W_t_um": a.wt, "W_b_um": a.wb, "d_T": a.dt,
                                       "d_NB": a.dnb, "theta_deg": a.theta, "psi_deg": psi}))
        return
    _require(a, "seed")
    ctx.header()
    noise = ProjectionNoise(a.sigma_wt_um, a.sigma_wb_um, a.sigma_d_px, a.sigma_d_px)
    est = propagate_thickness(a.wt, a.wb, a.dt, a.dnb, a.theta, psi, noise, a.n_mc, a.seed)
    ctx.print(f"t_um = {est.t_um:.6g}")
    ctx.print(f"sigma_t_um = {est.sigma_t_um:.6g}")
    if a.out:
        _write_text(a.out, _dumps(est.summary()))
    if est.sigma_t_um > 0:
        ctx.plot({"values": est.samples, "bins": 40, "xlabel": "t (um)"}, "histogram", "thickness")


def _cmd_calibrate(ctx: _Ctx) -> None:
    from .surrogate import CalibrationSample, default_from_standin, fit_surrogate

    a = ctx.args
    _require(a, "out")
    if a.samples:
        t = read_table(a.samples)
        need = ("W_um", "r_um", "t_um", "lambda_nm")
        for c in need:
            if c not in t.names:
                raise InvalidValue(f"{a.samples} lacks column {c!r}")
        samples = [CalibrationSample(*(float(r[c]) for c in need)) for r in t.rows()]
        model = fit_surrogate(samples, a.order, provenance=f"fit_surrogate({Path(a.samples).name}, {a.order})")
    else:
        model = default_from_standin(quadratic=a.order == "quadratic")
    model.save(a.out)
    ctx.summary(model.to_dict())


def _load_model(path: str | None):
    from .surrogate import SurrogateModel, load_default_model

    return load_default_model() if path is None else SurrogateModel.load(path)


def _cmd_invert_mc(ctx: _Ctx) -> None:
    from .montecarlo import load_job, run_inverse_mc

    a = ctx.args
    _require(a, "job", "seed")
    ctx.header()
    inputs = load_job(a.job, a.seed)
    dist = run_inverse_mc(_load_model(a.model), inputs, a.threads)
    if a.out:
        write_table(ResultTable({"t_um": [float(v) for v in dist.samples]}, {"t_um": "real"}), a.out)
    ctx.plot({"values": dist.samples, "bins": 50, "xlabel": "t (um)"}, "histogram", "inverse Monte Carlo")
    ctx.summary(dist.summary(), a.summary)


def _cmd_spatial(ctx: _Ctx) -> None:
    from .spatial import fit_quadratic_surface, loess_fit, residual_summary

    a = ctx.args
    field = _load_field(a)
    out: dict[str, Any] = {"n_points": field.n, "target_nm": field.target_nm}
    cols: dict[str, list] = {"x_um": field.x_um.tolist(), "y_um": field.y_um.tolist(), "z_nm": field.z_nm.tolist()}
    if a.method in ("quadratic", "both"):
        surf = fit_quadratic_surface(field)
        fq = surf(field.x_um, field.y_um)
        s = residual_summary(field, fq)
        cols["quadratic_nm"] = [float(v) for v in fq]
        out["quadratic"] = {"coefficients": list(surf.coefficients), "std_before_nm": s.std_before,
                            "std_after_nm": s.std_after, "reduction_pct": s.reduction_pct}
    if a.method in ("loess", "both"):
        lf = loess_fit(field, a.k)
        s = residual_summary(field, lf.fitted)
        cols["loess_nm"] = [float(v) for v in lf.fitted]
        out["loess"] = {"k": lf.k, "n_degenerate": int(np.sum(lf.degenerate)), "std_before_nm": s.std_before,
                        "std_after_nm": s.std_after, "reduction_pct": s.reduction_pct}
    if a.out:
        write_table(ResultTable(cols, {k: "real" for k in cols}), a.out)
    ctx.summary(out, a.summary)


def _cmd_variogram(ctx: _Ctx) -> None:
    from .spatial import fit_quadratic_surface, loess_fit, semivariogram

    a = ctx.args
    _require(a, "bin_width_um")
    _positive("bin-width-um", a.bin_width_um)
    field = _load_field(a)
    if a.detrend == "quadratic":
        field = field.with_values(field.z_nm - fit_quadratic_surface(field)(field.x_um, field.y_um))
    elif a.detrend == "loess":
        field = field.with_values(field.z_nm - loess_fit(field, a.k).fitted)
    res = semivariogram(field, a.axis, a.bin_width_um, a.max_lag_um)
    rows = [{"lag_um": b.lag, "gamma_nm2": b.gamma, "n_pairs": b.n_pairs} for b in res.bins]
    if a.out:
        write_table(ResultTable.from_rows(rows, ("lag_um", "gamma_nm2", "n_pairs"),
                                          {"lag_um": "real", "gamma_nm2": "real", "n_pairs": "integer"}), a.out)
    data = {"lags": res.lags, "gammas": res.gammas}
    if a.overlay_slope_nm_per_um is not None:
        data["overlay"] = 0.5 * a.overlay_slope_nm_per_um**2 * res.lags**2
    ctx.plot(data, "variogram", f"semivariogram along {a.axis}")
    ctx.summary({"axis": a.axis, "bin_width_um": a.bin_width_um, "n_bins": len(res.bins),
                 "nugget_nm2": res.nugget, "detrend": a.detrend})


def _yield_numbers(a) -> dict:
    from .yields import EffortParams, ReplacementParams, expected_functional, integration_effort

    out: dict[str, Any] = {}
    if a.e0 is not None or a.eu is not None:
        _require(a, "e0", "eu")
        e = integration_effort(EffortParams(a.e0, a.eu, a.nc, a.b))
        out["effort"] = {"E0": a.e0, "Eu": a.eu, "Nc": a.nc, "B": a.b, "E": e.E, "per_chiplet": e.per_chiplet}
    if a.n is not None or a.p is not None:
        _require(a, "n", "p")
        r = expected_functional(ReplacementParams(a.n, a.p, a.r))
        out["replacement"] = {"N": a.n, "p": a.p, "r": a.r, "n_good": r.n_good,
                              "residual_defect": r.residual_defect}
    return out


def _cmd_yield(ctx: _Ctx) -> None:
    out = _yield_numbers(ctx.args)
    if not out:
        raise InvalidValue("give --e0/--eu for effort and/or --n/--p for replacement yield")
    ctx.summary(out, ctx.args.out)


def _cmd_report(ctx: _Ctx) -> None:
    from .spectral import map_from_records, summarize_mask

    a = ctx.args
    _require(a, "records")
    cmap = map_from_records(read_table(a.records), _grid(a))
    table = summarize_mask(cmap)
    fills = [r["fill_fraction"] for r in table.rows()]
    lam = [r.fit.center_nm for r in cmap.records]
    qs = [r.fit.Q for r in cmap.records]
    populated = sum(1 for r in table.rows() if r["n_cavities"])

    def stats(v):
        if not v:
            return {"n": 0, "mean": None, "std": None}
        m = math.fsum(v) / len(v)
        s = math.sqrt(math.fsum((x - m) ** 2 for x in v) / (len(v) - 1)) if len(v) > 1 else None
        return {"n": len(v), "mean": m, "std": s}

    report = {
        "grid": {"rows": a.rows, "cols": a.cols, "nanobeams": a.nanobeams},
        "chiplets_with_cavities": populated,
        "mean_fill_fraction": math.fsum(fills) / len(fills),
        "lambda0_nm": stats(lam),
        "q": stats(qs),
    }
    if a.band_nm is not None:
        lo, hi = a.band_nm
        good = sum(1 for r in table.rows() if r["mean_lambda_nm"] is not None and lo <= r["mean_lambda_nm"] <= hi)
        report["chiplets_in_band"] = {"band_nm": [lo, hi], "count": good,
                                      "fraction": good / table.n_rows}
    report.update(_yield_numbers(a))
    if a.note:
        # measured stage yields etc. are carried through verbatim, not modelled
        report["reference_rows"] = [{"name": k, "value": v} for k, v in a.note]
    ctx.summary(report, a.out)


# parser ---------------------------------------------------------------------

COMMANDS: dict[str, tuple[str, Callable[[_Ctx], None]]] = {}


def _sub(subs, name: str, help: str, fn: Callable[[_Ctx], None]) -> argparse.ArgumentParser:
    p = subs.add_parser(name, help=help, description=help)
    COMMANDS[name] = (help, fn)
    _opt(p, "--config", "path", "TOML file supplying default flag values")
    return p


def _yield_opts(p):
    _opt(p, "--e0", "effort units", "fixed transfer overhead E0", type=float)
    _opt(p, "--eu", "effort units", "effort per membrane Eu", type=float)
    _opt(p, "--nc", "count", "chiplets per membrane", type=int, default=120)
    _opt(p, "--b", "count", "number of membranes", type=int, default=1)
    _opt(p, "--n", "count", "sites to populate", type=int)
    _opt(p, "--p", "probability", "per-attempt success probability", type=float)
    _opt(p, "--r", "count", "allowed replacements per site", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(
        prog="qmc",
        description=(
            "Metrology and yield analysis for diamond nanophotonic chiplets. "
            "Units: wavelengths in nm, lengths in um unless a flag says nm or px, "
            "angles in degrees."
        ),
    )
    subs = root.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = _sub(subs, "peaks", "find (and fit) resonances in one spectrum", _cmd_peaks)
    _opt(p, "--in", "path", "spectrum CSV (wavelength_nm, intensity)", dest="input")
    _opt(p, "--out", "path", "output peak table (.csv or .json)")
    _opt(p, "--fit", "choice", "lineshape fit per peak", choices=("lorentzian", "none"), default="lorentzian")
    _opt(p, "--plot", "path", "optional SVG spectrum plot")
    _peak_opts(p)

    p = _sub(subs, "map", "per-pixel resonance fits merged into a cavity map", _cmd_map)
    _opt(p, "--cube", "path", "hyperspectral cube (QMCCUBE1 binary or long-format CSV)")
    _opt(p, "--out", "path", "output cavity record table")
    _opt(p, "--merge-tol-nm", "nm", "max wavelength gap for merging neighbours", type=float, default=0.3)
    _opt(p, "--plot", "path", "optional SVG map")
    _grid_opts(p)
    _peak_opts(p)

    p = _sub(subs, "summarize", "per-chiplet statistics from a cavity record table", _cmd_summarize)
    _opt(p, "--records", "path", "cavity record table written by 'map'")
    _opt(p, "--out", "path", "output chiplet summary table")
    _opt(p, "--bins", "count", "histogram bins", type=int, default=30)
    _opt(p, "--plot", "path", "optional SVG histogram of lambda0")
    _grid_opts(p)

    p = _sub(subs, "tune", "track one resonance through a gas-tuning sequence", _cmd_tune)
    _opt(p, "--frames", "path", "ordered spectrum CSVs", nargs="+")
    _opt(p, "--seed-window", "nm", "wavelength window locating the resonance in frame 0",
         nargs=2, type=float, metavar=("LO", "HI"))
    _opt(p, "--search-radius-nm", "nm", "max frame-to-frame jump", type=float, default=1.0)
    _opt(p, "--max-gap", "frames", "consecutive misses before the track is lost", type=int, default=5)
    _opt(p, "--out", "path", "output trajectory table")
    _opt(p, "--plot", "path", "optional SVG trajectory plot")
    _peak_opts(p)

    p = _sub(subs, "enhance", "on/off-resonance line-intensity enhancement", _cmd_enhance)
    _opt(p, "--on", "path", "on-resonance spectrum CSV")
    _opt(p, "--off", "path", "off-resonance spectrum CSV")
    _opt(p, "--line-nm", "nm", "emission line centre", type=float)
    _opt(p, "--half-width-nm", "nm", "integration half width", type=float)
    _opt(p, "--out", "path", "optional JSON summary")

    p = _sub(subs, "sem-top", "widths and holes from a top-view SEM image", _cmd_sem_top)
    _sem_opts(p)
    _opt(p, "--r-min-nm", "nm", "smallest accepted hole radius", type=float, default=30.0)
    _opt(p, "--r-max-nm", "nm", "largest accepted hole radius", type=float, default=60.0)
    _opt(p, "--max-midline-offset-nm", "nm", "max hole distance from beam midline", type=float, default=20.0)
    _opt(p, "--min-spacing-nm", "nm", "min centre spacing between holes", type=float, default=50.0)
    _opt(p, "--holes-out", "path", "optional hole table")
    _opt(p, "--out", "path", "optional JSON geometry summary")
    _opt(p, "--plot", "path", "optional SVG histogram of hole radii")

    p = _sub(subs, "sem-tilt", "ridge separations from a tilted-view SEM image", _cmd_sem_tilt)
    _sem_opts(p)
    _opt(p, "--theta", "deg", "stage tilt (overrides sidecar)", type=float)
    _opt(p, "--out", "path", "optional JSON ridge summary")

    p = _sub(subs, "thickness", "beam thickness from widths and ridge separations", _cmd_thickness)
    _opt(p, "--wt", "um", "top width", type=float)
    _opt(p, "--wb", "um", "bottom width", type=float)
    _opt(p, "--dt", "px", "far-top to near-top ridge separation", type=float)
    _opt(p, "--dnb", "px", "near-top to near-bottom ridge separation", type=float)
    _opt(p, "--theta", "deg", "stage tilt", type=float)
    _opt(p, "--psi", "deg", "apparent in-plane beam angle", type=float)
    _opt(p, "--top", "path", "JSON from 'sem-top' supplying widths")
    _opt(p, "--tilt", "path", "JSON from 'sem-tilt' supplying separations")
    _opt(p, "--n-mc", "count", "Monte Carlo draws for the uncertainty (needs --seed)", type=int)
    _opt(p, "--seed", "integer", "random seed", type=int)
    _opt(p, "--sigma-wt-um", "um", "top width standard deviation", type=float, default=0.0)
    _opt(p, "--sigma-wb-um", "um", "bottom width standard deviation", type=float, default=0.0)
    _opt(p, "--sigma-d-px", "px", "ridge separation standard deviation", type=float, default=0.0)
    _opt(p, "--out", "path", "optional JSON result")
    _opt(p, "--plot", "path", "optional SVG histogram of thickness draws")

    p = _sub(subs, "calibrate", "fit or regenerate the geometry-to-wavelength surrogate", _cmd_calibrate)
    _opt(p, "--samples", "path", "CSV with W_um, r_um, t_um, lambda_nm (omit for the built-in stand-in)")
    _opt(p, "--order", "choice", "surrogate order", choices=("linear", "quadratic"), default="linear")
    _opt(p, "--out", "path", "output calibration JSON")

    p = _sub(subs, "invert-mc", "thickness distribution by inverse Monte Carlo", _cmd_invert_mc)
    _opt(p, "--job", "path", "JSON job (W_um, r_um, lambda_nm, n_mc, bracket_um)")
    _opt(p, "--model", "path", "calibration JSON (default: packaged calibration)")
    _opt(p, "--seed", "integer", "random seed (required)", type=int)
    _opt(p, "--threads", "count", "worker threads (default: QMC_THREADS or all cores)", type=int)
    _opt(p, "--out", "path", "optional CSV of thickness samples")
    _opt(p, "--summary", "path", "optional JSON summary")
    _opt(p, "--plot", "path", "optional SVG histogram")

    p = _sub(subs, "spatial", "quadratic and LOESS background fits of resonance positions", _cmd_spatial)
    _points_opts(p)
    _opt(p, "--method", "choice", "which fits to run", choices=("quadratic", "loess", "both"), default="both")
    _opt(p, "--k", "count", "LOESS neighbourhood size (default 30%% of points)", type=int)
    _opt(p, "--out", "path", "optional CSV of fitted values")
    _opt(p, "--summary", "path", "optional JSON summary")

    p = _sub(subs, "variogram", "per-axis empirical semivariogram", _cmd_variogram)
    _points_opts(p)
    _opt(p, "--axis", "choice", "lag direction", choices=("x", "y"), default="x")
    _opt(p, "--bin-width-um", "um", "lag bin width", type=float)
    _opt(p, "--max-lag-um", "um", "largest lag bin centre", type=float)
    _opt(p, "--detrend", "choice", "background removed first", choices=("none", "quadratic", "loess"), default="none")
    _opt(p, "--k", "count", "LOESS neighbourhood size", type=int)
    _opt(p, "--overlay-slope-nm-per-um", "nm/um", "draw the linear-trend curve m^2 h^2 / 2", type=float)
    _opt(p, "--out", "path", "optional CSV of bins")
    _opt(p, "--plot", "path", "optional SVG plot")

    p = _sub(subs, "yield", "integration effort and replacement yield", _cmd_yield)
    _yield_opts(p)
    _opt(p, "--out", "path", "optional JSON result")

    p = _sub(subs, "report", "chiplet yield report from a cavity record table", _cmd_report)
    _opt(p, "--records", "path", "cavity record table written by 'map'")
    _opt(p, "--band-nm", "nm", "wavelength band counted as on target", nargs=2, type=float, metavar=("LO", "HI"))
    _grid_opts(p)
    _yield_opts(p)
    _opt(p, "--note", "text", "reference row copied into the report (repeatable)", nargs=2,
         action="append", metavar=("NAME", "VALUE"))
    _opt(p, "--out", "path", "optional JSON report")
    return root


def _config_defaults(path: str, command: str, parser: argparse.ArgumentParser) -> dict:
    try:
        with open(path, "rb") as fh:
            conf = tomllib.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InvalidValue(f"config {path} is not valid TOML: {exc}") from None
    section = conf.get(command, conf)
    known = {a.dest: a for a in parser._actions}
    out = {}
    for key, value in section.items():
        if isinstance(value, dict):
            continue
        dest = key.replace("-", "_")
        if dest == "in":
            dest = "input"
        if dest not in known or dest in ("help", "config"):
            raise InvalidValue(f"config key {key!r} is not a flag of '{command}'")
        act = known[dest]
        if act.type is not None and value is not None:
            value = [act.type(v) for v in value] if isinstance(value, list) else act.type(value)
        out[dest] = value
    return out


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        parser = build_parser()
        if not argv:
            parser.print_help(out)
            return 2
        first = argv[0]
        if not first.startswith("-") and first not in COMMANDS:
            raise UnknownCommand(f"unknown command {first!r}; choose from {', '.join(COMMANDS)}")
        # --help goes to the caller's stream, not the process stdout
        with contextlib.redirect_stdout(out):
            args = parser.parse_args(argv)
        if args.command is None:
            raise UnknownCommand("no command given")
        if args.config:
            sub = parser._subparsers._group_actions[0].choices[args.command]
            sub.set_defaults(**_config_defaults(args.config, args.command, sub))
            args = parser.parse_args(argv)
        COMMANDS[args.command][1](_Ctx(args, argv, out))
        return 0
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except QmcError as exc:
        print(f"error: {exc.report.one_line()}", file=err)
        return exc.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
