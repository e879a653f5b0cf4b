import io
import json
import math

import numpy as np
import pytest

from qmc_metrology.cli import COMMANDS, build_parser, run
from qmc_metrology.core import GaussianSpec, Spectrum
from qmc_metrology.io_formats import ResultTable, read_table, write_cube, write_pgm, write_spectrum_csv, write_table
from qmc_metrology.montecarlo import forward_wavelengths, stratified_normal
from qmc_metrology.sem.render import BeamGeometry, render_tilted_view, render_top_view
from qmc_metrology.spectral.cavity_map import ChipletGrid
from qmc_metrology.surrogate import load_default_model
from qmc_metrology.synthetic import (
    gaussian_line_spectrum,
    lorentzian_spectrum,
    planted_chiplet_cube,
    wavelength_axis,
)

GRID_FLAGS = ["--rows", "2", "--cols", "3", "--nanobeams", "5", "--chiplet-w-px", "10", "--chiplet-h-px", "10"]


def qmc(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def make_cli_fixtures(d):
    """Input files for every subcommand; returns the planted cavity list."""
    ax = wavelength_axis(615.0, 640.0, 2501)
    write_spectrum_csv(Spectrum(ax, np.full(ax.size, 2.0)), d / "flat.csv")
    write_spectrum_csv(lorentzian_spectrum(ax, [(626.0, 0.2, 100.0)], offset=2.0), d / "one.csv")
    for i in range(4):
        write_spectrum_csv(lorentzian_spectrum(ax, [(624.0 + 0.5 * i, 0.2, 100.0)], offset=2.0), d / f"f{i}.csv")
    ex = wavelength_axis(630.0, 660.0, 3001)
    write_spectrum_csv(gaussian_line_spectrum(ex, 645.0, 0.3, 10.0, 3.0), d / "off.csv")
    write_spectrum_csv(gaussian_line_spectrum(ex, 645.0, 0.3, 40.0, 3.0), d / "on.csv")

    grid = ChipletGrid(2, 3, 5, 10, 10)
    cube, truth = planted_chiplet_cube(grid, wavelength_axis(600.0, 670.0, 512), seed=3, empty_chiplets=1)
    write_cube(cube, d / "cube.qmc")

    write_pgm(render_top_view(), d / "top.pgm")
    write_pgm(render_tilted_view(BeamGeometry(W_top_nm=300.0, W_bottom_nm=300.0, thickness_nm=129.0)), d / "tilt.pgm")

    m = load_default_model()
    W, r = GaussianSpec(0.330, 0.004), GaussianSpec(0.045, 0.004)
    lam = forward_wavelengths(m, stratified_normal(0.129, 0.012, 10_000), W, r, seed=77)
    write_table(ResultTable({"lambda_nm": [float(v) for v in lam]}), d / "lam.csv")
    job = {"W_um": {"mean": 0.330, "std": 0.004}, "r_um": {"mean": 0.045, "std": 0.004},
           "lambda_nm": {"empirical_csv": "lam.csv"}, "n_mc": 10_000}
    (d / "job.json").write_text(json.dumps(job))

    rng = np.random.default_rng(5)
    x, y = rng.uniform(0, 500, 150), rng.uniform(0, 500, 150)
    z = 620 + 5 * np.sin(x / 80) + 0.01 * y + rng.normal(0, 2, 150)
    write_table(ResultTable({"x_um": list(x), "y_um": list(y), "lambda_nm": list(z)}), d / "points.csv")
    return truth


@pytest.fixture(scope="module")
def fx(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    return d, make_cli_fixtures(d)


# ---------------------------------------------------------------- parser


def test_every_subcommand_help_lists_units():
    root = build_parser()
    subs = root._subparsers._group_actions[0].choices
    assert set(subs) == {"peaks", "map", "summarize", "tune", "enhance", "sem-top", "sem-tilt", "thickness",
                         "calibrate", "invert-mc", "spatial", "variogram", "yield", "report"}
    for name, p in subs.items():
        for act in p._actions:
            if act.dest == "help":
                continue
            assert act.help and act.help.rstrip().endswith("]"), (name, act.dest)
        code, out, _ = qmc(name, "--help")
        assert code == 0 and "[" in out


def test_unknown_command_and_bad_flag():
    code, out, err = qmc("frobnicate")
    assert code == 2 and err.count("\n") == 1 and "UnknownCommand" in err
    code, _, err = qmc("thickness", "--wt", "abc")
    assert code == 2 and err.count("\n") == 1
    code, _, err = qmc("thickness", "--wt", "0.3")
    assert code == 2 and "--wb" in err


def test_analysis_failure_exit_three():
    code, _, err = qmc("thickness", "--wt", "0.3", "--wb", "0.5", "--dt", "100", "--dnb", "10", "--theta", "45")
    assert code == 3 and "InvalidGeometry" in err


# ---------------------------------------------------------------- commands


def test_peaks_flat_spectrum_empty_table(fx, tmp_path):
    d, _ = fx
    code, out, _ = qmc("peaks", "--in", d / "flat.csv", "--min-prominence", "5", "--out", tmp_path / "p.csv")
    assert code == 0 and "n_peaks = 0" in out
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("center_nm")


def test_peaks_single_line_fitted(fx, tmp_path):
    d, _ = fx
    code, _, _ = qmc("peaks", "--in", d / "one.csv", "--out", tmp_path / "p.json", "--plot", tmp_path / "p.svg")
    assert code == 0
    (row,) = read_table(tmp_path / "p.json").rows()
    assert abs(row["fit_lambda0_nm"] - 626.0) < 1e-4 and row["fit_converged"] == 1
    assert (tmp_path / "p.svg").read_text().startswith("<svg")


def test_thickness_worked_example():
    code, out, _ = qmc("thickness", "--wt", "0.30", "--wb", "0.30", "--dt", "100", "--dnb", "43", "--theta", "45", "--psi", "0")
    assert code == 0 and out.strip() == "t_um = 0.129"


def test_thickness_mc_needs_seed_and_prints_it():
    base = ["thickness", "--wt", "0.30", "--wb", "0.30", "--dt", "100", "--dnb", "43", "--theta", "45",
            "--n-mc", "2000", "--sigma-d-px", "0.5"]
    assert qmc(*base)[0] == 2
    code, out, _ = qmc(*base, "--seed", "4")
    assert code == 0 and out.splitlines()[0] == "# seed = 4"
    assert "sigma_t_um" in out


def test_map_summarize_report_chain(fx, tmp_path):
    d, truth = fx
    rec = tmp_path / "rec.csv"
    code, out, _ = qmc("map", "--cube", d / "cube.qmc", "--out", rec, "--plot", tmp_path / "m.svg", *GRID_FLAGS)
    assert code == 0 and out.strip() == f"n_records = {len(truth)}"
    code, out, _ = qmc("summarize", "--records", rec, "--out", tmp_path / "s.csv", *GRID_FLAGS)
    s = json.loads(out)
    assert code == 0 and s["n_records"] == len(truth) and s["n_chiplets"] == 6
    mean = math.fsum(p.center_nm for p in truth) / len(truth)
    assert abs(s["mean_lambda_nm"] - mean) < 0.01
    code, out, _ = qmc("report", "--records", rec, *GRID_FLAGS, "--n", "100", "--p", "0.8", "--r", "2",
                       "--note", "transfer_yield", "80-90%")
    rep = json.loads(out)
    assert code == 0 and rep["chiplets_with_cavities"] == 5
    assert rep["replacement"]["n_good"] == pytest.approx(99.2)
    assert rep["reference_rows"] == [{"name": "transfer_yield", "value": "80-90%"}]


def test_tune_and_enhance(fx, tmp_path):
    d, _ = fx
    frames = [d / f"f{i}.csv" for i in range(4)]
    code, out, _ = qmc("tune", "--frames", *frames, "--seed-window", "623", "625", "--out", tmp_path / "t.csv")
    s = json.loads(out)
    assert code == 0 and s["total_shift_nm"] == pytest.approx(1.5, abs=1e-3) and s["n_present"] == 4
    code, out, _ = qmc("enhance", "--on", d / "on.csv", "--off", d / "off.csv", "--line-nm", "645", "--half-width-nm", "2")
    assert code == 0 and json.loads(out)["enhancement"] == pytest.approx(4.0, abs=0.01)


def test_sem_top_tilt_then_thickness(fx, tmp_path):
    d, _ = fx
    code, out, _ = qmc("sem-top", "--image", d / "top.pgm", "--out", tmp_path / "top.json")
    top = json.loads(out)
    assert code == 0
    assert abs(top["W_top_nm"] - 280) < 4 and abs(top["W_bottom_nm"] - 330) < 4
    assert top["n_holes"] == 16 and abs(top["mean_r_nm"] - 45) < 4
    code, out, _ = qmc("sem-tilt", "--image", d / "tilt.pgm", "--out", tmp_path / "tilt.json")
    tilt = json.loads(out)
    assert code == 0 and tilt["tilt_deg"] == 45.0
    assert abs(tilt["ratio"] - 0.43) / 0.43 < 0.01
    code, out, _ = qmc("thickness", "--wt", "0.30", "--wb", "0.30", "--tilt", tmp_path / "tilt.json")
    assert code == 0 and abs(float(out.split("=")[1]) - 0.129) / 0.129 < 0.05


def test_calibrate_default_matches_package(tmp_path):
    code, _, _ = qmc("calibrate", "--out", tmp_path / "cal.json")
    assert code == 0
    assert json.loads((tmp_path / "cal.json").read_text()) == load_default_model().to_dict()


def test_invert_mc_round_trip(fx, tmp_path):
    d, _ = fx
    code, out, _ = qmc("invert-mc", "--job", d / "job.json", "--seed", "5", "--threads", "2",
                       "--out", tmp_path / "t.csv", "--summary", tmp_path / "s.json")
    assert code == 0
    head, body = out.split("\n", 1)
    assert head == "# seed = 5"
    s = json.loads(body)
    assert s["n_failed"] == 0 and s["lambda_mode"] == "empirical"
    assert abs(s["t_bar_um"] - 0.129) < 2 * s["sigma_t_um"] / math.sqrt(10_000)
    assert abs(s["sigma_t_um"] / 0.012 - 1) < 0.10
    assert len(read_table(tmp_path / "t.csv").columns["t_um"]) == 10_000
    assert qmc("invert-mc", "--job", d / "job.json")[0] == 2


def test_spatial_and_variogram(fx, tmp_path):
    d, _ = fx
    code, out, _ = qmc("spatial", "--in", d / "points.csv", "--k", "30", "--out", tmp_path / "fit.csv")
    s = json.loads(out)
    assert code == 0 and s["n_points"] == 150
    assert s["loess"]["reduction_pct"] > s["quadratic"]["reduction_pct"]
    code, out, _ = qmc("variogram", "--in", d / "points.csv", "--bin-width-um", "25", "--detrend", "loess",
                       "--k", "30", "--plot", tmp_path / "v.svg")
    assert code == 0 and json.loads(out)["detrend"] == "loess"
    assert qmc("variogram", "--in", d / "points.csv", "--bin-width-um", "-1")[0] == 2


def test_yield_numbers():
    code, out, _ = qmc("yield", "--e0", "100", "--eu", "10", "--n", "120", "--p", "0.6", "--r", "3")
    s = json.loads(out)
    assert code == 0 and s["effort"]["E"] == 110 and s["replacement"]["n_good"] == pytest.approx(116.928)
    assert qmc("yield")[0] == 2


def test_config_file_defaults_and_override(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[thickness]\nwt = 0.30\nwb = 0.30\ndt = 100\ndnb = 43\ntheta = 45\n")
    code, out, _ = qmc("thickness", "--config", cfg)
    assert code == 0 and out.strip() == "t_um = 0.129"
    code, out, _ = qmc("thickness", "--config", cfg, "--dnb", "50")
    assert code == 0 and out.strip() == "t_um = 0.15"
    cfg.write_text("[thickness]\nbogus = 1\n")
    assert qmc("thickness", "--config", cfg)[0] == 2


# ---------------------------------------------------------------- determinism


def invocations(d, o):
    return [
        ["peaks", "--in", d / "one.csv", "--out", o / "p.csv", "--plot", o / "p.svg"],
        ["map", "--cube", d / "cube.qmc", "--out", o / "rec.csv", "--plot", o / "m.svg", *GRID_FLAGS],
        ["summarize", "--records", o / "rec.csv", "--out", o / "s.csv", "--plot", o / "h.svg", *GRID_FLAGS],
        ["report", "--records", o / "rec.csv", "--band-nm", "630", "640", "--out", o / "r.json", *GRID_FLAGS],
        ["tune", "--frames", *[d / f"f{i}.csv" for i in range(4)], "--seed-window", "623", "625", "--out", o / "t.csv",
         "--plot", o / "t.svg"],
        ["enhance", "--on", d / "on.csv", "--off", d / "off.csv", "--line-nm", "645", "--half-width-nm", "2"],
        ["sem-top", "--image", d / "top.pgm", "--holes-out", o / "holes.csv", "--plot", o / "r.svg"],
        ["sem-tilt", "--image", d / "tilt.pgm"],
        ["thickness", "--wt", "0.3", "--wb", "0.33", "--dt", "100", "--dnb", "50", "--theta", "45", "--n-mc", "500",
         "--sigma-d-px", "0.5", "--seed", "1", "--out", o / "th.json", "--plot", o / "th.svg"],
        ["calibrate", "--order", "quadratic", "--out", o / "cal.json"],
        ["invert-mc", "--job", d / "job.json", "--seed", "9", "--out", o / "mc.csv", "--plot", o / "mc.svg"],
        ["spatial", "--in", d / "points.csv", "--out", o / "fit.csv"],
        ["variogram", "--in", d / "points.csv", "--bin-width-um", "25", "--overlay-slope-nm-per-um", "0.01",
         "--out", o / "v.csv", "--plot", o / "v.svg"],
        ["yield", "--e0", "100", "--eu", "10", "--b", "4"],
    ]


def test_every_command_is_byte_deterministic(fx, tmp_path):
    d, _ = fx
    mismatched = check_determinism(d, tmp_path)
    assert mismatched == []


def check_determinism(d, o):
    """Run each invocation twice; return the commands whose outputs differ."""
    bad, seen = [], set()
    for argv in invocations(d, o):
        runs = []
        for _ in range(2):
            code, out, err = qmc(*argv)
            assert code == 0, (argv[0], err)
            files = {p.name: p.read_bytes() for p in sorted(o.iterdir())}
            runs.append((out, files))
        if runs[0] != runs[1]:
            bad.append(argv[0])
        seen.add(argv[0])
    assert seen == set(COMMANDS)
    return bad
