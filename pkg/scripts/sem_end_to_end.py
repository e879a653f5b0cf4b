"""Render top and tilted SEM views, extract geometry, reconstruct thickness."""

import argparse
import json

from qmc_metrology.sem import (
    ProjectionNoise,
    detect_holes,
    detect_ridges_tilted,
    estimate_beam_axis,
    measure_widths,
    thickness_with_uncertainty,
)
from qmc_metrology.sem.render import BeamGeometry, render_tilted_view, render_top_view


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ratios", type=float, nargs="+", default=[0.3, 0.4, 0.5, 0.6],
                    help="thickness over top width")
    ap.add_argument("--psi", type=float, default=0.0, help="in-plane beam angle of the tilted view [deg]")
    ap.add_argument("--n-mc", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    top = render_top_view()
    axis = estimate_beam_axis(top)
    widths = measure_widths(top, axis)
    holes = detect_holes(top, axis, midline_offset_px=widths.midline_px)
    print(json.dumps({"W_top_nm": widths.W_top_nm, "W_bottom_nm": widths.W_bottom_nm,
                      "n_holes": len(holes), "mean_r_nm": holes.mean_r_nm}, indent=2))
    print(f"{'t_true':>8} {'t_est':>8} {'sigma':>7} {'err%':>6} {'ratio':>7}")
    for ratio in args.ratios:
        geom = BeamGeometry(thickness_nm=280.0 * ratio)
        ridges = detect_ridges_tilted(render_tilted_view(geom, psi_deg=args.psi))
        est = thickness_with_uncertainty(widths, ridges, 45.0, ProjectionNoise.from_measurements(widths, 0.3),
                                         args.n_mc, args.seed)
        t_nm = est.t_um * 1000
        print(f"{geom.thickness_nm:8.1f} {t_nm:8.2f} {est.sigma_t_um * 1000:7.2f} "
              f"{100 * (t_nm / geom.thickness_nm - 1):+6.2f} {ridges.ratio:7.4f}")


if __name__ == "__main__":
    main()
