"""Inverse Monte Carlo round trip over many seeds.

Forward-generates wavelengths from t ~ N(0.129, 0.012) um through the default
calibration, inverts them, and reports how often the mean lands within
2 sigma_t / sqrt(n) of 0.129 um and how much sigma_t is inflated.
"""

import argparse
import math

import numpy as np

from qmc_metrology.core import GaussianSpec
from qmc_metrology.montecarlo import InverseMcInputs, forward_wavelengths, run_inverse_mc, stratified_normal
from qmc_metrology.surrogate import load_default_model


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=100, help="number of forward/inverse seed pairs")
    ap.add_argument("--n-mc", type=int, default=10_000)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)

    model = load_default_model()
    W, r = GaussianSpec(0.330, 0.004), GaussianSpec(0.045, 0.004)
    t_true = stratified_normal(0.129, 0.012, args.n_mc)
    hits, inflation = 0, []
    for s in range(args.seeds):
        lam = forward_wavelengths(model, t_true, W, r, seed=1000 + s, n_threads=args.threads)
        d = run_inverse_mc(model, InverseMcInputs(W, r, lam, args.n_mc, s), args.threads)
        hits += abs(d.t_bar_um - 0.129) < 2 * d.sigma_t_um / math.sqrt(d.n_mc)
        inflation.append(d.sigma_t_um / 0.012 - 1)
    inflation = np.array(inflation)
    print(f"seeds            {args.seeds}")
    print(f"mean within tol  {hits}/{args.seeds} ({100 * hits / args.seeds:.1f}%)")
    print(f"sigma inflation  mean {100 * inflation.mean():+.2f}%  max {100 * inflation.max():+.2f}%")


if __name__ == "__main__":
    main()
