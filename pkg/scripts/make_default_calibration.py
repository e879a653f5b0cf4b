"""Regenerate the shipped default surrogate calibration from the analytic stand-in."""

import argparse
from pathlib import Path

from qmc_metrology.surrogate import default_from_standin

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "qmc_metrology" / "data" / "default_calibration.json"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--quadratic", action="store_true", help="include second-order terms")
    args = ap.parse_args(argv)
    model = default_from_standin(quadratic=args.quadratic)
    model.save(args.out)
    print(f"wrote {args.out}: linear = {model.linear}")


if __name__ == "__main__":
    main()
