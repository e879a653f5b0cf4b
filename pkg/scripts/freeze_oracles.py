"""Recompute the closed-form oracle values and write tests/data/oracle_values.json."""

import argparse
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import mpmath as mp  # noqa: E402

import oracles  # noqa: E402

EQ1_CASES = [
    (0.30, 0.30, 100.0, 43.0, 45.0, 0.0),
    (0.30, 0.30, 200.0, 86.0, 45.0, 0.0),
    (0.28, 0.33, 2.0, 1.0, 45.0, 0.0),
    (0.28, 0.33, 99.0, 51.4, 45.0, 0.0),
    (0.28, 0.33, 99.0, 51.4, 45.0, 5.0),
    (0.28, 0.33, 80.0, 50.0, 30.0, -3.0),
    (0.30, 0.35, 120.0, 70.0, 60.0, 10.0),
    (0.25, 0.30, 60.0, 40.0, 52.0, 1.5),
]


def compute() -> dict:
    n = lambda x: float(mp.nstr(x, 20))
    grad = oracles.standin_gradient_mp()
    return {
        "sellmeier": {
            "n_0p620": n(oracles.sellmeier_mp("0.620")),
            "n_1p000": n(oracles.sellmeier_mp("1.000")),
            "limit": n(oracles.sellmeier_limit_mp()),
        },
        "eq1": [
            {"args": list(c), "t_um": n(oracles.thickness_mp(*(str(v) for v in c)))} for c in EQ1_CASES
        ],
        "standin_gradient_nm_per_um": {"cW": n(grad[0]), "cr": n(grad[1]), "ct": n(grad[2])},
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "tests" / "data" / "oracle_values.json")
    ap.add_argument("--check", action="store_true", help="compare with the frozen file instead of writing")
    args = ap.parse_args(argv)
    values = compute()
    text = json.dumps(values, indent=2) + "\n"
    if args.check:
        same = args.out.read_text() == text
        print("frozen values match" if same else "frozen values differ")
        return 0 if same else 1
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
