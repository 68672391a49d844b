#!/usr/bin/env python3
"""Reproduce the headline scaling laws at desk scale.

Runs the delta sweeps behind the acceptance suite and prints fitted
exponents next to their predicted values:

  3D (dielectric, near-resonance):
    |C|        ~ delta^(1-h)            |w|          ~ delta^(-1/2-h)
    |B_k|      ~ delta^(1-h-t)          |u^s - u^{s,N}| ~ delta^((1-h)+(N+1)(1-t-h))
    increments ~ delta^((1-h)+N(1-t-h))
  2D (h = 1, t = 0):
    |u^s - u^{s,inf}| ~ delta           increments ~ |log delta|^((h-1)-N(1-t-h))

Writes sweep CSVs and slope-fit JSONs under --out (default out/). The
reference solves dominate the runtime (~2 min; --quick drops to coarser
grids for a fast smoke run).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from resoscat.cli import main as cli_main  # noqa: E402

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(argv):
    print("+ resoscat " + " ".join(argv))
    rc = cli_main(argv)
    if rc != 0:
        raise SystemExit(rc)


def show_fits(out_dir: Path, expected: dict):
    fits = json.loads((out_dir / "slope_fits.json").read_text())["fits"]
    for name, want in expected.items():
        fit = fits.get(name, {})
        got = fit.get("slope")
        if got is None:
            print(f"  {name:16s} -> no fit ({fit.get('error', 'missing')})")
        else:
            print(f"  {name:16s} -> fitted {got:+.3f}   predicted {want:+.3f}   r2={fit.get('r2', 0):.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out", help="output directory root")
    ap.add_argument("--resolution", type=int, default=12)
    ap.add_argument("--quick", action="store_true", help="coarser grids, no oracle in 3D ladder")
    args = ap.parse_args()
    out = Path(args.out)

    h, t = 0.6, 0.2
    deltas3d = "0.06,0.04,0.027,0.018" if not args.quick else "0.08,0.06,0.045,0.034"
    print(f"== 3D triplet sweep: h={h}, t={t}, deltas={deltas3d}")
    run(
        [
            "sweep", "--config", str(CONFIGS / "ball3d_triplet.json"),
            "--out", str(out / "sweep3d"), "--resolution", str(args.resolution),
            "--deltas", deltas3d, "--h", str(h), "--t", str(t),
            "--n-list", "0,1,2", "--eval-radius", "1.5",
        ]
    )
    show_fits(
        out / "sweep3d",
        {
            "C_abs": 1 - h,
            "norm_w": -0.5 - h,
            "norm_Bk": 1 - h - t,
            "err_direct": min(2 - h, 3 - 2 * h - 2 * t),
            "increment_N1": (1 - h) + 1 * (1 - t - h),
            "increment_N2": (1 - h) + 2 * (1 - t - h),
            "err_born_N1": (1 - h) + 2 * (1 - t - h),
            "err_born_N2": (1 - h) + 3 * (1 - t - h),
        },
    )

    ms = (3, 4, 5, 6)
    deltas2d = ",".join(f"{np.exp(-m):.12e}" for m in ms)
    print(f"== 2D pair sweep: h=1, t=0, delta=e^-m for m in {ms}")
    run(
        [
            "sweep", "--config", str(CONFIGS / "disc2d_pair.json"),
            "--out", str(out / "sweep2d"), "--resolution", "16",
            "--deltas", deltas2d, "--h", "1.0", "--t", "0.0",
            "--n-list", "0,1", "--eval-radius", "6.0",
        ]
    )
    # at h=1 the coefficient C ~ |log delta|^0 is flat in delta and
    # |w| ~ delta^-1 |log delta|^(h-1) = delta^-1
    show_fits(out / "sweep2d", {"err_direct": 1.0, "norm_w": -1.0, "C_abs": 0.0})

    print("== resonance calculators")
    run(["resonances", "--config", str(CONFIGS / "minnaert_sphere.json"), "--out", str(out / "minnaert")])
    run(["resonances", "--config", str(CONFIGS / "plasmonic_drude.json"), "--out", str(out / "plasmonic")])
    run(
        [
            "resonances", "--config", str(CONFIGS / "ball3d_single.json"),
            "--out", str(out / "dielectric"), "--resolution", str(args.resolution),
        ]
    )
    for name in ("minnaert", "plasmonic", "dielectric"):
        doc = json.loads((out / name / "resonances.json").read_text())
        doc.pop("schema_version", None)
        print(f"  {name}: {doc}")


if __name__ == "__main__":
    main()
