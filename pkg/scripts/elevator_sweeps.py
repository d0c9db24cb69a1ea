"""Both elevator variants for a = b = c = 100 um: CSV tables plus a summary.

    python3 scripts/elevator_sweeps.py [--out-dir out/elevator]
"""

import argparse
from pathlib import Path

import numpy as np

from trapforge.cli import csv_text, write_atomic
from trapforge.constants import MEV, UM
from trapforge.elevator import depth_mismatch, height_span, span_over_alpha, stable_run, sweep

HEADER = ["alpha", "height_um", "depth_meV", "q_max", "omega_sec_MHz", "stable", "status"]


def table(rows):
    return [[r.alpha, r.height / UM, r.depth / MEV, r.q_max, r.omega_sec / (2e6 * np.pi),
             int(r.stable), "ok" if r.ok else r.error] for r in rows]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/elevator")
    ap.add_argument("--step", type=float, default=0.02)
    args = ap.parse_args()
    out = Path(args.out_dir)
    runs = {}
    for mode in ("whole-central", "segmented"):
        rows = sweep(mode, 100 * UM, (-1.9, 0.6), args.step)
        write_atomic(out / f"{mode}.csv", csv_text(HEADER, table(rows)))
        runs[mode] = rows
        st = stable_run(rows)
        lo, hi = height_span(st)
        print(f"{mode:14s} stable alpha {st[0].alpha:+.2f}..{st[-1].alpha:+.2f}  "
              f"height {lo / UM:.2f}..{hi / UM:.2f} um")
    w, s = stable_run(runs["whole-central"]), stable_run(runs["segmented"])
    ratio = span_over_alpha(runs["segmented"], w[0].alpha, w[-1].alpha) / \
        span_over_alpha(runs["whole-central"], w[0].alpha, w[-1].alpha)
    mis, (h0, h1) = depth_mismatch(w, s)
    print(f"segmented / whole-central height span over the same alpha swing: {ratio:.3f}")
    print(f"largest depth difference at equal height: {100 * mis:.1f} % ({h0 / UM:.1f}..{h1 / UM:.1f} um)")


if __name__ == "__main__":
    main()
