"""Second-trap widths and F1 versus transition half-length D.

    python3 scripts/width_sweep.py [--d-um 100 200 300 400 500] [--out out/width_sweep.csv]
"""

import argparse

from trapforge.cli import csv_text, write_atomic
from trapforge.constants import MEV, UM
from trapforge.escalator import width_sweep
from trapforge.geometry import EscalatorSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d-um", type=float, nargs="+", default=[100, 200, 300, 400, 500])
    ap.add_argument("--out", default="out/width_sweep.csv")
    args = ap.parse_args()
    template = EscalatorSpec(80 * UM, 65 * UM, 155 * UM, 139 * UM, 300 * UM)
    rows = width_sweep(template, [d * UM for d in args.d_um])
    header = ["D_um", "a2_um", "b2_um", "F1_meV_um", "height_um", "depth_meV", "status"]
    tab = [[r.D / UM, r.a2_opt / UM, r.b2_opt / UM, r.F1_opt / (MEV * UM), r.height / UM,
            r.depth / MEV, "ok" if r.ok else r.error] for r in rows]
    write_atomic(args.out, csv_text(header, tab))
    for r in tab:
        print("  ".join(f"{v:10.4g}" if isinstance(v, float) else str(v) for v in r))


if __name__ == "__main__":
    main()
