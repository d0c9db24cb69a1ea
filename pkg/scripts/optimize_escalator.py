"""Two-stage control-point optimization of the 80/65 -> 155/139 um escalator (D = 300 um).

Takes a few minutes at the default 5 um path step and 5000-evaluation budget.

    python3 scripts/optimize_escalator.py [--stage2-start zero|best-stage1] [--sigma 1 1 1 1]
"""

import argparse
import logging
from pathlib import Path

from trapforge.cli import dumps_json, profile_csv, write_atomic
from trapforge.constants import UM
from trapforge.escalator import OptimizerConfig, optimize_connector
from trapforge.geometry import EscalatorSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/escalator")
    ap.add_argument("--max-evals", type=int, default=5000)
    ap.add_argument("--stage2-start", default="zero", choices=["zero", "best-stage1"])
    ap.add_argument("--sigma", type=float, nargs=4, default=[1, 1, 1, 1])
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    spec = EscalatorSpec(80 * UM, 65 * UM, 155 * UM, 139 * UM, 300 * UM)
    cfg = OptimizerConfig(max_evals=args.max_evals, stage2_start=args.stage2_start)
    rep = optimize_connector(spec, sigma=tuple(args.sigma), config=cfg)
    out = Path(args.out_dir)
    write_atomic(out / "report.json", dumps_json(rep.to_dict()))
    write_atomic(out / "profile_baseline.csv", profile_csv(rep.baseline_profile))
    write_atomic(out / "profile_final.csv", profile_csv(rep.final_profile))
    for name in ("F1", "F2", "F3", "F4"):
        print(f"{name}: reduced {rep.reduction(name):.2f}x")
    if rep.flagged_stages:
        print("stages without improvement:", ", ".join(rep.flagged_stages))


if __name__ == "__main__":
    main()
