"""Command-line entry point.

Subcommands: ``analyze``, ``elevator``, ``escalator profile``,
``escalator optimize`` and ``widths-sweep``. Interfaces use µm, V, MHz and
meV; everything inside the library is SI. Floats are written with 9
significant digits so identical runs give byte-identical files.

Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import MEV, UM
from .errors import ConfigError, NumericalError, ValidationError
from .escalator import (OptimizerConfig, PathProfile, optimize_connector, trace_path,
                        width_sweep)
from .elevator import height_span, stable_run, sweep
from .geometry import EscalatorSpec, TrapLayout, build_escalator
from .pseudo import DriveParams, IonSpecies, characterize

log = logging.getLogger("trapforge")

SCHEMA_VERSION = 1
SIG_DIGITS = 9
IONS = {"Yb171+": IonSpecies.yb171}


# --- formatting and file output ----------------------------------------------

def fmt(x) -> str:
    return f"{float(x):.{SIG_DIGITS}g}"


def _clean(obj):
    """Round floats to 9 significant digits; NaN and inf become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj)) if math.isfinite(obj) else None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_atomic(path, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, out) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def profile_csv(profile: PathProfile) -> str:
    cols = profile.table()
    return csv_text(list(cols), zip(*cols.values()))


# --- input files --------------------------------------------------------------

def _read_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: JSON parse error at line {exc.lineno}, "
                              f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: top level must be a JSON object")
    return doc


def _check_schema(doc: dict, path) -> None:
    v = doc.get("schema_version", SCHEMA_VERSION)
    if v != SCHEMA_VERSION:
        raise ValidationError(f"{path}: unsupported schema_version {v!r}")


def load_layout(path) -> TrapLayout:
    """Layout JSON (``electrodes`` with ``id``, ``vertices_um``, ``rf_fraction``)."""
    doc = _read_json(path)
    _check_schema(doc, path)
    try:
        return TrapLayout.from_dict(doc)
    except ValidationError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def load_spec(path) -> EscalatorSpec:
    doc = _read_json(path)
    _check_schema(doc, path)
    return EscalatorSpec.from_dict(doc)


_OPT_KEYS = {"path_step_um": ("path_step", UM), "l_um": ("l", UM),
             "simplex_scale_um": ("simplex_scale", UM), "tol": ("tol", 1),
             "max_evals": ("max_evals", None), "seed": ("seed", None),
             "field_method": ("field_method", None), "slab_um": ("slab", UM),
             "stage2_start": ("stage2_start", None), "width_scale_um": ("width_scale", UM),
             "width_max_evals": ("width_max_evals", None),
             "target_height_ratio": ("target_height_ratio", 1)}


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs besides the geometry."""

    species: IonSpecies = field(default_factory=IonSpecies.yb171)
    drive: DriveParams = field(default_factory=lambda: DriveParams.from_frequency(100.0, 20e6))
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    sigma: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    output_dir: str = "."

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {"schema_version", "ion", "drive", "optimizer", "sigma", "output_dir"}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if doc.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {doc.get('schema_version')!r}")
        kw = {}
        ion = doc.get("ion")
        if isinstance(ion, str):
            if ion not in IONS:
                raise ConfigError(f"unknown ion label {ion!r}; known: {sorted(IONS)}")
            kw["species"] = IONS[ion]()
        elif isinstance(ion, dict):
            if set(ion) - {"mass_u", "charge_e", "label"} or "mass_u" not in ion:
                raise ConfigError("ion object needs mass_u and may have charge_e, label")
            kw["species"] = IonSpecies.from_units(float(ion["mass_u"]),
                                                  float(ion.get("charge_e", 1.0)),
                                                  str(ion.get("label", "")))
        elif ion is not None:
            raise ConfigError("ion must be a label or an object")
        if "drive" in doc:
            d = doc["drive"]
            if not isinstance(d, dict) or set(d) - {"V_rf", "f_rf_MHz"}:
                raise ConfigError("drive must be an object with V_rf and f_rf_MHz")
            kw["drive"] = DriveParams.from_frequency(float(d.get("V_rf", 100.0)),
                                                     float(d.get("f_rf_MHz", 20.0)) * 1e6)
        if "optimizer" in doc:
            o = doc["optimizer"]
            if not isinstance(o, dict):
                raise ConfigError("optimizer must be an object")
            bad = set(o) - set(_OPT_KEYS)
            if bad:
                raise ConfigError(f"unknown optimizer keys: {sorted(bad)}")
            opt = {}
            for k, v in o.items():
                name, unit = _OPT_KEYS[k]
                opt[name] = v if unit is None else float(v) * unit
            kw["optimizer"] = OptimizerConfig(**opt)
        if "sigma" in doc:
            s = doc["sigma"]
            if not isinstance(s, list) or len(s) != 4:
                raise ConfigError("sigma must be a list of four numbers")
            kw["sigma"] = tuple(float(v) for v in s)
        if "output_dir" in doc:
            kw["output_dir"] = str(doc["output_dir"])
        return cls(**kw)


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        return RunConfig.from_dict(_read_json(path))
    except ValidationError as exc:
        raise type(exc)(f"{path}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad value ({exc})") from exc


# --- subcommands ---------------------------------------------------------------

def cmd_analyze(args, cfg: RunConfig) -> None:
    layout = load_layout(args.layout)
    tc = characterize(layout, cfg.species, cfg.drive, args.z_um * UM, method=args.method)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "z_um": args.z_um,
        "null_x_um": tc.null_position[0] / UM,
        "height_um": tc.height / UM,
        "secular_frequencies_MHz": [w / (2e6 * np.pi) for w in tc.secular_frequencies],
        "principal_axes": np.asarray(tc.principal_axes).T.tolist(),  # one row per axis
        "mathieu_q": list(tc.mathieu_q),
        "depth_meV": tc.depth / MEV,
        "stable": tc.stable,
    }
    emit(dumps_json(doc), args.out)


def cmd_elevator(args, cfg: RunConfig) -> None:
    rows = sweep(args.mode, args.a_um * UM, (args.alpha_min, args.alpha_max), args.step,
                 cfg.species, cfg.drive,
                 None if args.b_um is None else args.b_um * UM,
                 None if args.c_um is None else args.c_um * UM)
    header = ["alpha", "height_um", "depth_meV", "q_max", "omega_sec_MHz", "stable", "status"]
    table = [[r.alpha, r.height / UM, r.depth / MEV, r.q_max, r.omega_sec / (2e6 * np.pi),
              int(r.stable), "ok" if r.ok else r.error.replace("\n", " ")] for r in rows]
    emit(csv_text(header, table), args.out)
    run = stable_run(rows)
    if run:
        lo, hi = height_span(run)
        log.warning("stable run: alpha %s..%s, height %s..%s um", fmt(run[0].alpha),
                    fmt(run[-1].alpha), fmt(lo / UM), fmt(hi / UM))
    else:
        log.warning("no stable run around alpha = 0")


def _offsets_from(path, spec: EscalatorSpec):
    if path is None:
        return spec.zero_offsets()
    doc = _read_json(path)
    block = doc.get("offsets_um", doc)
    if "dx_um" not in block:
        raise ValidationError(f"{path}: needs dx_um (or an offsets_um object containing it)")
    return spec.zero_offsets().with_offsets(np.asarray(block["dx_um"], float) * UM)


def cmd_escalator_profile(args, cfg: RunConfig) -> None:
    spec = load_spec(args.spec)
    layout = build_escalator(spec, _offsets_from(args.offsets, spec))
    o = cfg.optimizer
    prof = trace_path(layout, cfg.species, cfg.drive, o.l, o.path_step,
                      method=o.field_method, slab=o.slab)
    emit(profile_csv(prof), args.out)


def cmd_escalator_optimize(args, cfg: RunConfig) -> None:
    spec = load_spec(args.spec)
    out = Path(args.out_dir or cfg.output_dir)
    rep = optimize_connector(spec, cfg.species, cfg.drive, cfg.sigma, cfg.optimizer)
    doc = {"schema_version": SCHEMA_VERSION, **rep.to_dict()}
    write_atomic(out / "report.json", dumps_json(doc))
    write_atomic(out / "profile_baseline.csv", profile_csv(rep.baseline_profile))
    write_atomic(out / "profile_final.csv", profile_csv(rep.final_profile))
    if rep.flagged_stages:
        log.warning("stages without improvement: %s", ", ".join(rep.flagged_stages))
    log.warning("F2 reduction %sx", fmt(rep.reduction("F2")))


def cmd_widths_sweep(args, cfg: RunConfig) -> None:
    spec = load_spec(args.spec)
    rows = width_sweep(spec, [d * UM for d in args.d_um], cfg.species, cfg.drive, cfg.optimizer)
    header = ["D_um", "a2_um", "b2_um", "F1_meV_um", "F1_start_meV_um", "height_um",
              "depth_meV", "omega_sec_MHz", "nfev", "status"]
    table = [[r.D / UM, r.a2_opt / UM, r.b2_opt / UM, r.F1_opt / (MEV * UM),
              r.F1_start / (MEV * UM), r.height / UM, r.depth / MEV,
              r.omega_sec / (2e6 * np.pi), r.nfev, "ok" if r.ok else r.error] for r in rows]
    emit(csv_text(header, table), args.out)


# --- argument parsing ------------------------------------------------------------

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="trapforge", description="Planar RF trap analysis and escalator design.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="characterize the trap of a layout file at one z")
    a.add_argument("--layout", required=True)
    a.add_argument("--z-um", type=float, default=0.0)
    a.add_argument("--method", default="auto", choices=["auto", "slab", "edge", "strip2d"])
    a.add_argument("--config")
    a.add_argument("--out", help="output JSON (default stdout)")
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("elevator", help="sweep the extra RF fraction alpha")
    e.add_argument("--mode", required=True,
                   choices=["central", "whole-central", "segmented", "three-equal-segments"])
    e.add_argument("--a-um", type=float, required=True)
    e.add_argument("--b-um", type=float)
    e.add_argument("--c-um", type=float)
    e.add_argument("--alpha-min", type=float, required=True)
    e.add_argument("--alpha-max", type=float, required=True)
    e.add_argument("--step", type=float, default=0.02)
    e.add_argument("--config")
    e.add_argument("--out", help="output CSV (default stdout)")
    e.set_defaults(func=cmd_elevator)

    s = sub.add_parser("escalator", help="escalator path tracing and optimization")
    ssub = s.add_subparsers(dest="action", required=True, parser_class=_Parser)
    sp = ssub.add_parser("profile", help="trace the ion path of an escalator")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--offsets", help="JSON with dx_um, e.g. an optimization report")
    sp.add_argument("--config")
    sp.add_argument("--out", help="output CSV (default stdout)")
    sp.set_defaults(func=cmd_escalator_profile)
    so = ssub.add_parser("optimize", help="two-stage optimization of the control points")
    so.add_argument("--spec", required=True)
    so.add_argument("--config")
    so.add_argument("--out-dir", help="directory for report.json and profile CSVs")
    so.set_defaults(func=cmd_escalator_optimize)

    w = sub.add_parser("widths-sweep", help="optimize second-trap widths per transition length")
    w.add_argument("--spec", required=True, help="escalator spec; a2/b2 are ignored")
    w.add_argument("--d-um", type=float, nargs="+", default=[100, 200, 300, 400, 500])
    w.add_argument("--config")
    w.add_argument("--out", help="output CSV (default stdout)")
    w.set_defaults(func=cmd_widths_sweep)
    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
