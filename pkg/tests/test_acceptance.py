"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are collected in ``conftest.ACCEPTANCE_LINES`` and shown in the
terminal summary. Tolerances are the stated ones; nothing is loosened here.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from trapforge.cli import run_command
from trapforge.constants import MEV
from trapforge.elevator import (depth_mismatch, height_closed_form, height_numeric, height_span,
                                span_over_alpha, stable_run, sweep)
from trapforge.escalator import (OptimizerConfig, PathProfile, objectives, optimize_connector,
                                 width_sweep)
from trapforge.field import SourceModel, strip_field_2d
from trapforge.geometry import (EscalatorSpec, FiveWireSpec, Segmentation, build_escalator,
                                build_five_wire)
from trapforge.neldermead import nelder_mead
from trapforge.pseudo import characterize, pseudopotential_at

UM = 1e-6
WC, SEG = Segmentation.WHOLE_CENTRAL, Segmentation.THREE_EQUAL_SEGMENTS
FIRST_TRAP = (80 * UM, 65 * UM)
ESCALATOR = EscalatorSpec(80 * UM, 65 * UM, 155 * UM, 139 * UM, 300 * UM)


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n} [PRIMARY]: {'PASS' if ok else 'FAIL'}; {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def within(value, target, rel):
    return abs(value - target) <= rel * abs(target)


def test_criterion_1_five_wire_height(drive):
    t0 = time.perf_counter()
    a = 100 * UM
    h_cf = height_closed_form(a, 0.0)
    h_num = height_numeric(FiveWireSpec(a, a, a, WC, 0.0), drive)
    dt = time.perf_counter() - t0
    ok = abs(h_cf / UM - 86.60) <= 0.05 and abs(h_num / UM - 86.60) <= 0.05 and dt < 1.0
    record(1, ok, f"closed form {h_cf / UM:.4f} um, numerical {h_num / UM:.4f} um "
                  f"(86.60 +/- 0.05); {dt:.2f} s (< 1 s)")
    assert ok


def test_criterion_2_closed_form_oracle(drive):
    t0 = time.perf_counter()
    a = 100 * UM
    alphas = np.linspace(-1.9, 0.6, 22)[1:-1]
    errs = [abs(height_numeric(FiveWireSpec(a, a, a, WC, float(al)), drive) / height_closed_form(a, al) - 1)
            for al in alphas]
    dt = time.perf_counter() - t0
    ok = len(alphas) == 20 and max(errs) <= 1e-3 and dt < 5.0
    record(2, ok, f"20 alpha values, max relative error {max(errs):.2e} (<= 1e-3); {dt:.2f} s (< 5 s)")
    assert ok


@pytest.fixture(scope="module")
def elevator_runs(yb, drive):
    t0 = time.perf_counter()
    whole = sweep("whole-central", 100 * UM, (-1.9, 0.6), 0.02, yb, drive)
    seg = sweep("segmented", 100 * UM, (-1.9, 0.6), 0.02, yb, drive)
    return whole, seg, time.perf_counter() - t0


def test_criterion_3_elevator_ranges(elevator_runs):
    whole, seg, dt = elevator_runs
    run_w, run_s = stable_run(whole), stable_run(seg)
    lo, hi = height_span(run_w)
    a_lo, a_hi = run_w[0].alpha, run_w[-1].alpha
    ratio = span_over_alpha(seg, a_lo, a_hi) / span_over_alpha(whole, a_lo, a_hi)
    mis, (h_lo, h_hi) = depth_mismatch(run_w, run_s)
    parts = {
        "span": within(lo / UM, 60, 0.10) and within(hi / UM, 120, 0.10),
        "ratio": abs(ratio - 0.5) <= 0.1,
        "depth": mis <= 0.10,
        "time": dt < 60,
    }
    ok = all(parts.values())
    record(3, ok,
           f"whole-central stable heights {lo / UM:.2f}..{hi / UM:.2f} um for alpha "
           f"{a_lo:.2f}..{a_hi:.2f} (60/120 +/- 10 %: {'ok' if parts['span'] else 'no'}); "
           f"segmented/whole span ratio {ratio:.3f} (0.5 +/- 0.1: {'ok' if parts['ratio'] else 'no'}); "
           f"depth mismatch {100 * mis:.1f} % over {h_lo / UM:.1f}..{h_hi / UM:.1f} um "
           f"(<= 10 %: {'ok' if parts['depth'] else 'no'}); {dt:.1f} s (< 60 s)")
    assert ok


def test_criterion_4_first_trap(yb, drive):
    t0 = time.perf_counter()
    a, b = FIRST_TRAP
    tc = characterize(build_five_wire(FiveWireSpec(a, b, b, WC, 0.0)), yb, drive)
    dt = time.perf_counter() - t0
    f_mhz = tc.radial_frequency_hz / 1e6
    parts = {"height": within(tc.height / UM, 71, 0.10), "omega": within(f_mhz, 2.4, 0.15),
             "depth": within(tc.depth_meV, 70, 0.15), "time": dt < 10}
    ok = all(parts.values())
    record(4, ok,
           f"height {tc.height / UM:.2f} um (71 +/- 10 %: {'ok' if parts['height'] else 'no'}); "
           f"secular {f_mhz:.3f} MHz (2.4 +/- 15 %: {'ok' if parts['omega'] else 'no'}); "
           f"depth {tc.depth_meV:.1f} meV (70 +/- 15 %: {'ok' if parts['depth'] else 'no'}); "
           f"{dt:.2f} s (< 10 s)")
    assert ok


@pytest.mark.slow
def test_criterion_5_escalator_optimization(yb, drive):
    t0 = time.perf_counter()
    rep = optimize_connector(ESCALATOR, yb, drive, (1, 1, 1, 1), OptimizerConfig())
    dt = time.perf_counter() - t0
    factor = rep.reduction("F2")
    monotone = bool(np.all(np.diff(rep.trace) <= 0))
    bounded = bool(np.all(np.abs(rep.offsets.x_offsets) <= ESCALATOR.deviation_bound))
    ok = factor >= 5 and monotone and bounded
    stretch = "met" if factor >= 10 else "not met"
    record(5, ok,
           f"F2 {rep.baseline.F2 / MEV:.4f} -> {rep.final.F2 / MEV:.4f} meV, reduction {factor:.2f}x "
           f"(>= 5x; 10x stretch {stretch}); best-so-far F0 monotone: {monotone}; "
           f"offsets within bound: {bounded}; {sum(s.nfev for s in rep.stages)} evaluations, {dt:.0f} s")
    assert ok


@pytest.mark.slow
def test_criterion_6_width_sweep(yb, drive):
    t0 = time.perf_counter()
    rows = width_sweep(ESCALATOR, [d * UM for d in (100, 200, 300, 400, 500)], yb, drive)
    dt = time.perf_counter() - t0
    ok_rows = all(r.ok for r in rows)
    f1 = [r.F1_opt for r in rows]
    monotone = ok_rows and all(b <= a for a, b in zip(f1, f1[1:]))
    r300 = next(r for r in rows if abs(r.D - 300 * UM) < 1e-12)
    h_ok = within(r300.height / UM, 141, 0.15)
    d_ok = within(r300.depth / MEV, 22, 0.30)
    ok = monotone and h_ok and d_ok
    f1_txt = ", ".join(f"{v / (MEV * UM):.3f}" for v in f1)
    record(6, ok,
           f"F1_opt over D = 100..500 um: {f1_txt} meV*um (non-increasing: {monotone}); "
           f"D = 300 um: a2 {r300.a2_opt / UM:.1f} um, b2 {r300.b2_opt / UM:.1f} um, "
           f"height {r300.height / UM:.1f} um (141 +/- 15 %: {'ok' if h_ok else 'no'}), "
           f"depth {r300.depth / MEV:.1f} meV (22 +/- 30 %: {'ok' if d_ok else 'no'}); {dt:.0f} s")
    assert ok


def test_criterion_7_property_suites(yb, drive, tmp_path):
    checks = {}
    rng = np.random.default_rng(7)

    # Laplace: traceless hessian, exact for strips and finite-difference for 3D rectangles
    src = SourceModel(rects=np.array([[-30 * UM, 50 * UM, -60 * UM, 20 * UM, 1.0]]))
    pts = np.column_stack([rng.uniform(-100, 100, 20), rng.uniform(10, 200, 20),
                           rng.uniform(-100, 100, 20)]) * UM
    lap3 = max(abs(np.trace(H)) / np.linalg.norm(H) for H in src.hessian(pts))
    lap2 = max(abs(np.trace(strip_field_2d(-40 * UM, 60 * UM, 1.0, p[:2]).hessian))
               / np.linalg.norm(strip_field_2d(-40 * UM, 60 * UM, 1.0, p[:2]).hessian) for p in pts)
    checks["laplace"] = max(lap2, lap3) <= 1e-6

    # analytic field versus finite differences of the potential
    g2 = g3 = 0.0
    for p in pts:
        h = 1e-4 * p[1]
        f2 = lambda x, y: strip_field_2d(-40 * UM, 60 * UM, 1.0, (x, y)).potential
        E2 = strip_field_2d(-40 * UM, 60 * UM, 1.0, p[:2]).field[:2]
        fd2 = -np.array([f2(p[0] + h, p[1]) - f2(p[0] - h, p[1]), f2(p[0], p[1] + h) - f2(p[0], p[1] - h)]) / (2 * h)
        g2 = max(g2, np.linalg.norm(E2 - fd2) / np.linalg.norm(E2))
        E3 = src.field(p)[0]
        fd3 = -np.array([src.potential(p + d)[0] - src.potential(p - d)[0] for d in np.eye(3) * h]) / (2 * h)
        g3 = max(g3, np.linalg.norm(E3 - fd3) / np.linalg.norm(E3))
    checks["gradients"] = g2 <= 1e-6 and g3 <= 1e-4

    # pseudopotential scales with V^2
    lay = build_five_wire(FiveWireSpec(100 * UM, 100 * UM, 100 * UM, WC, 0.0))
    p = (7 * UM, 60 * UM, 0.0)
    r = pseudopotential_at(lay, yb, drive.scaled(3.0), p) / pseudopotential_at(lay, yb, drive, p)
    checks["psi_V2"] = abs(r / 9 - 1) <= 1e-12

    # h(alpha) strictly decreasing on a fine grid
    al = np.linspace(-1.9, 0.6, 200)
    h = [height_closed_form(100 * UM, a) for a in al]
    checks["h_monotone"] = bool(np.all(np.diff(h) < 0))

    # Gaussian bump objectives
    A, w = MEV, 50 * UM
    z = np.linspace(-1e-3, 1e-3, 401)
    psi = A * np.exp(-z ** 2 / (2 * w ** 2))
    f = objectives(PathProfile(z, 0 * z, np.full_like(z, 1e-4), psi, np.gradient(psi, z)))
    expect = [A * w * np.sqrt(2 * np.pi), A, 2 * A, A / (w * np.sqrt(np.e))]
    checks["gaussian"] = all(within(v, e, 5e-3) for v, e in zip(f.as_array(), expect))

    # Nelder-Mead on a quadratic and on Rosenbrock
    q = nelder_mead(lambda x: np.sum((x - 3) ** 2), np.zeros(4), scale=1.0, tol=1e-12)
    ros = nelder_mead(lambda x: 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2, [-1.2, 1.0],
                      scale=0.1, tol=1e-14, max_evals=5000)
    checks["nelder_mead"] = bool(np.all(np.abs(q.x_best - 3) <= 1e-4)) and ros.f_best < 1e-6

    # byte-identical reruns of a CLI command
    outs = []
    for k in range(2):
        out = tmp_path / f"elev{k}.csv"
        run_command(["elevator", "--mode", "segmented", "--a-um", "100", "--alpha-min", "-0.5",
                     "--alpha-max", "0.5", "--step", "0.05", "--out", str(out)])
        outs.append(out.read_bytes())
    checks["determinism"] = outs[0] == outs[1] and len(outs[0]) > 0

    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record(7, ok, f"laplace {max(lap2, lap3):.1e}, gradients 2D {g2:.1e} / 3D {g3:.1e}, "
                  f"psi ratio {r:.12f}, {len(checks)} suites, failed: {failed or 'none'}")
    assert ok
