"""Vertical repositioning of the RF null with an extra RF drive αV_rf.

Two variants on a five-wire base: the whole central electrode driven
("whole-central"), or its two outer thirds driven with the middle third
grounded ("segmented"). Everything here uses the exact 2D strip model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TrapforgeError, ValidationError
from .geometry import FiveWireSpec, Segmentation, build_five_wire, five_wire_height
from .pseudo import DriveParams, IonSpecies, characterize, find_rf_null

log = logging.getLogger(__name__)

ALPHA_MIN, ALPHA_MAX = -2.0, 2.0 / 3.0
MODES = {"whole-central": Segmentation.WHOLE_CENTRAL,
         "central": Segmentation.WHOLE_CENTRAL,
         "segmented": Segmentation.THREE_EQUAL_SEGMENTS,
         "three-equal-segments": Segmentation.THREE_EQUAL_SEGMENTS}


def _mode(mode) -> Segmentation:
    if isinstance(mode, Segmentation):
        return mode
    try:
        return MODES[mode]
    except KeyError:
        raise ValidationError(f"unknown elevator mode {mode!r}; use one of {sorted(MODES)}") from None


def height_closed_form(a: float, alpha: float) -> float:
    """Null height with the whole central electrode driven at αV_rf (a = b = c)."""
    if not a > 0:
        raise ValidationError("a must be > 0")
    if not ALPHA_MIN < alpha < ALPHA_MAX:
        raise DomainError(f"alpha = {alpha} outside the validity window -2 < alpha < 2/3")
    return float(np.sqrt(0.75 * a * a * (2 - 3 * alpha) / (2 + alpha)))


def _bracket(spec: FiveWireSpec):
    w = max(spec.a, spec.b, spec.c)
    return (1e-3 * w, 1e3 * w)


def height_numeric(spec: FiveWireSpec, drive: DriveParams, prefer: float | None = None) -> float:
    """Null height of the built five-wire layout from the numerical null finder.

    With two nulls on the axis (segmented drive at strongly negative α) the
    one nearest ``prefer`` is returned; by default that is the undriven
    five-wire height, i.e. the branch connected to α = 0.
    """
    layout = build_five_wire(spec)
    if prefer is None:
        prefer = five_wire_height(spec.a, 0.5 * (spec.b + spec.c))
    _, y = find_rf_null(layout, drive, 0.0, _bracket(spec), prefer=prefer, method="strip2d")
    return y


@dataclass(frozen=True)
class ElevatorSweepRow:
    alpha: float
    height: float = float("nan")
    depth: float = float("nan")
    q_max: float = float("nan")
    omega_sec: float = float("nan")
    stable: bool = False
    mode: str = "whole-central"
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def alpha_grid(alpha_min: float, alpha_max: float, step: float) -> np.ndarray:
    if not step > 0:
        raise ValidationError("alpha step must be > 0")
    if alpha_max < alpha_min:
        raise ValidationError("alpha_max must be >= alpha_min")
    n = int(np.floor((alpha_max - alpha_min) / step + 1e-9)) + 1
    return np.round(alpha_min + step * np.arange(n), 12)


def sweep(mode, a: float, alpha_range, alpha_step: float = 0.02,
          species: IonSpecies | None = None, drive: DriveParams | None = None,
          b: float | None = None, c: float | None = None) -> list[ElevatorSweepRow]:
    """Characterize the elevator at every α of the grid, ordered by α.

    Heights are followed by continuation outward from the α closest to 0,
    so the tracked null stays on the branch connected to the undriven trap.
    Failed rows carry the error message instead of numbers.
    """
    seg = _mode(mode)
    species = species or IonSpecies.yb171()
    drive = drive or DriveParams.from_frequency(100.0, 20e6)
    b = a if b is None else b
    c = a if c is None else c
    alphas = alpha_grid(alpha_range[0], alpha_range[1], alpha_step)
    label = seg.value
    i0 = int(np.argmin(np.abs(alphas)))
    h_anchor = five_wire_height(a, 0.5 * (b + c))
    rows: dict[int, ElevatorSweepRow] = {}

    def run(indices, prefer):
        for i in indices:
            alpha = float(alphas[i])
            try:
                spec = FiveWireSpec(a, b, c, seg, alpha)
                layout = build_five_wire(spec)
                tc = characterize(layout, species, drive, 0.0, y_bracket=_bracket(spec),
                                  prefer=prefer, method="strip2d")
            except TrapforgeError as exc:
                log.debug("alpha=%g failed: %s", alpha, exc)
                rows[i] = ElevatorSweepRow(alpha, mode=label, error=f"{type(exc).__name__}: {exc}")
                continue
            prefer = tc.height
            w_rad = float(np.mean(tc.secular_frequencies[:2]))
            rows[i] = ElevatorSweepRow(alpha, tc.height, tc.depth, tc.q_max, w_rad,
                                       tc.stable, label)

    run(range(i0, len(alphas)), h_anchor)
    run(range(i0 - 1, -1, -1), rows[i0].height if rows[i0].ok else h_anchor)
    return [rows[i] for i in range(len(alphas))]


# --- summaries of a sweep ----------------------------------------------------

def stable_run(rows: list[ElevatorSweepRow]) -> list[ElevatorSweepRow]:
    """Contiguous stable rows around the α closest to 0.

    Very close to α = 2/3 the whole-central null approaches the surface and
    q dips back under the limit; that disconnected island is excluded.
    """
    if not rows:
        return []
    i0 = int(np.argmin([abs(r.alpha) for r in rows]))
    if not (rows[i0].ok and rows[i0].stable):
        return []
    lo = hi = i0
    while lo > 0 and rows[lo - 1].ok and rows[lo - 1].stable:
        lo -= 1
    while hi < len(rows) - 1 and rows[hi + 1].ok and rows[hi + 1].stable:
        hi += 1
    return rows[lo:hi + 1]


def height_span(rows: list[ElevatorSweepRow]) -> tuple[float, float]:
    h = [r.height for r in rows if r.ok]
    if not h:
        raise ValidationError("no valid rows")
    return min(h), max(h)


def span_over_alpha(rows: list[ElevatorSweepRow], alpha_lo: float, alpha_hi: float) -> float:
    """Height range covered by ``rows`` for α within [alpha_lo, alpha_hi]."""
    sel = [r.height for r in rows if r.ok and alpha_lo - 1e-9 <= r.alpha <= alpha_hi + 1e-9]
    return max(sel) - min(sel)


def depth_mismatch(rows_a: list[ElevatorSweepRow], rows_b: list[ElevatorSweepRow],
                   n: int = 200) -> tuple[float, tuple[float, float]]:
    """Largest relative depth difference at equal height over the common height range.

    Each row list must be monotonic in height (a stable run). Depth is
    linearly interpolated in height; the difference is taken relative to
    ``rows_a``.
    """
    ha = np.array([r.height for r in rows_a])
    hb = np.array([r.height for r in rows_b])
    da = np.array([r.depth for r in rows_a])
    db = np.array([r.depth for r in rows_b])
    oa, ob = np.argsort(ha), np.argsort(hb)
    lo = max(ha.min(), hb.min())
    hi = min(ha.max(), hb.max())
    if not hi > lo:
        raise ValidationError("height ranges do not overlap")
    h = np.linspace(lo, hi, n)
    ia = np.interp(h, ha[oa], da[oa])
    ib = np.interp(h, hb[ob], db[ob])
    return float(np.max(np.abs(ib - ia) / ia)), (float(lo), float(hi))
