"""Passive height transition ("escalator") between two five-wire traps.

The ion path is the line of transverse pseudopotential minima along z.
Four scalar objectives summarize a traced path:

    F1 = ∫ ψ_min dz            (mean barrier)
    F2 = max ψ_min             (peak barrier)
    F3 = ∫ |dψ_min/dz| dz      (total variation)
    F4 = max |dψ_min/dz|       (peak axial force)

all over z in [-l, l]. They are combined into the weighted, normalized
F0 = Σ σ_i F_i / F_i^norm and minimized over the x-offsets of the inner
RF boundary's control points in two stages. A separate sweep picks the
second trap's electrode widths for each transition half-length D.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numba
import numpy as np

from .constants import MEV, UM
from .errors import ConfigError, GeometryError, TrackingError, TrapforgeError, ValidationError
from .field import DEFAULT_SLAB, METHODS, SourceModel, field_point
from .geometry import (ControlPointSet, EscalatorSpec, FiveWireSpec, Segmentation, TrapLayout,
                       build_escalator, build_five_wire, five_wire_height)
from .neldermead import nelder_mead
from .pseudo import (DEFAULT_BRACKET, DriveParams, IonSpecies, _psi_factor, characterize,
                     find_rf_null, resolve_method)

log = logging.getLogger(__name__)

OBJECTIVE_NAMES = ("F1", "F2", "F3", "F4")
MIN_SAMPLES = 50
TRACK_TOL = 1e-10        # relative step size at which a slice counts as converged
TRACK_MAXITER = 60
TRACK_FD = 1e-6          # relative finite-difference step for the Gauss-Newton Jacobian
CHECK_STEP = 1e-3        # relative probe distance for the local-minimum check
PENALTY_FACTOR = 1e3     # objective value for untraceable candidates, times the stage start value


# --- data types --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PathProfile:
    """Transverse pseudopotential minimum sampled along the axis (SI units)."""

    z: np.ndarray
    x_min: np.ndarray
    y_min: np.ndarray
    psi_min: np.ndarray
    dpsi_dz: np.ndarray
    l: float = 1000 * UM

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=float) for a in (self.z, self.x_min, self.y_min,
                                                     self.psi_min, self.dpsi_dz)]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1 or arrs[0].size < 2:
            raise ValidationError("profile arrays must be 1-D, equally long, with >= 2 samples")
        if not all(np.all(np.isfinite(a)) for a in arrs):
            raise ValidationError("profile contains non-finite values")
        if np.any(np.diff(arrs[0]) <= 0):
            raise ValidationError("profile z must be strictly increasing")
        if np.any(arrs[2] <= 0):
            raise ValidationError("profile y_min must be > 0")
        if np.any(arrs[3] < 0):
            raise ValidationError("profile psi_min must be >= 0")
        for name, a in zip(("z", "x_min", "y_min", "psi_min", "dpsi_dz"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self):
        return self.z.size

    def table(self) -> dict[str, np.ndarray]:
        """Columns in display units, keyed by CSV header."""
        return {"z_um": self.z / UM, "x_um": self.x_min / UM, "y_um": self.y_min / UM,
                "psi_meV": self.psi_min / MEV, "dpsi_dz_meV_per_um": self.dpsi_dz * UM / MEV}

    @classmethod
    def from_table(cls, cols, l: float | None = None) -> "PathProfile":
        z = np.asarray(cols["z_um"], float) * UM
        return cls(z, np.asarray(cols["x_um"], float) * UM, np.asarray(cols["y_um"], float) * UM,
                   np.asarray(cols["psi_meV"], float) * MEV,
                   np.asarray(cols["dpsi_dz_meV_per_um"], float) * MEV / UM,
                   float(-z[0] if l is None else l))


@dataclass(frozen=True)
class ObjectiveVector:
    """F1 [J·m], F2 [J], F3 [J], F4 [J/m]."""

    F1: float
    F2: float
    F3: float
    F4: float

    def __post_init__(self):
        for n in OBJECTIVE_NAMES:
            v = getattr(self, n)
            if not (np.isfinite(v) and v >= 0):
                raise ValidationError(f"{n} must be finite and >= 0, got {v}")

    def as_array(self) -> np.ndarray:
        return np.array([self.F1, self.F2, self.F3, self.F4])

    def display(self) -> dict[str, float]:
        """Values in meV·µm, meV, meV and meV/µm."""
        return {"F1_meV_um": self.F1 / (MEV * UM), "F2_meV": self.F2 / MEV,
                "F3_meV": self.F3 / MEV, "F4_meV_per_um": self.F4 * UM / MEV}


@dataclass(frozen=True)
class Weights:
    sigma: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    norms: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        s = tuple(float(v) for v in self.sigma)
        n = tuple(float(v) for v in self.norms)
        if len(s) != 4 or len(n) != 4:
            raise ConfigError("sigma and norms need exactly four entries")
        if any(not np.isfinite(v) or v < 0 for v in s) or not any(v > 0 for v in s):
            raise ConfigError(f"sigma must be non-negative with at least one > 0, got {s}")
        if any(not np.isfinite(v) or v <= 0 for v in n):
            raise ConfigError(f"norms must be finite and > 0, got {n}")
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "norms", n)


STAGE2_STARTS = ("zero", "best-stage1")


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings of the path tracing and both Nelder-Mead stages.

    ``seed`` is echoed into reports; the pipeline itself draws no random
    numbers. ``stage2_start="best-stage1"`` warm-starts the weighted stage
    from whichever Stage-1 solution has the lowest F0.
    """

    path_step: float = 5 * UM
    l: float = 1000 * UM
    simplex_scale: float = 5 * UM
    tol: float = 1e-4
    max_evals: int = 5000
    seed: int = 0
    field_method: str = "edge"
    slab: float = DEFAULT_SLAB
    stage2_start: str = "zero"
    width_scale: float = 10 * UM
    width_max_evals: int = 400
    target_height_ratio: float = 2.0

    def __post_init__(self):
        if not self.path_step > 0:
            raise ConfigError("path_step must be > 0")
        if not self.l > 0:
            raise ConfigError("l must be > 0")
        if not self.simplex_scale > 0 or not self.width_scale > 0:
            raise ConfigError("simplex scales must be > 0")
        if not self.tol > 0:
            raise ConfigError("tol must be > 0")
        if int(self.max_evals) < 2 or int(self.width_max_evals) < 3:
            raise ConfigError("evaluation budgets must cover at least dimension + 1 evaluations")
        if self.field_method not in METHODS or self.field_method == "strip2d":
            raise ConfigError(f"field_method must be 'edge' or 'slab', got {self.field_method!r}")
        if not self.slab > 0:
            raise ConfigError("slab must be > 0")
        if self.stage2_start not in STAGE2_STARTS:
            raise ConfigError(f"stage2_start must be one of {STAGE2_STARTS}")
        if not self.target_height_ratio > 0:
            raise ConfigError("target_height_ratio must be > 0")
        _grid(self.l, self.path_step)

    def replace(self, **kw) -> "OptimizerConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


# --- path tracing ------------------------------------------------------------

def _grid(l: float, step: float) -> np.ndarray:
    n = int(round(2 * l / step))
    if n < 1 or abs(n * step - 2 * l) > 1e-9 * 2 * l:
        raise ValidationError(f"step {step:.6g} m does not divide 2l = {2 * l:.6g} m")
    if n + 1 < MIN_SAMPLES:
        raise ValidationError(f"step gives {n + 1} samples, need >= {MIN_SAMPLES}")
    return np.linspace(-l, l, n + 1)


@numba.njit(cache=True, nogil=True)
def _e2(rects, edges, x, y, z):
    ex, ey, ez = field_point(rects, edges, x, y, z)
    return ex * ex + ey * ey + ez * ez


@numba.njit(cache=True, nogil=True)
def _track_kernel(rects, edges, zs, x0, y0, free_x, tol, maxiter, fd, chk, out):
    """Gauss-Newton on E(x, y) = 0 in each slice, seeded by the previous one.

    Returns -1 on success, otherwise the index of the slice where the
    minimum was lost. ``out`` rows receive (x, y, |E|²).
    """
    x = x0
    y = y0
    for j in range(zs.size):
        z = zs[j]
        if j >= 2:
            # linear extrapolation from the two previous minima
            r = (z - zs[j - 1]) / (zs[j - 1] - zs[j - 2])
            x = out[j - 1, 0] + r * (out[j - 1, 0] - out[j - 2, 0])
            y = out[j - 1, 1] + r * (out[j - 1, 1] - out[j - 2, 1])
        done = False
        for _ in range(maxiter):
            h = fd * y
            ex, ey, ez = field_point(rects, edges, x, y, z)
            ax, ay, az = field_point(rects, edges, x, y + h, z)
            bx, by, bz = field_point(rects, edges, x, y - h, z)
            jyx = (ax - bx) / (2 * h)
            jyy = (ay - by) / (2 * h)
            jyz = (az - bz) / (2 * h)
            gy = jyx * ex + jyy * ey + jyz * ez
            nyy = jyx * jyx + jyy * jyy + jyz * jyz
            dx = 0.0
            if free_x:
                ax, ay, az = field_point(rects, edges, x + h, y, z)
                bx, by, bz = field_point(rects, edges, x - h, y, z)
                jxx = (ax - bx) / (2 * h)
                jxy = (ay - by) / (2 * h)
                jxz = (az - bz) / (2 * h)
                gx = jxx * ex + jxy * ey + jxz * ez
                nxx = jxx * jxx + jxy * jxy + jxz * jxz
                nxy = jxx * jyx + jxy * jyy + jxz * jyz
                det = nxx * nyy - nxy * nxy
                if not det > 0:
                    return j
                dx = -(nyy * gx - nxy * gy) / det
                dy = -(nxx * gy - nxy * gx) / det
            else:
                if not nyy > 0:
                    return j
                dy = -gy / nyy
            lim = 0.25 * y
            dx = min(max(dx, -lim), lim)
            dy = min(max(dy, -lim), lim)
            x += dx
            y += dy
            if not y > 0:
                return j
            if abs(dx) <= tol * y and abs(dy) <= tol * y:
                done = True
                break
        if not done:
            return j
        p0 = _e2(rects, edges, x, y, z)
        d = chk * y
        if (_e2(rects, edges, x, y + d, z) < p0 or _e2(rects, edges, x, y - d, z) < p0
                or _e2(rects, edges, x + d, y, z) < p0
                or (free_x and _e2(rects, edges, x - d, y, z) < p0)):
            return j
        out[j, 0] = x
        out[j, 1] = y
        out[j, 2] = p0
    return -1


def _track_generic(src: SourceModel, V, zs, x0, y0, free_x, tol, maxiter, fd, chk, out):
    """Same algorithm as ``_track_kernel`` for sources without a compiled form."""
    def E(x, y, z):
        return src.field(np.array([[x, y, z]]), V)[0]

    x, y = x0, y0
    for j, z in enumerate(zs):
        if j >= 2:
            r = (z - zs[j - 1]) / (zs[j - 1] - zs[j - 2])
            x, y = out[j - 1, :2] + r * (out[j - 1, :2] - out[j - 2, :2])
        for _ in range(maxiter):
            h = fd * y
            e = E(x, y, z)
            jy = (E(x, y + h, z) - E(x, y - h, z)) / (2 * h)
            if free_x:
                jx = (E(x + h, y, z) - E(x - h, y, z)) / (2 * h)
                J = np.column_stack([jx, jy])
                try:
                    dx, dy = -np.linalg.solve(J.T @ J, J.T @ e)
                except np.linalg.LinAlgError:
                    return j
            else:
                nyy = jy @ jy
                if not nyy > 0:
                    return j
                dx, dy = 0.0, -(jy @ e) / nyy
            lim = 0.25 * y
            x += float(np.clip(dx, -lim, lim))
            y += float(np.clip(dy, -lim, lim))
            if not y > 0:
                return j
            if abs(dx) <= tol * y and abs(dy) <= tol * y:
                break
        else:
            return j
        p0 = float(E(x, y, z) @ E(x, y, z))
        d = chk * y
        probes = [(x, y + d), (x, y - d), (x + d, y)] + ([(x - d, y)] if free_x else [])
        for px, py in probes:
            ep = E(px, py, z)
            if ep @ ep < p0:
                return j
        out[j] = (x, y, p0)
    return -1


def trace_path(layout: TrapLayout, species: IonSpecies, drive: DriveParams,
               l: float = 1000 * UM, step: float = 5 * UM, *, method: str = "auto",
               slab: float = DEFAULT_SLAB, y_seed: float | None = None,
               src: SourceModel | None = None) -> PathProfile:
    """Follow the transverse pseudopotential minimum over z in [-l, l].

    The first slice is seeded by the null finder (or ``y_seed``); every
    later slice starts from the previous minimum. Mirror-symmetric layouts
    keep x fixed at 0. dψ/dz is the central difference of ψ_min along the
    traced path, one-sided at both ends.
    """
    zs = _grid(l, step)
    method = resolve_method(layout, method)
    if src is None:
        src = SourceModel.from_layout(layout, method, slab)
    free_x = not layout.is_mirror_symmetric()
    if y_seed is None:
        x0, y0 = find_rf_null(layout, drive, float(zs[0]), DEFAULT_BRACKET, src=src)
    else:
        x0, y0 = 0.0, float(y_seed)
    out = np.zeros((zs.size, 3))
    V = drive.V_rf
    args = (zs, float(x0), float(y0), free_x, TRACK_TOL, TRACK_MAXITER, TRACK_FD, CHECK_STEP, out)
    if src.strips_layout is None:
        rects, edges = src.scaled_arrays(V)
        fail = _track_kernel(rects, edges, *args)
    else:
        fail = _track_generic(src, V, *args)
    if fail >= 0:
        zf = float(zs[fail])
        raise TrackingError(f"lost the transverse pseudopotential minimum at z = {zf / UM:.6g} um", zf)
    psi = _psi_factor(species, drive) * out[:, 2]
    return PathProfile(zs, out[:, 0], out[:, 1], psi, np.gradient(psi, zs), float(l))


# --- objectives --------------------------------------------------------------

def objectives(profile: PathProfile) -> ObjectiveVector:
    z, psi, d = profile.z, profile.psi_min, profile.dpsi_dz
    return ObjectiveVector(float(np.trapezoid(psi, z)), float(np.max(psi)),
                           float(np.trapezoid(np.abs(d), z)), float(np.max(np.abs(d))))


def composite_f0(fvec: ObjectiveVector, weights: Weights) -> float:
    """Σ σ_i F_i / F_i^norm."""
    norms = np.asarray(weights.norms, float)
    if np.any(norms == 0):
        raise ConfigError("zero normalization factor")
    return float(np.sum(np.asarray(weights.sigma) * fvec.as_array() / norms))


# --- the two-stage optimization ----------------------------------------------

class _ConnectorModel:
    """Offsets → (ObjectiveVector, PathProfile) for one escalator spec."""

    def __init__(self, spec, species, drive, config: OptimizerConfig):
        self.spec, self.species, self.drive, self.config = spec, species, drive, config
        self.template = spec.zero_offsets()
        self.y_seed = None

    def profile(self, offsets) -> PathProfile:
        cps = self.template.with_offsets(np.asarray(offsets, float))
        layout = build_escalator(self.spec, cps)
        c = self.config
        return trace_path(layout, self.species, self.drive, c.l, c.path_step,
                          method=c.field_method, slab=c.slab, y_seed=self.y_seed)

    def evaluate(self, offsets):
        prof = self.profile(offsets)
        if self.y_seed is None:
            self.y_seed = float(prof.y_min[0])
        return objectives(prof), prof


@dataclass
class StageResult:
    name: str
    f_start: float
    f_best: float
    nfev: int
    nit: int
    converged: bool
    improved: bool
    n_penalized: int
    x_best: np.ndarray
    objectives: ObjectiveVector
    trace: list[float] = field(default_factory=list)


@dataclass
class OptimizationReport:
    spec: EscalatorSpec
    species: IonSpecies
    drive: DriveParams
    config: OptimizerConfig
    weights: Weights
    baseline: ObjectiveVector
    final: ObjectiveVector
    offsets: ControlPointSet
    baseline_profile: PathProfile
    final_profile: PathProfile
    stages: list[StageResult]

    @property
    def trace(self) -> list[float]:
        """Best-so-far F0 of the weighted stage, one entry per iteration."""
        return self.stages[-1].trace

    @property
    def flagged_stages(self) -> list[str]:
        return [s.name for s in self.stages if not s.improved]

    def reduction(self, name: str = "F2") -> float:
        """Baseline over final value of one objective."""
        i = OBJECTIVE_NAMES.index(name)
        return float(self.baseline.as_array()[i] / self.final.as_array()[i])

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "species": {"label": self.species.label, "mass_kg": self.species.mass,
                        "charge_C": self.species.charge},
            "drive": {"V_rf": self.drive.V_rf, "f_rf_MHz": self.drive.Omega_rf / (2e6 * np.pi)},
            "config": self.config.to_dict(),
            "sigma": list(self.weights.sigma),
            "norms": dict(zip(OBJECTIVE_NAMES, ObjectiveVector(*self.weights.norms).display().values())),
            "baseline": self.baseline.display(),
            "final": self.final.display(),
            "reduction": {n: self.reduction(n) for n in OBJECTIVE_NAMES},
            "offsets_um": {"z_um": list(np.asarray(self.offsets.z_positions) / UM),
                           "dx_um": list(np.asarray(self.offsets.x_offsets) / UM)},
            "stages": [{"name": s.name, "f_start": s.f_start, "f_best": s.f_best, "nfev": s.nfev,
                        "nit": s.nit, "converged": s.converged, "improved": s.improved,
                        "n_penalized": s.n_penalized} for s in self.stages],
            "flagged_stages": self.flagged_stages,
            "trace_F0": list(self.trace),
        }


def _run_stage(name, fn, x0, bound, config, f_start):
    penalized = 0
    penalty = PENALTY_FACTOR * max(abs(f_start), 1.0)

    def wrapped(x):
        nonlocal penalized
        try:
            return fn(x)
        except (TrackingError, GeometryError) as exc:
            penalized += 1
            log.debug("%s: candidate rejected (%s)", name, exc)
            return penalty

    res = nelder_mead(wrapped, x0, scale=config.simplex_scale, tol=config.tol,
                      max_evals=int(config.max_evals), bounds=(-bound, bound))
    return res, penalized


def optimize_connector(spec: EscalatorSpec, species: IonSpecies | None = None,
                       drive: DriveParams | None = None, sigma=(1.0, 1.0, 1.0, 1.0),
                       config: OptimizerConfig | None = None) -> OptimizationReport:
    """Two-stage Nelder-Mead over the control-point offsets.

    Stage 1 minimizes each F_i alone from zero offsets (in units of its
    baseline value) and keeps the minima as normalization factors. Stage 2
    minimizes F0 with the given σ. A stage that does not beat its starting
    value is flagged in the report rather than raising.
    """
    species = species or IonSpecies.yb171()
    drive = drive or DriveParams.from_frequency(100.0, 20e6)
    config = config or OptimizerConfig()
    Weights(sigma=tuple(sigma))  # validates sigma before any expensive work
    model = _ConnectorModel(spec, species, drive, config)
    n = spec.n_control
    x_zero = np.zeros(n)
    bound = spec.deviation_bound
    try:
        base_vec, base_prof = model.evaluate(x_zero)
    except TrackingError as exc:
        raise TrackingError(f"baseline path could not be traced: {exc}", exc.z) from exc
    base = base_vec.as_array()

    stages: list[StageResult] = []
    norms = np.empty(4)
    for i, name in enumerate(OBJECTIVE_NAMES):
        unit = base[i] if base[i] > 0 else 1.0

        def fi(x, i=i, unit=unit):
            return model.evaluate(x)[0].as_array()[i] / unit

        res, pen = _run_stage(name, fi, x_zero, bound, config, base[i] / unit)
        vec = model.evaluate(res.x_best)[0]
        norms[i] = vec.as_array()[i]
        stages.append(StageResult(name, float(base[i]), float(norms[i]), res.nfev, res.nit,
                                  res.converged, bool(norms[i] < base[i]), pen, res.x_best,
                                  vec, [t * unit for t in res.trace]))
        log.info("stage 1 %s: %.4g -> %.4g (%d evals)", name, base[i], norms[i], res.nfev)
    for i in range(4):
        if not norms[i] > 0:
            norms[i] = base[i] if base[i] > 0 else 1.0
            log.warning("stage 1 %s reached zero; falling back to norm %.4g",
                        OBJECTIVE_NAMES[i], norms[i])
    weights = Weights(tuple(sigma), tuple(norms))

    def f0(x):
        return composite_f0(model.evaluate(x)[0], weights)

    if config.stage2_start == "zero":
        x_start = x_zero
    else:
        x_start = min(stages, key=lambda st: composite_f0(st.objectives, weights)).x_best
    f_start = f0(x_start)
    res, pen = _run_stage("F0", f0, x_start, bound, config, f_start)
    final_vec, final_prof = model.evaluate(res.x_best)
    stages.append(StageResult("F0", f_start, res.f_best, res.nfev, res.nit, res.converged,
                              bool(res.f_best < composite_f0(base_vec, weights)), pen,
                              res.x_best, final_vec, list(res.trace)))
    return OptimizationReport(spec, species, drive, config, weights, base_vec, final_vec,
                              model.template.with_offsets(res.x_best), base_prof, final_prof,
                              stages)


# --- width / transition-length sweep -----------------------------------------

def worker_count() -> int:
    """Threads allowed by ``TRAPFORGE_THREADS`` (0 or unset = one per CPU)."""
    raw = os.environ.get("TRAPFORGE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"TRAPFORGE_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("TRAPFORGE_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


@dataclass(frozen=True)
class WidthSweepRow:
    D: float
    a2_opt: float = float("nan")
    b2_opt: float = float("nan")
    F1_opt: float = float("nan")
    F1_start: float = float("nan")
    height: float = float("nan")
    depth: float = float("nan")
    omega_sec: float = float("nan")
    nfev: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


WIDTH_MIN, WIDTH_MAX = 5 * UM, 2000 * UM


def _scaled_widths(a2, b2, h_target):
    s = h_target / five_wire_height(a2, b2)
    return s * a2, s * b2


def _width_row(spec_template: EscalatorSpec, D: float, species, drive, config) -> WidthSweepRow:
    h1 = five_wire_height(spec_template.a1, spec_template.b1)
    h_target = config.target_height_ratio * h1
    try:
        base = spec_template.replace(D=D)
        model = None

        def f1(x):
            nonlocal model
            a2, b2 = _scaled_widths(float(x[0]), float(x[1]), h_target)
            m = _ConnectorModel(base.replace(a2=a2, b2=b2), species, drive, config)
            if model is not None:
                m.y_seed = model.y_seed
            model = m
            return m.evaluate(np.zeros(base.n_control))[0].F1

        x0 = np.array([spec_template.a1, spec_template.b1])
        f_start = f1(x0)
        res = nelder_mead(f1, x0, scale=config.width_scale, tol=config.tol,
                          max_evals=int(config.width_max_evals), bounds=(WIDTH_MIN, WIDTH_MAX))
        a2, b2 = _scaled_widths(float(res.x_best[0]), float(res.x_best[1]), h_target)
        layout = build_five_wire(FiveWireSpec(a2, b2, b2, Segmentation.WHOLE_CENTRAL, 0.0))
        tc = characterize(layout, species, drive, 0.0, y_bracket=(1e-3 * a2, 1e3 * max(a2, b2)),
                          prefer=h_target, method="strip2d")
        return WidthSweepRow(D, a2, b2, res.f_best, f_start, tc.height, tc.depth,
                             float(np.mean(tc.secular_frequencies[:2])), res.nfev)
    except TrapforgeError as exc:
        log.debug("width sweep D=%g failed: %s", D, exc)
        return WidthSweepRow(D, error=f"{type(exc).__name__}: {exc}")


def width_sweep(spec_template: EscalatorSpec, D_list, species: IonSpecies | None = None,
                drive: DriveParams | None = None, config: OptimizerConfig | None = None
                ) -> list[WidthSweepRow]:
    """Second-trap widths (a2, b2) minimizing F1 of the unshaped transition, per D.

    F1 alone has a trivial minimum at a2 = a1, b2 = b1 (no transition at
    all), so every candidate (a2, b2) is scaled uniformly onto the target
    height ``target_height_ratio × h1`` before it is evaluated. The search
    therefore acts on the width ratio, starting from (a1, b1). Rows come
    back ordered by D; failures are recorded in the row.
    """
    D_list = [float(d) for d in D_list]
    if not D_list or any(not d > 0 for d in D_list):
        raise ValidationError("D_list must be non-empty and positive")
    species = species or IonSpecies.yb171()
    drive = drive or DriveParams.from_frequency(100.0, 20e6)
    config = config or OptimizerConfig()
    D_sorted = sorted(D_list)
    workers = min(worker_count(), len(D_sorted))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda d: _width_row(spec_template, d, species, drive, config),
                                 D_sorted))
    else:
        rows = [_width_row(spec_template, d, species, drive, config) for d in D_sorted]
    return rows


__all__ = ["PathProfile", "ObjectiveVector", "Weights", "OptimizerConfig", "StageResult",
           "OptimizationReport", "WidthSweepRow", "trace_path", "objectives", "composite_f0",
           "optimize_connector", "width_sweep", "worker_count"]
