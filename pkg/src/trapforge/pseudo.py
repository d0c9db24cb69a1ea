"""RF pseudopotential and single-slice trap characterization."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .constants import AMU, E_CHARGE, MEV, YB171_MASS_U
from .errors import (AmbiguousNullError, NotAMinimumError, NullNotFoundError,
                     UnboundedSearchError, ValidationError)
from .field import DEFAULT_SLAB, HESSIAN_STEP, SourceModel
from .geometry import TrapLayout

log = logging.getLogger(__name__)

Q_LIMIT = 0.4
DEPTH_LIMIT = 25 * MEV
DEFAULT_BRACKET = (2e-6, 2e-3)


@dataclass(frozen=True)
class IonSpecies:
    mass: float
    charge: float
    label: str = ""

    def __post_init__(self):
        if not self.mass > 0:
            raise ValidationError("ion mass must be > 0")
        if self.charge == 0 or not np.isfinite(self.charge):
            raise ValidationError("ion charge must be non-zero")

    @classmethod
    def yb171(cls) -> "IonSpecies":
        return cls(YB171_MASS_U * AMU, E_CHARGE, "171Yb+")

    @classmethod
    def from_units(cls, mass_u: float, charge_e: float = 1.0, label: str = "") -> "IonSpecies":
        return cls(mass_u * AMU, charge_e * E_CHARGE, label)


@dataclass(frozen=True)
class DriveParams:
    V_rf: float
    Omega_rf: float

    def __post_init__(self):
        if not self.V_rf > 0:
            raise ValidationError("V_rf must be > 0")
        if not self.Omega_rf > 0:
            raise ValidationError("Omega_rf must be > 0")

    @classmethod
    def from_frequency(cls, V_rf: float, f_rf: float) -> "DriveParams":
        return cls(V_rf, 2 * np.pi * f_rf)

    def scaled(self, k: float) -> "DriveParams":
        return DriveParams(self.V_rf * k, self.Omega_rf)


@dataclass(frozen=True)
class TrapCharacterization:
    null_position: tuple[float, float, float]
    height: float
    secular_frequencies: tuple[float, float, float]  # rad/s, descending
    principal_axes: np.ndarray  # columns match secular_frequencies
    mathieu_q: tuple[float, float]
    depth: float  # J
    stable: bool

    @property
    def q_max(self) -> float:
        return max(self.mathieu_q)

    @property
    def depth_meV(self) -> float:
        return self.depth / MEV

    @property
    def radial_frequency_hz(self) -> float:
        """Mean of the two radial secular frequencies, in Hz."""
        return float(np.mean(self.secular_frequencies[:2]) / (2 * np.pi))


def is_stable(q_max: float, depth: float) -> bool:
    return bool(q_max < Q_LIMIT and depth > DEPTH_LIMIT)


def resolve_method(layout: TrapLayout, method: str) -> str:
    """``"auto"`` picks the exact 2D strip model for axially uniform layouts."""
    if method == "auto":
        return "strip2d" if layout.is_axially_uniform() else "slab"
    return method


def source_for(layout: TrapLayout, method: str = "auto", slab: float = DEFAULT_SLAB) -> SourceModel:
    return SourceModel.from_layout(layout, resolve_method(layout, method), slab)


def _psi_factor(species: IonSpecies, drive: DriveParams) -> float:
    return species.charge ** 2 / (4 * species.mass * drive.Omega_rf ** 2)


def pseudopotential(src: SourceModel, species: IonSpecies, drive: DriveParams, P) -> np.ndarray:
    """ψ at points ``P`` (n, 3) for a compiled source model."""
    E = src.field(P, drive.V_rf)
    return _psi_factor(species, drive) * np.einsum("ij,ij->i", E, E)


def pseudopotential_at(layout: TrapLayout, species: IonSpecies, drive: DriveParams, point,
                       method: str = "auto", slab: float = DEFAULT_SLAB) -> float:
    """Time-averaged pseudopotential Q²|E|²/(4mΩ²) in joules."""
    src = source_for(layout, method, slab)
    return float(pseudopotential(src, species, drive, np.reshape(point, (1, 3)))[0])


def _polish_y(src, V, x, y, z, tol=1e-13, maxiter=50):
    # Gauss-Newton on |E(x, y, z)|² along y; exact at an E = 0 null
    for _ in range(maxiter):
        d = 1e-6 * y
        E = src.field(np.array([[x, y, z], [x, y + d, z]]), V)
        dE = (E[1] - E[0]) / d
        den = dE @ dE
        if den == 0:
            break
        step = -(E[0] @ dE) / den
        step = float(np.clip(step, -0.2 * y, 0.2 * y))
        y += step
        if abs(step) < tol:
            break
    return y


def _minimize_transverse(src, V, z, x, y, bracket=(0.0, np.inf), tol=1e-13, maxiter=100):
    # Gauss-Newton on |E|² over (x, y) for layouts without mirror symmetry
    p = np.array([x, y])
    for _ in range(maxiter):
        d = 1e-6 * p[1]
        pts = np.array([[p[0], p[1], z], [p[0] + d, p[1], z], [p[0], p[1] + d, z]])
        E = src.field(pts, V)
        J = np.column_stack([(E[1] - E[0]) / d, (E[2] - E[0]) / d])
        step, *_ = np.linalg.lstsq(J, -E[0], rcond=None)
        lim = 0.2 * p[1]
        step = np.clip(step, -lim, lim)
        p = p + step
        if p[1] <= 0:
            raise NullNotFoundError(f"transverse minimization at z={z:.6g} m left the half-space")
        if p[1] > bracket[1]:
            raise NullNotFoundError(f"transverse minimization at z={z:.6g} m ran above the "
                                    f"y bracket (no RF null)")
        if np.max(np.abs(step)) < tol:
            break
    else:
        raise NullNotFoundError(f"transverse minimization at z={z:.6g} m did not converge")
    if p[1] < bracket[0]:
        raise NullNotFoundError(f"transverse minimum at z={z:.6g} m lies below the y bracket")
    return float(p[0]), float(p[1])


def find_rf_null(layout: TrapLayout, drive: DriveParams, z: float = 0.0,
                 y_bracket=DEFAULT_BRACKET, *, prefer: float | None = None, start=None,
                 method: str = "auto", slab: float = DEFAULT_SLAB, n_grid: int = 600,
                 src: SourceModel | None = None) -> tuple[float, float]:
    """Transverse position (x, y) of the RF null in the slice at ``z``.

    Mirror-symmetric layouts: E_y(0, y, z) is scanned over ``y_bracket`` and
    each sign change refined by Brent's method. Roots where ψ is a local
    minimum along y are candidates; with several, ``prefer`` (a height)
    picks the closest, otherwise :class:`AmbiguousNullError` is raised.
    Other layouts are minimized in (x, y) from ``start``.
    """
    src = src or source_for(layout, method, slab)
    V = drive.V_rf
    lo, hi = y_bracket
    if not 0 < lo < hi:
        raise ValidationError(f"invalid y bracket {y_bracket}")

    if not layout.is_mirror_symmetric():
        x0, y0 = start if start is not None else (0.0, prefer or np.sqrt(lo * hi))
        return _minimize_transverse(src, V, z, x0, y0, (lo, hi))

    ys = np.geomspace(lo, hi, n_grid)
    pts = np.column_stack([np.zeros_like(ys), ys, np.full_like(ys, z)])
    Ey = src.field(pts, V)[:, 1]

    def ey(y):
        return src.field(np.array([[0.0, y, z]]), V)[0, 1]

    cands = []
    for i in np.flatnonzero(np.sign(Ey[:-1]) * np.sign(Ey[1:]) <= 0):
        if Ey[i] == 0 and i > 0 and Ey[i - 1] == 0:
            continue
        root = optimize.brentq(ey, ys[i], ys[i + 1], xtol=1e-14, rtol=1e-14) if Ey[i] != Ey[i + 1] \
            else ys[i]
        d = 1e-4 * root
        E = src.field(np.array([[0, root - d, z], [0, root, z], [0, root + d, z]]), V)
        m2 = np.einsum("ij,ij->i", E, E)
        if m2[1] <= m2[0] and m2[1] <= m2[2]:
            if not cands or abs(root - cands[-1]) > 1e-9:
                cands.append(root)
    if not cands:
        raise NullNotFoundError(
            f"no RF null on the symmetry axis at z={z:.6g} m within y bracket "
            f"[{lo:.6g}, {hi:.6g}] m")
    if len(cands) > 1:
        if prefer is None:
            raise AmbiguousNullError(
                "several RF nulls in bracket: " + ", ".join(f"{c * 1e6:.4f} um" for c in cands),
                cands)
        y = min(cands, key=lambda c: abs(c - prefer))
    else:
        y = cands[0]
    E = src.field(np.array([[0.0, y, z]]), V)[0]
    if abs(E[2]) > 0:
        y = _polish_y(src, V, 0.0, y, z)
    return 0.0, float(y)


def trap_depth(layout: TrapLayout, species: IonSpecies, drive: DriveParams, null, *,
               method: str = "auto", slab: float = DEFAULT_SLAB, rel_step: float = 2e-3,
               src: SourceModel | None = None) -> float:
    """Barrier height along the vertical escape line above ``null`` (joules).

    ψ is scanned upward from the null until it first turns over; the
    maximum is then refined by bounded Brent search.
    """
    src = src or source_for(layout, method, slab)
    x0, y0, z0 = (float(v) for v in null)
    ys = y0 * (1 + rel_step * np.arange(1, int(9 / rel_step) + 1))
    P = np.column_stack([np.full_like(ys, x0), ys, np.full_like(ys, z0)])
    psi = pseudopotential(src, species, drive, P)
    psi0 = pseudopotential(src, species, drive, np.array([[x0, y0, z0]]))[0]
    down = np.flatnonzero(np.diff(psi) < 0)
    if down.size == 0:
        raise UnboundedSearchError(
            f"pseudopotential still rising at y = {ys[-1]:.4g} m (10x the null height)")
    k = down[0]
    if k == 0:
        lo_y = y0
    else:
        lo_y = ys[k - 1]
    hi_y = ys[k + 1]

    def neg(y):
        return -pseudopotential(src, species, drive, np.array([[x0, y, z0]]))[0]

    res = optimize.minimize_scalar(neg, bounds=(lo_y, hi_y), method="bounded",
                                   options={"xatol": 1e-12})
    top = max(-res.fun, psi[k])
    return float(max(top - psi0, 0.0))


def potential_hessian(src: SourceModel, drive: DriveParams, P) -> np.ndarray:
    return src.hessian(np.reshape(P, (1, 3)), drive.V_rf)[0]


def pseudo_hessian(src: SourceModel, species: IonSpecies, drive: DriveParams, P,
                   step: float = HESSIAN_STEP) -> np.ndarray:
    """Hessian of ψ by central differences of its analytic-in-E gradient."""
    k = _psi_factor(species, drive)
    V = drive.V_rf
    P = np.asarray(P, dtype=float).reshape(3)
    shifts = np.concatenate([np.eye(3), -np.eye(3)]) * step
    pts = P + shifts
    E = src.field(pts, V)
    H = src.hessian(pts, V)
    # grad ψ = 2k Σ_m E_m ∂_i E_m = -2k H E
    g = -2 * k * np.einsum("nij,nj->ni", H, E)
    Hpsi = (g[:3] - g[3:]) / (2 * step)
    return 0.5 * (Hpsi + Hpsi.T)


def characterize(layout: TrapLayout, species: IonSpecies, drive: DriveParams, z: float = 0.0,
                 *, y_bracket=DEFAULT_BRACKET, prefer: float | None = None, start=None,
                 method: str = "auto", slab: float = DEFAULT_SLAB) -> TrapCharacterization:
    """Null position, secular frequencies, Mathieu q and depth of one slice."""
    src = source_for(layout, method, slab)
    x, y = find_rf_null(layout, drive, z, y_bracket, prefer=prefer, start=start, src=src)
    P = np.array([x, y, z])
    Hpsi = pseudo_hessian(src, species, drive, P)
    w, vecs = np.linalg.eigh(Hpsi)
    order = np.argsort(w)[::-1]
    w, vecs = w[order], vecs[:, order]
    scale = max(abs(w[0]), 1e-300)
    if w[-1] < -1e-6 * scale:
        raise NotAMinimumError(
            f"pseudopotential hessian at ({x:.4g}, {y:.4g}, {z:.4g}) m has a negative eigenvalue {w[-1]:.3e}")
    w = np.clip(w, 0.0, None)
    omegas = np.sqrt(w / species.mass)
    Hphi = potential_hessian(src, drive, P)
    qs = tuple(float(2 * abs(species.charge) * abs(vecs[:, i] @ Hphi @ vecs[:, i])
                     / (species.mass * drive.Omega_rf ** 2)) for i in range(2))
    depth = trap_depth(layout, species, drive, P, src=src)
    return TrapCharacterization(
        null_position=(x, y, float(z)), height=y,
        secular_frequencies=tuple(float(o) for o in omegas),
        principal_axes=vecs, mathieu_q=qs, depth=depth,
        stable=is_stable(max(qs), depth))
