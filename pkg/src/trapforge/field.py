"""Analytic electrostatics of gapless planar electrodes.

An electrode region S held at voltage V in an otherwise grounded plane
produces φ(P) = V Ω_S(P) / 2π, where Ω_S is the solid angle S subtends at
P. Three evaluation routes are provided for a layout:

``"strip2d"``
    cross-section of the layout at the point's z treated as infinite
    strips (translation-invariant layouts only);
``"slab"``
    each electrode cut into thin z-slabs of axis-aligned rectangles,
    merged wherever the cross-section does not change;
``"edge"``
    exact polygon result: the solid-angle gradient is a line integral
    around the outline, summed in closed form edge by edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from .errors import DomainError, ValidationError
from .geometry import TrapLayout

HESSIAN_STEP = 10e-9
DEFAULT_SLAB = 1e-6
METHODS = ("slab", "edge", "strip2d")

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FieldSample:
    point: tuple[float, float, float]
    potential: float
    field: np.ndarray
    hessian: np.ndarray | None = None


def _check_height(y):
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise DomainError("field evaluation requires y > 0 (above the chip plane)")


# --- single strip -----------------------------------------------------------

def strip_field_2d(x1: float, x2: float, V: float, point) -> FieldSample:
    """Infinite strip x1 < x < x2 at voltage V; ``point`` is (x, y)."""
    if not x1 < x2:
        raise ValidationError("strip needs x1 < x2")
    x, y = float(point[0]), float(point[1])
    _check_height(y)
    strips = np.array([[x1, x2, 1.0]])
    pot, E, H = _strips_all(strips, np.array([x]), np.array([y]), V)
    return FieldSample((x, y, 0.0), float(pot[0]), E[0], H[0])


def _strips_all(strips, x, y, V):
    """Potential, field (3-vectors, E_z = 0) and exact hessian of strips.

    ``strips`` rows are (x1, x2, weight); ``x`` and ``y`` are 1-D arrays.
    """
    x = x[:, None]
    y = y[:, None]
    x1, x2, w = strips[:, 0], strips[:, 1], strips[:, 2] * V / np.pi
    u1, u2 = x1 - x, x2 - x
    r1, r2 = u1 * u1 + y * y, u2 * u2 + y * y
    pot = (w * (np.arctan(u2 / y) - np.arctan(u1 / y))).sum(-1)
    # d/dx atan(u/y) = -y/r ; d/dy atan(u/y) = -u/r
    dphidx = (w * (-y / r2 + y / r1)).sum(-1)
    dphidy = (w * (-u2 / r2 + u1 / r1)).sum(-1)
    # second derivatives of atan(u/y): xx = -2uy/r^2, yy = 2uy/r^2, xy = (y^2-u^2)/r^2
    g2 = u2 * y / r2**2
    g1 = u1 * y / r1**2
    pxx = (w * (-2 * g2 + 2 * g1)).sum(-1)
    pxy = (w * ((y * y - u2 * u2) / r2**2 - (y * y - u1 * u1) / r1**2)).sum(-1)
    n = len(pot)
    E = np.zeros((n, 3))
    E[:, 0] = -dphidx
    E[:, 1] = -dphidy
    H = np.zeros((n, 3, 3))
    H[:, 0, 0] = pxx
    H[:, 1, 1] = -pxx
    H[:, 0, 1] = H[:, 1, 0] = pxy
    return pot, E, H


# --- rectangles ---------------------------------------------------------------

@numba.njit(cache=True, nogil=True, inline="always")
def _rect_point(rects, px, py, pz, want_pot):
    # rects rows: x1, x2, z1, z2, weight (weight already includes V / 2π)
    y2 = py * py
    gx = 0.0
    gy = 0.0
    gz = 0.0
    pot = 0.0
    for k in range(rects.shape[0]):
        w = rects[k, 4]
        for a in range(2):
            X = rects[k, 1 - a] - px
            sx = 1.0 if a == 0 else -1.0
            X2 = X * X
            for b in range(2):
                Z = rects[k, 3 - b] - pz
                s = sx * (1.0 if b == 0 else -1.0) * w
                Z2 = Z * Z
                R = np.sqrt(X2 + y2 + Z2)
                # f = atan(XZ / (yR)) with X = xi - x, Z = zj - z
                gx -= s * Z * py / (R * (X2 + y2))
                gz -= s * X * py / (R * (Z2 + y2))
                gy -= s * X * Z * (R * R + y2) / (R * (X2 + y2) * (Z2 + y2))
                if want_pot:
                    pot += s * np.arctan2(X * Z, py * R)
    return -gx, -gy, -gz, pot


@numba.njit(cache=True, nogil=True)
def _rect_kernel(rects, P, want_pot, out_E, out_pot):
    for i in range(P.shape[0]):
        ex, ey, ez, pot = _rect_point(rects, P[i, 0], P[i, 1], P[i, 2], want_pot)
        out_E[i, 0] = ex
        out_E[i, 1] = ey
        out_E[i, 2] = ez
        out_pot[i] = pot


def rect_potential_3d(x_range, z_range, V: float, point) -> FieldSample:
    """Rectangle x_range × z_range at voltage V in the grounded plane."""
    (x1, x2), (z1, z2) = x_range, z_range
    if not (x1 < x2 and z1 < z2):
        raise ValidationError("rectangle must be non-degenerate")
    src = SourceModel(rects=np.array([[x1, x2, z1, z2, 1.0]]))
    return src.sample(point, V)


# --- polygon edges ------------------------------------------------------------

@numba.njit(cache=True, nogil=True, inline="always")
def _edge_point(edges, px, py, pz):
    # edges rows: ax, az, bx, bz, weight; outlines counterclockwise in (x, z)
    gx = 0.0
    gy = 0.0
    gz = 0.0
    for k in range(edges.shape[0]):
        ax, az, bx, bz, w = edges[k, 0], edges[k, 1], edges[k, 2], edges[k, 3], edges[k, 4]
        dx = bx - ax
        dz = bz - az
        L = np.sqrt(dx * dx + dz * dz)
        ux = dx / L
        uz = dz / L
        wx = px - ax
        wz = pz - az
        wpar = wx * ux + wz * uz
        rA2 = wx * wx + py * py + wz * wz
        rA = np.sqrt(rA2)
        vx = px - bx
        vz = pz - bz
        rB = np.sqrt(vx * vx + py * py + vz * vz)
        rho2 = rA2 - wpar * wpar
        fac = w * ((L - wpar) / rB + wpar / rA) / rho2
        # u × w with u = (ux, 0, uz), w = (wx, py, wz)
        gx -= uz * py * fac
        gy += (uz * wx - ux * wz) * fac
        gz += ux * py * fac
    return -gx, -gy, -gz


@numba.njit(cache=True, nogil=True)
def _edge_kernel(edges, P, out_E):
    for i in range(P.shape[0]):
        ex, ey, ez = _edge_point(edges, P[i, 0], P[i, 1], P[i, 2])
        out_E[i, 0] = ex
        out_E[i, 1] = ey
        out_E[i, 2] = ez


@numba.njit(cache=True, nogil=True)
def field_point(rects, edges, px, py, pz):
    """Summed field of pre-scaled rectangles and edges at one point."""
    ex = 0.0
    ey = 0.0
    ez = 0.0
    if rects.shape[0] > 0:
        a, b, c, _ = _rect_point(rects, px, py, pz, False)
        ex += a
        ey += b
        ez += c
    if edges.shape[0] > 0:
        a, b, c = _edge_point(edges, px, py, pz)
        ex += a
        ey += b
        ez += c
    return ex, ey, ez


@numba.njit(cache=True, nogil=True)
def _polygon_potential_kernel(verts, starts, weights, P, out_pot):
    # signed solid angle of each polygon via a triangle fan (Van Oosterom-Strackee)
    n = P.shape[0]
    npoly = starts.shape[0] - 1
    for i in range(n):
        px, py, pz = P[i, 0], P[i, 1], P[i, 2]
        tot = 0.0
        for p in range(npoly):
            s0 = starts[p]
            s1 = starts[p + 1]
            ax = verts[s0, 0] - px
            ay = -py
            az = verts[s0, 1] - pz
            ra = np.sqrt(ax * ax + ay * ay + az * az)
            om = 0.0
            for k in range(s0 + 1, s1 - 1):
                bx = verts[k, 0] - px
                bz = verts[k, 1] - pz
                cx = verts[k + 1, 0] - px
                cz = verts[k + 1, 1] - pz
                by = ay
                cy = ay
                rb = np.sqrt(bx * bx + by * by + bz * bz)
                rc = np.sqrt(cx * cx + cy * cy + cz * cz)
                trip = ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx) + az * (bx * cy - by * cx)
                den = (ra * rb * rc + (ax * bx + ay * by + az * bz) * rc
                       + (ax * cx + ay * cy + az * cz) * rb + (bx * cx + by * cy + bz * cz) * ra)
                om += 2.0 * np.arctan2(trip, den)
            tot += weights[p] * om
        out_pot[i] = tot


# --- layout-level source model -------------------------------------------------

class SourceModel:
    """Unit-voltage field sources of a layout, compiled for fast evaluation.

    Holds any combination of rectangles, polygon outlines and infinite
    strips; field and potential of all of them are superposed. Weights are
    the electrodes' rf fractions.
    """

    def __init__(self, rects=None, edges=None, polygons=None, strips_layout=None):
        self.rects = np.zeros((0, 5)) if rects is None else np.ascontiguousarray(rects, float)
        self.edges = np.zeros((0, 5)) if edges is None else np.ascontiguousarray(edges, float)
        self.polygons = polygons or []
        self.strips_layout = strips_layout
        if self.polygons:
            verts = [np.asarray(v, float) for v, _ in self.polygons]
            self._pverts = np.ascontiguousarray(np.concatenate(verts))
            self._pstarts = np.concatenate([[0], np.cumsum([len(v) for v in verts])]).astype(np.int64)
            self._pweights = np.array([w for _, w in self.polygons], float)

    @classmethod
    def from_layout(cls, layout: TrapLayout, method: str = "slab", slab: float = DEFAULT_SLAB):
        return _compile(layout, method, float(slab))

    def _evaluate(self, P, V, want_pot):
        P = np.ascontiguousarray(np.atleast_2d(np.asarray(P, dtype=float)))
        _check_height(P[:, 1])
        n = len(P)
        E = np.zeros((n, 3))
        pot = np.zeros(n)
        scale = V / _TWO_PI
        if len(self.rects):
            r = self.rects.copy()
            r[:, 4] *= scale
            e = np.empty((n, 3))
            p = np.zeros(n)
            _rect_kernel(r, P, want_pot, e, p)
            E += e
            pot += p
        if len(self.edges):
            ed = self.edges.copy()
            ed[:, 4] *= scale
            e = np.empty((n, 3))
            _edge_kernel(ed, P, e)
            E += e
            if want_pot:
                p = np.zeros(n)
                _polygon_potential_kernel(self._pverts, self._pstarts, self._pweights * scale, P, p)
                pot += p
        if self.strips_layout is not None:
            # strips are evaluated per distinct cross-section
            zs = P[:, 2]
            for z in np.unique(zs):
                sel = zs == z
                strips = np.array(self.strips_layout.slice_at(float(z)), dtype=float).reshape(-1, 3)
                if len(strips) == 0:
                    continue
                p, e, _ = _strips_all(strips, P[sel, 0], P[sel, 1], V)
                E[sel] += e
                pot[sel] += p
        return pot, E

    def scaled_arrays(self, V: float = 1.0):
        """(rects, edges) with weights multiplied by V / 2π, for compiled kernels."""
        if self.strips_layout is not None:
            raise ValidationError("strip sources have no compiled kernel form")
        r = self.rects.copy()
        r[:, 4] *= V / _TWO_PI
        e = self.edges.copy()
        e[:, 4] *= V / _TWO_PI
        return r, e

    def field(self, P, V: float = 1.0) -> np.ndarray:
        """Electric field (n, 3) at points ``P`` (n, 3)."""
        return self._evaluate(P, V, False)[1]

    def potential(self, P, V: float = 1.0) -> np.ndarray:
        return self._evaluate(P, V, True)[0]

    def hessian(self, P, V: float = 1.0, step: float = HESSIAN_STEP) -> np.ndarray:
        """Potential hessian (n, 3, 3) by central differences of the field."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        n = len(P)
        shifts = np.concatenate([np.eye(3), -np.eye(3)]) * step
        pts = (P[:, None, :] + shifts[None]).reshape(-1, 3)
        E = self.field(pts, V).reshape(n, 6, 3)
        # H_ij = d(phi)/dx_i dx_j = -dE_j/dx_i
        H = -(E[:, :3, :] - E[:, 3:, :]) / (2 * step)
        return 0.5 * (H + np.swapaxes(H, 1, 2))

    def sample(self, point, V: float = 1.0, hessian: bool = True) -> FieldSample:
        P = np.asarray(point, dtype=float).reshape(1, 3)
        pot, E = self._evaluate(P, V, True)
        # keep the difference stencil above the chip plane
        H = self.hessian(P, V, min(HESSIAN_STEP, 0.5 * P[0, 1]))[0] if hessian else None
        return FieldSample(tuple(P[0]), float(pot[0]), E[0], H)


def _slab_rects(electrode, slab):
    v = electrode.array
    zk = np.unique(v[:, 1])
    rects = []
    for z0, z1 in zip(zk[:-1], zk[1:]):
        span = z1 - z0
        probe = [z0 + 1e-9 * span, 0.5 * (z0 + z1), z1 - 1e-9 * span]
        cuts = [electrode.intervals_at(z) for z in probe]
        straight = all(len(c) == len(cuts[0]) and np.allclose(c, cuts[0], rtol=0, atol=1e-15)
                       for c in cuts)
        if straight:
            rects.extend((x1, x2, z0, z1) for x1, x2 in cuts[1])
            continue
        nslab = int(np.ceil(span / slab - 1e-9))
        edges = np.linspace(z0, z1, nslab + 1)
        for s0, s1 in zip(edges[:-1], edges[1:]):
            rects.extend((x1, x2, s0, s1) for x1, x2 in electrode.intervals_at(0.5 * (s0 + s1)))
    return rects


@lru_cache(maxsize=64)
def _compile(layout: TrapLayout, method: str, slab: float) -> SourceModel:
    if method not in METHODS:
        raise ValidationError(f"unknown field method {method!r}; choose from {METHODS}")
    if method == "strip2d":
        return SourceModel(strips_layout=layout)
    if method == "slab":
        if not slab > 0:
            raise ValidationError("slab thickness must be > 0")
        rows = []
        for e in layout.driven:
            rows.extend((*r, e.rf_fraction) for r in _slab_rects(e, slab))
        return SourceModel(rects=np.array(rows, float).reshape(-1, 5))
    edges = []
    polys = []
    for e in layout.driven:
        v = e.array
        w = np.roll(v, -1, axis=0)
        edges.append(np.column_stack([v, w, np.full(len(v), e.rf_fraction)]))
        polys.append((v, e.rf_fraction))
    edges = np.concatenate(edges) if edges else np.zeros((0, 5))
    return SourceModel(edges=edges, polygons=polys)


def rf_field_at(layout: TrapLayout, drive, point, method: str = "slab",
                slab: float = DEFAULT_SLAB, hessian: bool = True) -> FieldSample:
    """RF field amplitude of ``layout`` under ``drive`` at a single point.

    Every driven electrode contributes rf_fraction · V_rf times its
    unit-voltage field.
    """
    src = SourceModel.from_layout(layout, method, slab)
    return src.sample(point, drive.V_rf, hessian=hessian)
