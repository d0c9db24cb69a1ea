"""Planar electrode layouts in the gapless-plane picture.

Coordinates: the chip is the plane y = 0, x runs across the trap and z is
the transport axis. Electrode outlines are polygons in the (x, z) plane,
stored in meters with counterclockwise orientation (positive shoelace area
with x as the first coordinate). Any area not covered by an electrode is
grounded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from shapely.geometry import Polygon

from .constants import UM
from .errors import GeometryError, ValidationError

DEFAULT_AXIAL_EXTENT = 10e-3
_AREA_TOL = 1e-18  # m^2; overlaps below this count as shared edges


def signed_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, z = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(z, -1) - np.roll(x, -1) * z))


@dataclass(frozen=True)
class PlanarElectrode:
    id: str
    vertices: tuple[tuple[float, float], ...]
    rf_fraction: float = 1.0

    def __post_init__(self):
        verts = tuple((float(x), float(z)) for x, z in self.vertices)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "rf_fraction", float(self.rf_fraction))
        if len(verts) < 3:
            raise ValidationError(
                f"electrode {self.id!r}: polygon needs at least 3 vertices, got {len(verts)}")
        if not np.all(np.isfinite(verts)):
            raise ValidationError(f"electrode {self.id!r}: non-finite vertex")
        if not np.isfinite(self.rf_fraction):
            raise ValidationError(f"electrode {self.id!r}: non-finite rf_fraction")
        poly = Polygon(verts)
        if not poly.is_valid or not poly.exterior.is_simple:
            raise GeometryError(f"electrode {self.id!r}: polygon is not simple")
        area = signed_area(verts)
        if area <= 0:
            raise GeometryError(
                f"electrode {self.id!r}: vertices must be counterclockwise (signed area {area:.3e})")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def polygon(self) -> Polygon:
        return Polygon(self.vertices)

    def mirrored(self) -> "PlanarElectrode":
        """Reflection across x = 0 (orientation restored)."""
        return PlanarElectrode(self.id, tuple((-x, z) for x, z in reversed(self.vertices)),
                               self.rf_fraction)

    def intervals_at(self, z: float) -> list[tuple[float, float]]:
        """x-intervals covered by the electrode on the line z = const."""
        v = self.array
        a, b = v, np.roll(v, -1, axis=0)
        xs = []
        for (x1, z1), (x2, z2) in zip(a, b):
            if z1 == z2:
                continue
            # half-open rule avoids double counting shared vertices
            if (z1 <= z < z2) or (z2 <= z < z1):
                xs.append(x1 + (z - z1) * (x2 - x1) / (z2 - z1))
        xs.sort()
        return [(xs[i], xs[i + 1]) for i in range(0, len(xs) - 1, 2)]


def _canonical(electrode: PlanarElectrode, ndigits: int = 12):
    verts = [(round(x, ndigits) + 0.0, round(z, ndigits) + 0.0) for x, z in electrode.vertices]
    k = min(range(len(verts)), key=lambda i: verts[i])
    return (round(electrode.rf_fraction, 12), tuple(verts[k:] + verts[:k]))


@dataclass(frozen=True)
class TrapLayout:
    electrodes: tuple[PlanarElectrode, ...]

    def __post_init__(self):
        object.__setattr__(self, "electrodes", tuple(self.electrodes))
        ids = [e.id for e in self.electrodes]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise ValidationError(f"duplicate electrode ids: {sorted(dup)}")
        polys = [e.polygon for e in self.electrodes]
        for i in range(len(polys)):
            for j in range(i + 1, len(polys)):
                if polys[i].intersection(polys[j]).area > _AREA_TOL:
                    raise GeometryError(
                        f"electrodes {ids[i]!r} and {ids[j]!r} overlap")

    def __iter__(self):
        return iter(self.electrodes)

    def __len__(self):
        return len(self.electrodes)

    def __getitem__(self, key):
        if isinstance(key, str):
            for e in self.electrodes:
                if e.id == key:
                    return e
            raise KeyError(key)
        return self.electrodes[key]

    @property
    def driven(self) -> tuple[PlanarElectrode, ...]:
        """Electrodes that take part in the RF superposition."""
        return tuple(e for e in self.electrodes if e.rf_fraction != 0.0)

    def mirrored(self) -> "TrapLayout":
        return TrapLayout(tuple(e.mirrored() for e in self.electrodes))

    def is_mirror_symmetric(self) -> bool:
        """True if reflecting across x = 0 reproduces the driven electrode set."""
        mine = sorted(_canonical(e) for e in self.driven)
        refl = sorted(_canonical(e.mirrored()) for e in self.driven)
        return mine == refl

    def is_axially_uniform(self) -> bool:
        """True if every driven electrode is a rectangle over one common z-range."""
        spans = set()
        for e in self.driven:
            v = e.array
            if len(v) != 4 or len(np.unique(v[:, 0])) != 2 or len(np.unique(v[:, 1])) != 2:
                return False
            spans.add((float(v[:, 1].min()), float(v[:, 1].max())))
        return len(spans) <= 1

    def slice_at(self, z: float) -> list[tuple[float, float, float]]:
        """Driven (x1, x2, rf_fraction) strips of the cross-section at ``z``."""
        out = []
        for e in self.driven:
            out.extend((x1, x2, e.rf_fraction) for x1, x2 in e.intervals_at(z))
        return out

    def z_range(self) -> tuple[float, float]:
        zs = np.concatenate([e.array[:, 1] for e in self.electrodes])
        return float(zs.min()), float(zs.max())

    def to_dict(self) -> dict:
        return {"electrodes": [
            {"id": e.id, "rf_fraction": e.rf_fraction,
             "vertices_um": [[x / UM, z / UM] for x, z in e.vertices]}
            for e in self.electrodes]}

    @classmethod
    def from_dict(cls, doc: dict) -> "TrapLayout":
        if not isinstance(doc, dict) or "electrodes" not in doc:
            raise ValidationError("layout document needs an 'electrodes' list")
        extra = set(doc) - {"electrodes", "schema_version", "meta"}
        if extra:
            raise ValidationError(f"unknown layout keys: {sorted(extra)}")
        electrodes = []
        for k, item in enumerate(doc["electrodes"]):
            try:
                eid = str(item["id"])
                verts = [(float(x) * UM, float(z) * UM) for x, z in item["vertices_um"]]
                frac = float(item.get("rf_fraction", 1.0))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"electrodes[{k}]: malformed entry ({exc})") from exc
            electrodes.append(PlanarElectrode(eid, verts, frac))
        return cls(tuple(electrodes))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# --- five-wire traps -------------------------------------------------------

class Segmentation(str, Enum):
    WHOLE_CENTRAL = "whole-central"
    THREE_EQUAL_SEGMENTS = "three-equal-segments"


@dataclass(frozen=True)
class FiveWireSpec:
    a: float
    b: float
    c: float
    segmentation: Segmentation = Segmentation.WHOLE_CENTRAL
    alpha: float = 0.0
    axial_extent: float | None = None  # default: max(10 mm, 100 * widest electrode)

    def __post_init__(self):
        object.__setattr__(self, "segmentation", Segmentation(self.segmentation))
        if self.axial_extent is None:
            widest = max(self.a, self.b, self.c)
            object.__setattr__(self, "axial_extent", max(DEFAULT_AXIAL_EXTENT, 100 * widest))
        for name in ("a", "b", "c"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"FiveWireSpec.{name} must be > 0, got {getattr(self, name)}")
        if not np.isfinite(self.alpha):
            raise ValidationError("FiveWireSpec.alpha must be finite")
        if self.axial_extent < 100 * max(self.a, self.b, self.c):
            raise ValidationError(
                "FiveWireSpec.axial_extent must be >= 100*max(a, b, c) for the 2D limit")


def _rect(eid, x1, x2, z1, z2, frac):
    return PlanarElectrode(eid, ((x1, z1), (x2, z1), (x2, z2), (x1, z2)), frac)


def build_five_wire(spec: FiveWireSpec) -> TrapLayout:
    """Standard five-wire layout with optional RF drive on the central electrode."""
    a, b, c, L = spec.a, spec.b, spec.c, spec.axial_extent
    els = [_rect("rf_right", a / 2, a / 2 + b, -L, L, 1.0),
           _rect("rf_left", -a / 2 - c, -a / 2, -L, L, 1.0)]
    if spec.alpha == 0:
        # an undriven central electrode is plain ground
        return TrapLayout(tuple(els))
    if spec.segmentation is Segmentation.WHOLE_CENTRAL:
        els.append(_rect("center", -a / 2, a / 2, -L, L, spec.alpha))
    else:
        # middle third stays grounded, so it is not part of the layout
        els.append(_rect("seg_left", -a / 2, -a / 6, -L, L, spec.alpha))
        els.append(_rect("seg_right", a / 6, a / 2, -L, L, spec.alpha))
    return TrapLayout(tuple(els))


def five_wire_height(a: float, b: float) -> float:
    """RF-null height of a symmetric (b = c) gapless five-wire trap."""
    return float(np.sqrt(a * (a + 2 * b)) / 2)


# --- escalator -------------------------------------------------------------

@dataclass(frozen=True)
class EscalatorSpec:
    a1: float
    b1: float
    a2: float
    b2: float
    D: float
    n_control: int = 34
    deviation_bound: float = 20 * UM
    axial_extent: float = DEFAULT_AXIAL_EXTENT

    def __post_init__(self):
        for name in ("a1", "b1", "a2", "b2", "D"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"EscalatorSpec.{name} must be > 0, got {getattr(self, name)}")
        if int(self.n_control) != self.n_control or self.n_control < 2:
            raise ValidationError("EscalatorSpec.n_control must be an integer >= 2")
        if not self.deviation_bound > 0:
            raise ValidationError("EscalatorSpec.deviation_bound must be > 0")
        if self.axial_extent <= self.D:
            raise ValidationError("EscalatorSpec.axial_extent must exceed D")

    def control_z(self) -> np.ndarray:
        return np.linspace(-self.D, self.D, self.n_control)

    def zero_offsets(self) -> "ControlPointSet":
        return ControlPointSet(tuple(self.control_z()), (0.0,) * self.n_control)

    def straight_inner(self, z) -> np.ndarray:
        """Inner RF boundary (half the central width) of the unmodified ramp."""
        t = np.clip((np.asarray(z, dtype=float) + self.D) / (2 * self.D), 0.0, 1.0)
        return (self.a1 + (self.a2 - self.a1) * t) / 2

    def outer(self, z) -> np.ndarray:
        t = np.clip((np.asarray(z, dtype=float) + self.D) / (2 * self.D), 0.0, 1.0)
        return (self.a1 + (self.a2 - self.a1) * t) / 2 + self.b1 + (self.b2 - self.b1) * t

    def replace(self, **changes) -> "EscalatorSpec":
        from dataclasses import replace
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"a1_um": self.a1 / UM, "b1_um": self.b1 / UM, "a2_um": self.a2 / UM,
                "b2_um": self.b2 / UM, "D_um": self.D / UM, "n_control": self.n_control,
                "deviation_bound_um": self.deviation_bound / UM,
                "axial_extent_um": self.axial_extent / UM}

    @classmethod
    def from_dict(cls, doc: dict) -> "EscalatorSpec":
        known = {"a1_um", "b1_um", "a2_um", "b2_um", "D_um", "n_control",
                 "deviation_bound_um", "axial_extent_um", "schema_version"}
        extra = set(doc) - known
        if extra:
            raise ValidationError(f"unknown escalator spec keys: {sorted(extra)}")
        try:
            kw = dict(a1=doc["a1_um"] * UM, b1=doc["b1_um"] * UM, a2=doc["a2_um"] * UM,
                      b2=doc["b2_um"] * UM, D=doc["D_um"] * UM)
        except KeyError as exc:
            raise ValidationError(f"escalator spec missing key {exc}") from exc
        if "n_control" in doc:
            kw["n_control"] = int(doc["n_control"])
        if "deviation_bound_um" in doc:
            kw["deviation_bound"] = doc["deviation_bound_um"] * UM
        if "axial_extent_um" in doc:
            kw["axial_extent"] = doc["axial_extent_um"] * UM
        return cls(**kw)


@dataclass(frozen=True)
class ControlPointSet:
    z_positions: tuple[float, ...]
    x_offsets: tuple[float, ...] = field(default=())

    def __post_init__(self):
        z = tuple(float(v) for v in self.z_positions)
        x = tuple(float(v) for v in self.x_offsets) if self.x_offsets else (0.0,) * len(z)
        object.__setattr__(self, "z_positions", z)
        object.__setattr__(self, "x_offsets", x)
        if len(z) != len(x):
            raise ValidationError(
                f"control point lengths differ: {len(z)} z positions, {len(x)} offsets")
        if len(z) < 2 or np.any(np.diff(z) <= 0):
            raise ValidationError("control-point z positions must be strictly increasing")

    def with_offsets(self, offsets: Sequence[float]) -> "ControlPointSet":
        return ControlPointSet(self.z_positions, tuple(offsets))


def _dedupe(points: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for p in points:
        if not out or (abs(p[0] - out[-1][0]) > 1e-15 or abs(p[1] - out[-1][1]) > 1e-15):
            out.append(p)
    return out


def build_escalator(spec: EscalatorSpec, offsets: ControlPointSet | None = None) -> TrapLayout:
    """Two mirrored RF rails joining trap (a1, b1) at z < -D to trap (a2, b2) at z > D.

    Inside [-D, D] the inner rail boundary runs piecewise-linearly through
    the control points (straight ramp plus offset); the outer boundary is
    the straight ramp of the rail widths.
    """
    if offsets is None:
        offsets = spec.zero_offsets()
    z = np.asarray(offsets.z_positions)
    dx = np.asarray(offsets.x_offsets)
    D, L = spec.D, spec.axial_extent
    if len(z) != spec.n_control:
        raise ValidationError(f"expected {spec.n_control} control points, got {len(z)}")
    if abs(z[0] + D) > 1e-12 or abs(z[-1] - D) > 1e-12:
        raise ValidationError("control-point z positions must span [-D, D]")
    bad = np.flatnonzero(np.abs(dx) > spec.deviation_bound * (1 + 1e-9))
    if bad.size:
        raise ValidationError(
            f"control offsets exceed deviation bound {spec.deviation_bound:.3g} m at indices {bad.tolist()}")

    x_in = spec.straight_inner(z) + dx
    x_out = spec.outer(z)
    if np.any(x_in <= 0):
        raise GeometryError("inner RF boundary crosses the symmetry plane x = 0")
    if np.any(x_in >= x_out):
        raise GeometryError("inner RF boundary crosses the outer boundary")

    inner = [(spec.a1 / 2, -L), (spec.a1 / 2, -D)] + list(zip(x_in, z)) + \
            [(spec.a2 / 2, D), (spec.a2 / 2, L)]
    outer = [(spec.a1 / 2 + spec.b1, -L), (spec.a1 / 2 + spec.b1, -D),
             (spec.a2 / 2 + spec.b2, D), (spec.a2 / 2 + spec.b2, L)]
    # counterclockwise: up the outer edge, back down the inner edge
    right = PlanarElectrode("rf_right", _dedupe(outer + inner[::-1]), 1.0)
    left = right.mirrored()
    left = PlanarElectrode("rf_left", left.vertices, 1.0)
    return TrapLayout((right, left))
