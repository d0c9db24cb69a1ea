import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trapforge.errors import GeometryError, ValidationError
from trapforge.geometry import (ControlPointSet, EscalatorSpec, FiveWireSpec, PlanarElectrode,
                                Segmentation, TrapLayout, build_escalator, build_five_wire,
                                five_wire_height, signed_area)

UM = 1e-6
WC, SEG = Segmentation.WHOLE_CENTRAL, Segmentation.THREE_EQUAL_SEGMENTS
widths = st.floats(20, 300).map(lambda v: v * UM)
alphas = st.floats(-1.9, 0.6).filter(lambda a: abs(a) > 1e-6)


def square(eid, x0, z0, s=10 * UM, frac=1.0):
    return PlanarElectrode(eid, [(x0, z0), (x0 + s, z0), (x0 + s, z0 + s), (x0, z0 + s)], frac)


def test_electrode_needs_three_vertices():
    with pytest.raises(ValidationError):
        PlanarElectrode("e", [(0, 0), (1e-6, 0)], 1.0)


def test_electrode_rejects_clockwise():
    with pytest.raises(GeometryError):
        PlanarElectrode("e", [(0, 0), (0, 1e-5), (1e-5, 1e-5), (1e-5, 0)], 1.0)


def test_electrode_rejects_self_intersection():
    with pytest.raises(GeometryError):
        PlanarElectrode("bow", [(0, 0), (1e-5, 1e-5), (1e-5, 0), (0, 1e-5)], 1.0)


def test_overlap_names_both_ids():
    with pytest.raises(GeometryError) as exc:
        TrapLayout((square("alpha", 0, 0), square("beta", 5 * UM, 5 * UM)))
    assert "alpha" in str(exc.value) and "beta" in str(exc.value)


def test_touching_electrodes_are_allowed():
    TrapLayout((square("a", 0, 0), square("b", 10 * UM, 0)))


def test_duplicate_ids_rejected():
    with pytest.raises(ValidationError):
        TrapLayout((square("a", 0, 0), square("a", 50 * UM, 0)))


def test_five_wire_undriven_center_is_ground():
    lay = build_five_wire(FiveWireSpec(100 * UM, 100 * UM, 100 * UM, WC, 0.0))
    assert len(lay) == 2 and len(lay.driven) == 2
    assert {e.id for e in lay} == {"rf_left", "rf_right"}
    assert lay["rf_right"].intervals_at(0.0) == [pytest.approx((50 * UM, 150 * UM))]


def test_segmented_outer_thirds():
    lay = build_five_wire(FiveWireSpec(100 * UM, 100 * UM, 100 * UM, SEG, 0.3))
    assert len(lay.driven) == 4
    for eid in ("seg_left", "seg_right"):
        (x1, x2), = lay[eid].intervals_at(0.0)
        assert x2 - x1 == pytest.approx(100 * UM / 3, rel=1e-12)
        assert lay[eid].rf_fraction == 0.3


def test_segmented_and_whole_agree_at_zero_alpha():
    a = build_five_wire(FiveWireSpec(100 * UM, 90 * UM, 90 * UM, WC, 0.0))
    b = build_five_wire(FiveWireSpec(100 * UM, 90 * UM, 90 * UM, SEG, 0.0))
    assert {(e.vertices, e.rf_fraction) for e in a.driven} == \
           {(e.vertices, e.rf_fraction) for e in b.driven}


@given(widths, widths, alphas, st.sampled_from([WC, SEG]))
def test_five_wire_mirror_symmetric(a, b, alpha, seg):
    lay = build_five_wire(FiveWireSpec(a, b, b, seg, alpha))
    assert lay.is_mirror_symmetric()
    assert lay.is_axially_uniform()
    for e in lay:
        assert signed_area(e.vertices) > 0


def test_axial_extent_scales_with_width():
    spec = FiveWireSpec(300 * UM, 300 * UM, 300 * UM, WC, 0.0)
    assert spec.axial_extent >= 100 * 300 * UM
    with pytest.raises(ValidationError):
        FiveWireSpec(100 * UM, 100 * UM, 100 * UM, WC, 0.0, axial_extent=1e-3)


def test_five_wire_height_equal_widths():
    assert five_wire_height(100 * UM, 100 * UM) == pytest.approx(np.sqrt(3) / 2 * 100 * UM)


def test_layout_dict_round_trip():
    lay = build_five_wire(FiveWireSpec(100 * UM, 80 * UM, 80 * UM, SEG, 0.4))
    back = TrapLayout.from_dict(json.loads(lay.to_json()))
    for e in lay:
        assert np.allclose(back[e.id].array, e.array, rtol=1e-15, atol=0)
        assert back[e.id].rf_fraction == e.rf_fraction


def test_layout_unknown_key_rejected():
    doc = build_five_wire(FiveWireSpec(100 * UM, 100 * UM, 100 * UM, WC, 0.0)).to_dict()
    doc["colour"] = "red"
    with pytest.raises(ValidationError):
        TrapLayout.from_dict(doc)


# --- escalator geometry ---------------------------------------------------------

ESC = EscalatorSpec(80 * UM, 65 * UM, 155 * UM, 139 * UM, 300 * UM)


def test_escalator_far_cross_sections():
    lay = build_escalator(ESC)
    (x1, x2), = lay["rf_right"].intervals_at(-2 * ESC.D)
    assert 2 * x1 == pytest.approx(80 * UM) and x2 - x1 == pytest.approx(65 * UM)
    (x1, x2), = lay["rf_right"].intervals_at(2 * ESC.D)
    assert 2 * x1 == pytest.approx(155 * UM) and x2 - x1 == pytest.approx(139 * UM)


def test_escalator_zero_offsets_follow_straight_ramp():
    lay = build_escalator(ESC)
    for z in np.linspace(-ESC.D, ESC.D, 7)[1:-1]:
        (x1, x2), = lay["rf_right"].intervals_at(z)
        assert x1 == pytest.approx(float(ESC.straight_inner(z)), rel=1e-12)
        assert x2 == pytest.approx(float(ESC.outer(z)), rel=1e-12)


@given(st.lists(st.floats(-20, 20), min_size=34, max_size=34))
def test_escalator_mirror_symmetric_under_offsets(dx):
    cps = ESC.zero_offsets().with_offsets(np.array(dx) * UM)
    lay = build_escalator(ESC, cps)
    assert lay.is_mirror_symmetric()
    assert signed_area(lay["rf_right"].vertices) > 0


def test_escalator_control_points_on_boundary():
    dx = np.linspace(-10, 10, 34) * UM
    cps = ESC.zero_offsets().with_offsets(dx)
    lay = build_escalator(ESC, cps)
    z = np.asarray(cps.z_positions)
    k = 5
    (x1, _), = lay["rf_right"].intervals_at(z[k])
    assert x1 == pytest.approx(float(ESC.straight_inner(z[k])) + dx[k], rel=1e-12)


def test_escalator_offset_bound_enforced():
    dx = np.zeros(34)
    dx[3] = 21 * UM
    with pytest.raises(ValidationError):
        build_escalator(ESC, ESC.zero_offsets().with_offsets(dx))


def test_escalator_wrong_count():
    with pytest.raises(ValidationError):
        build_escalator(ESC, ControlPointSet(tuple(np.linspace(-ESC.D, ESC.D, 10))))


def test_escalator_spec_round_trip():
    back = EscalatorSpec.from_dict(ESC.to_dict())
    for k in ("a1", "b1", "a2", "b2", "D", "deviation_bound", "axial_extent"):
        assert getattr(back, k) == pytest.approx(getattr(ESC, k), rel=1e-15)
    assert back.n_control == ESC.n_control
