import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpsrm.geometry import (DESIGN_BOUNDS, DESIGN_FIELDS, GeometryError, MotorGeometry,
                            build_cross_section, cross_section_svg, elec_to_mech,
                            geometry_violations, layout_from_rotor_teeth, mech_to_elec,
                            solve_rotor_tooth_count)


def test_layout_for_fourteen_teeth():
    lay = layout_from_rotor_teeth(14)
    assert lay.rotor_pole_pitch_deg == pytest.approx(25.7143, abs=1e-4)
    assert lay.ccore_tooth_span_deg == pytest.approx(51.4286, abs=1e-4)
    assert lay.inter_core_span_deg == pytest.approx(38.5714, abs=1e-4)
    assert lay.ccore_tooth_span_deg + lay.inter_core_span_deg == pytest.approx(90.0, abs=1e-12)
    assert lay.n_stator_teeth == 8 and lay.n_ccores == 4


def test_layout_twelve_and_closure_check():
    assert layout_from_rotor_teeth(12).rotor_pole_pitch_deg == 30.0
    with pytest.raises(GeometryError):
        layout_from_rotor_teeth(12, check_closure=True)
    with pytest.raises(GeometryError):
        layout_from_rotor_teeth(1)


def test_rotor_tooth_count_is_exact_integer():
    n = solve_rotor_tooth_count()
    assert n == 14 and isinstance(n, int)
    assert 4 * (720 / n + 540 / n) == pytest.approx(360.0, abs=1e-12)


@given(st.integers(min_value=2, max_value=400))
def test_closure_identity_holds_for_any_count(n):
    lay = layout_from_rotor_teeth(n)
    # alpha + gamma = 1260 / n, so four cores close exactly when n = 14
    assert lay.closes() == (n == 14)
    assert lay.ccore_tooth_span_deg == pytest.approx(2 * lay.rotor_pole_pitch_deg, rel=1e-15)


def test_mech_elec_conversion():
    assert mech_to_elec(360 / 14, 14) == 0.0
    assert mech_to_elec(180 / 14, 14) == pytest.approx(180.0, abs=1e-9)
    assert mech_to_elec(0.0, 14) == 0.0
    assert elec_to_mech(180.0, 14) == pytest.approx(12.8571, abs=1e-4)


def test_published_dimensions_are_consistent(geom_8_14, geom_8_12):
    for g in (geom_8_14, geom_8_12):
        assert g.rotor_outer_diameter_mm + 2 * g.airgap_mm == pytest.approx(80.04)
        assert geometry_violations(g, check_bounds=True) == []
        assert g.motor_volume_l() * 1e3 == pytest.approx(129.96, abs=1e-9)


def test_cross_section_counts(geom_8_14):
    cs = build_cross_section(geom_8_14)
    assert cs.count("stator_iron") == 4
    teeth = [r for r in cs.regions if r.tag == "rotor_iron"
             and np.hypot(*r.polygon.T).max() > geom_8_14.rotor_radius - 1e-9]
    assert len(teeth) == 14
    assert cs.count("coil") == 16
    # two coil regions per tooth (one each side) with opposite signs inside a C-core
    coils = [r for r in cs.regions if r.tag == "coil"]
    by_tooth = {}
    for r in coils:
        by_tooth.setdefault(r.tooth, set()).add(r.polarity)
    assert all(v == {1, -1} for v in by_tooth.values())


def test_ccore_teeth_have_opposite_polarity_and_phase_pairs_are_opposite(geom_8_14):
    teeth = geom_8_14.layout.teeth()
    for core in range(4):
        a, b = [t for t in teeth if t.core == core]
        assert a.phase == b.phase and a.polarity == -b.polarity
    for phase in "AB":
        centres = sorted({(t.angle_deg + (25.714285714285715 if t.polarity > 0 else -25.714285714285715))
                          % 360 for t in teeth if t.phase == phase})
        assert len(centres) == 2
        assert (centres[1] - centres[0]) == pytest.approx(180.0, abs=1e-9)


def test_half_pitch_aligns_phase_b(geom_8_14):
    lay = geom_8_14.layout
    assert lay.phase_offset_deg("B") == pytest.approx(lay.rotor_pole_pitch_deg / 2)
    rotor_teeth = np.arange(14) * lay.rotor_pole_pitch_deg + lay.rotor_pole_pitch_deg / 2
    for t in lay.teeth():
        gap = np.min(np.abs((rotor_teeth - t.angle_deg + 180) % 360 - 180))
        if t.phase == "B":
            assert gap == pytest.approx(0.0, abs=1e-9)
        else:
            assert gap == pytest.approx(lay.rotor_pole_pitch_deg / 2, abs=1e-9)


def test_overlapping_teeth_rejected(geom_8_14):
    bad = geom_8_14.with_design([5.18, 11.8, 30.0, 9.07, 16.64, 5.79])
    with pytest.raises(GeometryError, match="adjacent-tooth overlap"):
        build_cross_section(bad)


def test_negative_yoke_and_taper_rejected(geom_8_14):
    assert any("negative yoke" in m for m in geometry_violations(
        geom_8_14.with_design([0.0, 11.8, 12.85, 9.07, 16.64, 5.79])))
    assert any("taper" in m for m in geometry_violations(
        geom_8_14.with_design([5.18, 11.8, 12.85, 17.0, 16.64, 5.79])))


def test_bounds_check_is_opt_in(geom_8_14):
    g = geom_8_14.with_design([5.0, 11.98, 8.0, 8.0, 9.5, 5.0])
    assert geometry_violations(g) == []
    g2 = geom_8_14.with_design([5.18, 11.8, 12.85, 9.07, 16.64, 9.5])
    assert any("outside" in m for m in geometry_violations(g2, check_bounds=True))


def test_rotor_periodicity(geom_8_14):
    pitch = geom_8_14.layout.rotor_pole_pitch_deg
    a = build_cross_section(geom_8_14, 3.0)
    b = build_cross_section(geom_8_14, 3.0 + pitch)
    ra = [r.polygon for r in a.regions if r.side == "rotor"]
    rb = [r.polygon for r in b.regions if r.side == "rotor"]
    # copy j of b coincides with copy j+1 of a (shafts and iron alike)
    per_tooth = len(ra) // 14
    for j in range(14):
        for s in range(per_tooth):
            pa = ra[((j + 1) % 14) * per_tooth + s]
            pb = rb[j * per_tooth + s]
            assert np.allclose(pa, pb, atol=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(min_value=-180, max_value=180, allow_nan=False))
def test_areas_invariant_under_rotation(angle):
    g = MotorGeometry.proposed_8_14()
    ref = build_cross_section(g, 0.0)
    cs = build_cross_section(g, angle)
    assert cs.iron_area() == pytest.approx(ref.iron_area(), rel=1e-9)
    assert cs.area() == pytest.approx(ref.area(), rel=1e-9)


def test_regions_tile_the_disc(geom_8_12):
    cs = build_cross_section(geom_8_12)
    assert all(r.area > 0 for r in cs.regions)
    # arcs are chords, so the total falls short of the circle by the chord deficit only
    assert cs.area() == pytest.approx(math.pi * cs.outer_radius ** 2, rel=1e-3)
    assert cs.area() < math.pi * cs.outer_radius ** 2


def test_config_hash_tracks_design(geom_8_14):
    assert geom_8_14.config_hash() == MotorGeometry.proposed_8_14().config_hash()
    assert geom_8_14.config_hash() != geom_8_14.with_design(
        [5.2, 11.8, 12.85, 9.07, 16.64, 5.79]).config_hash()


def test_svg_export_labels_coils(geom_8_14):
    svg = cross_section_svg(build_cross_section(geom_8_14))
    assert svg.startswith("<svg") and svg.count("coil_plus") == 8 and svg.count("coil_minus") == 8


def test_bounds_table_shape():
    for v in DESIGN_BOUNDS.values():
        assert tuple(v) == DESIGN_FIELDS
        assert all(lo < hi for lo, hi in v.values())
