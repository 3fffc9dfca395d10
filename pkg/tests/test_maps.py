import json

import numpy as np
import pytest

from tpsrm import maps as MP
from tpsrm.geometry import MotorGeometry


def test_grid_and_metadata(coarse_maps, geom_8_14):
    assert coarse_maps.currents[0] == 0.0 and coarse_maps.i_max == 16.5
    assert coarse_maps.angles[0] == 0.0 and coarse_maps.angles[-1] == 180.0
    assert coarse_maps.angle_step == pytest.approx(12.0)
    meta = coarse_maps.metadata
    assert meta["geometry_hash"] == geom_8_14.config_hash()
    assert meta["n_rotor_teeth"] == 14 and meta["band_divisions"] == 840


def test_zero_current_row_is_zero(coarse_maps):
    assert not np.any(coarse_maps.psi[0]) and not np.any(coarse_maps.torque[0])


def test_flux_linkage_monotone_in_current_and_angle(coarse_maps):
    assert np.all(np.diff(coarse_maps.psi, axis=0) > 0)
    assert np.all(coarse_maps.psi[1:, -1] >= coarse_maps.psi[1:, 0])


def test_motoring_torque_over_the_stroke(coarse_maps):
    t = coarse_maps.torque[coarse_maps.row(15.0)]
    assert np.all(t[1:-1] > 0)
    assert coarse_maps.mean_torque(15.0) == pytest.approx(8.3303, rel=5e-3)


def test_profile_is_not_mirror_symmetric(coarse_maps):
    # saturation shifts the peak away from mid-stroke
    t = coarse_maps.torque[coarse_maps.row(15.0)]
    assert not np.allclose(t, t[::-1], rtol=0.02)


def test_interpolation_reproduces_nodes(coarse_maps):
    for r in (1, 3, 5):
        for k in (0, 4, 15):
            q = coarse_maps.interpolate(coarse_maps.currents[r], coarse_maps.angles[k])
            assert q["psi"] == pytest.approx(coarse_maps.psi[r, k], rel=1e-12)
            assert q["torque"] == pytest.approx(coarse_maps.torque[r, k], rel=1e-12, abs=1e-15)


def test_interpolation_midpoint_and_derivatives(coarse_maps):
    m = coarse_maps
    i = 0.5 * (m.currents[2] + m.currents[3])
    t = 0.5 * (m.angles[6] + m.angles[7])
    q = m.interpolate(i, t)
    expected = m.psi[2:4, 6:8].mean()
    assert q["psi"] == pytest.approx(expected, rel=1e-12)
    d_i = (m.psi[3, 6:8].mean() - m.psi[2, 6:8].mean()) / (m.currents[3] - m.currents[2])
    d_t = (m.psi[2:4, 7].mean() - m.psi[2:4, 6].mean()) / m.angle_step
    assert q["dpsi_di"] == pytest.approx(d_i, rel=1e-12)
    assert q["dpsi_dtheta"] == pytest.approx(d_t, rel=1e-12)


def test_second_half_period_mirrors_torque(coarse_maps):
    a = coarse_maps.interpolate(12.0, 60.0)
    b = coarse_maps.interpolate(12.0, 300.0)
    assert b["psi"] == pytest.approx(a["psi"])
    assert b["torque"] == pytest.approx(-a["torque"])
    assert coarse_maps.interpolate(12.0, 420.0)["torque"] == pytest.approx(a["torque"])


def test_outside_hull_rejected(coarse_maps):
    with pytest.raises(MP.MapError):
        coarse_maps.interpolate(17.0, 30.0)
    with pytest.raises(MP.MapError):
        coarse_maps.interpolate(-0.1, 30.0)
    with pytest.raises(MP.MapError):
        coarse_maps.mean_torque(7.0)


def test_bad_grids_rejected():
    psi = np.zeros((2, 3))
    with pytest.raises(MP.MapError):
        MP.CharMaps(np.array([1.0, 2.0]), np.array([0.0, 90.0, 180.0]), psi, psi)
    with pytest.raises(MP.MapError):
        MP.CharMaps(np.array([0.0, 2.0]), np.array([0.0, 90.0, 170.0]), psi, psi)


def test_coenergy_loop_consistency(coarse_maps):
    for i in (9.0, 15.0):
        from_psi, from_torque = coarse_maps.loop_consistency(i)
        assert from_torque == pytest.approx(from_psi, rel=0.03)


def test_csv_round_trip(tmp_path, coarse_maps, geom_8_14):
    p = tmp_path / "maps.csv"
    coarse_maps.to_csv(p)
    back = MP.CharMaps.from_csv(p, geom_8_14)
    assert np.array_equal(back.psi, coarse_maps.psi)
    assert np.array_equal(back.torque, coarse_maps.torque)
    assert back.metadata == json.loads(json.dumps(coarse_maps.metadata))


def test_csv_for_other_geometry_refused(tmp_path, coarse_maps):
    p = tmp_path / "maps.csv"
    coarse_maps.to_csv(p)
    with pytest.raises(MP.MapError, match="built for geometry"):
        MP.CharMaps.from_csv(p, MotorGeometry.conventional_8_12())


def test_torque_density_examples():
    assert MP.torque_density(5.86, 0.12996) == pytest.approx(45.09, abs=0.005)
    assert MP.torque_density(3.76, 0.12996) == pytest.approx(28.93, abs=0.005)
    with pytest.raises(ValueError):
        MP.torque_density(1.0, 0.0)


def test_stroke_grid_must_land_on_band(geom_8_14):
    with pytest.raises(MP.MapError, match="band grid"):
        MP.build_maps(geom_8_14, 840, (0.0, 3.0), n_angles=17)


def test_svg_outputs(tmp_path, coarse_maps):
    MP.profile_svg({"8/14": coarse_maps}, tmp_path / "p.svg")
    MP.mean_peak_svg({"8/14": coarse_maps}, tmp_path / "m.svg")
    assert "<svg" in (tmp_path / "p.svg").read_text()
    assert "<svg" in (tmp_path / "m.svg").read_text()
