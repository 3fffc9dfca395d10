import dataclasses

import numpy as np
import pytest

from tpsrm import mesh as M
from tpsrm.geometry import build_cross_section


@pytest.fixture(scope="module")
def ref_mesh(geom_8_14):
    return M.generate_for(geom_8_14, "reference")


@pytest.fixture(scope="module")
def coarse_mesh(geom_8_14):
    return M.generate_for(geom_8_14, "coarse")


def test_reference_mesh_is_valid(ref_mesh):
    M.check_mesh(ref_mesh)
    assert np.all(ref_mesh.areas() > 0)
    assert 2e4 <= ref_mesh.n_triangles <= 6e4
    assert ref_mesh.band.divisions == 3360


def test_every_region_is_meshed(ref_mesh):
    counts = np.bincount(ref_mesh.regions, minlength=len(ref_mesh.region_info))
    assert np.all(counts > 0)
    assert len(ref_mesh.band_elements()) == 2 * ref_mesh.band.divisions


def test_twelve_tooth_mesh(geom_8_12):
    m = M.generate_for(geom_8_12, "coarse")
    M.check_mesh(m)
    assert m.band.divisions % 12 == 0


def test_band_divisions_must_fit_granularity(geom_8_14):
    cs = build_cross_section(geom_8_14, 0.0, M.resolution("coarse").discretization(geom_8_14))
    bad = dataclasses.replace(cs, band_divisions=cs.band_divisions + 1)
    with pytest.raises(M.MeshError):
        M.generate(bad, "coarse")


def test_off_grid_angle_rejected(geom_8_14):
    with pytest.raises(M.MeshError, match="band pitch"):
        M.generate_for(geom_8_14, "coarse", rotor_angle_deg=0.123)


def test_unknown_resolution():
    with pytest.raises(ValueError):
        M.resolution("ultra")
    assert M.resolution("720").band_divisions == 720


def test_full_turn_is_identity(coarse_mesh):
    m = M.rotate_band(coarse_mesh, coarse_mesh.band.divisions)
    assert np.allclose(m.nodes, coarse_mesh.nodes, atol=1e-15)
    assert np.array_equal(m.triangles, coarse_mesh.triangles)


def test_rotate_forward_and_back(coarse_mesh):
    for k in (1, 17, -5):
        m = M.rotate_band(M.rotate_band(coarse_mesh, k), -k)
        assert np.array_equal(m.nodes, coarse_mesh.nodes)
        assert np.array_equal(m.triangles, coarse_mesh.triangles)


def test_rotated_mesh_stays_conforming(coarse_mesh):
    for k in (1, 13, 200):
        m = M.rotate_band(coarse_mesh, k)
        M.check_mesh(m)
        assert m.rotor_angle_deg == pytest.approx(k * m.band.pitch_deg)
        assert len(M.boundary_edges(m)) == len(M.boundary_edges(coarse_mesh))


def test_band_matches_direct_generation(geom_8_14, coarse_mesh):
    k = 7
    angle = k * coarse_mesh.band.pitch_deg
    direct = M.generate_for(geom_8_14, "coarse", rotor_angle_deg=angle)
    moved = M.rotate_band(coarse_mesh, k)
    assert np.allclose(direct.nodes, moved.nodes, atol=1e-12)
    assert np.array_equal(direct.triangles, moved.triangles)


def test_iron_area_invariant(coarse_mesh):
    a0 = coarse_mesh.iron_area()
    for k in (3, 101):
        assert M.rotate_band(coarse_mesh, k).iron_area() == pytest.approx(a0, rel=1e-12)


def test_rotate_to_snaps(coarse_mesh):
    m = M.rotate_to(coarse_mesh, 1.01)
    assert m.rotor_angle_deg == pytest.approx(round(1.01 / m.band.pitch_deg) * m.band.pitch_deg)


def test_write_read_round_trip(tmp_path, coarse_mesh):
    m = M.rotate_band(coarse_mesh, 9)
    p = tmp_path / "mesh.txt"
    M.write_mesh(m, p)
    back = M.read_mesh(p)
    assert np.array_equal(back.nodes, m.nodes)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.regions, m.regions)
    assert back.region_info == m.region_info
    assert back.band.steps == m.band.steps


def test_bad_mesh_file(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("something else\n")
    with pytest.raises(M.MeshError):
        M.read_mesh(p)


def test_mesh_arrays_are_read_only(coarse_mesh):
    with pytest.raises(ValueError):
        coarse_mesh.nodes[0, 0] = 1.0
