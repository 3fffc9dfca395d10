import filecmp
import json

import pytest

from tpsrm import cli
from tpsrm import config as C


@pytest.mark.parametrize("variant", ["proposed_8_14", "conventional_8_12"])
def test_packaged_matches_default(variant):
    cfg = C.packaged(variant)
    ref = C.MachineConfig.default(variant)
    assert cfg.geometry == ref.geometry and cfg.loss == ref.loss and cfg.drive == ref.drive
    assert cfg.study == ref.study


def test_round_trip(tmp_path):
    cfg = C.MachineConfig.default("conventional_8_12").with_design([5.0, 12.0, 10.0, 11.0, 16.0, 5.5])
    p = tmp_path / "m.ini"
    C.save(cfg, p)
    back = C.load(p)
    assert back.geometry == cfg.geometry and back.loss == cfg.loss and back.drive == cfg.drive
    assert C.dumps(back) == C.dumps(cfg)


def test_partial_file_takes_defaults():
    cfg = C.loads("[geometry]\nvariant = proposed_8_14\nrotor_pole_length_mm = 5.5\n[drive]\ndt = 2e-6\n")
    assert cfg.geometry.rotor_pole_length_mm == 5.5 and cfg.drive.dt == 2e-6
    assert cfg.loss.copper_resistance_per_phase_ohm == 0.406


@pytest.mark.parametrize("text, match", [
    ("[drive]\ndt = 1e-6\n", "variant is required"),
    ("[geometry]\nvariant = proposed_8_10\n", "unknown variant"),
    ("[geometry]\nvariant = proposed_8_14\nwidth = 3\n", "unknown key"),
    ("[geometry]\nvariant = proposed_8_14\nstator_pole_arc_deg = thirty\n", "cannot parse"),
    ("[geometry]\nvariant = proposed_8_14\nstator_pole_arc_deg = 30\n", r"\[geometry\].*overlap"),
    ("[geometry]\nvariant = proposed_8_14\n[study]\nspeed = 3\n", "unknown key"),
])
def test_bad_configs(text, match):
    with pytest.raises(C.ConfigError, match=match):
        C.loads(text)


def test_relative_bh_curve_path(tmp_path):
    from tpsrm.materials import BHCurve

    steel = BHCurve.m19()
    (tmp_path / "steel.txt").write_text(
        "\n".join(f"{h} {b}" for h, b in zip(steel.h.tolist(), steel.b.tolist())) + "\n")
    p = tmp_path / "m.ini"
    p.write_text("[geometry]\nvariant = proposed_8_14\n[materials]\nbh_curve = steel.txt\n")
    mats = C.load(p).materials()
    assert mats.stator.name == "steel"


# --------------------------------------------------------------------------- CLI


def test_cli_geometry(tmp_path):
    assert cli.main(["geometry", "proposed_8_14", str(tmp_path), "--check-bounds"]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["n_rotor_teeth"] == 14 and s["coil_regions"] == 16
    assert s["motor_volume_ml"] == pytest.approx(129.96, abs=0.005)
    assert (tmp_path / "cross_section.svg").exists()
    assert C.load(tmp_path / "geometry.ini").geometry == C.packaged("proposed_8_14").geometry


def test_cli_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[geometry]\nvariant = proposed_8_14\nstator_pole_arc_deg = 30\n")
    assert cli.main(["geometry", str(bad), str(tmp_path / "out")]) == cli.EXIT_CODES["config"]
    assert "error [config]" in capsys.readouterr().err
    assert cli.main(["geometry", str(tmp_path / "missing.ini"), str(tmp_path / "o")]) == 3


def test_cli_geometry_bounds_exit_code(tmp_path, capsys):
    p = tmp_path / "wide.ini"
    p.write_text("[geometry]\nvariant = proposed_8_14\nrotor_pole_length_mm = 9.5\n")
    assert cli.main(["geometry", str(p), str(tmp_path / "o"), "--check-bounds"]) == 4
    assert "error [geometry]" in capsys.readouterr().err


def test_cli_mesh(tmp_path):
    assert cli.main(["mesh", "conventional_8_12", str(tmp_path), "--resolution", "coarse",
                     "--rotor-angle", "3.0"]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["rotor_angle_deg"] == pytest.approx(3.0) and s["min_angle_deg"] >= 15.0
    assert (tmp_path / "mesh.txt").read_text().startswith("tpsrm-mesh 1")


def test_cli_mesh_failure_exit_code(tmp_path):
    assert cli.main(["mesh", "proposed_8_14", str(tmp_path), "--resolution", "coarse",
                     "--rotor-angle", "0.1"]) == cli.EXIT_CODES["mesh"]


def test_cli_bad_arguments():
    with pytest.raises(SystemExit):
        cli.main(["static", "proposed_8_14", "out", "--currents", "a,b"])
    with pytest.raises(SystemExit):
        cli.main(["nonsense"])


def test_cli_dynamic_with_prebuilt_maps(tmp_path, coarse_maps):
    maps = tmp_path / "maps.csv"
    coarse_maps.to_csv(maps)
    out = tmp_path / "dyn"
    assert cli.main(["dynamic", "proposed_8_14", str(out), "--maps", str(maps),
                     "--no-core-loss", "--stride", "50"]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["metrics"]["mean_torque_nm"] > 0
    assert {"trace.csv", "metrics.txt", "waveforms.svg"} <= {p.name for p in out.iterdir()}


def test_cli_dynamic_rejects_foreign_maps(tmp_path, coarse_maps):
    maps = tmp_path / "maps.csv"
    coarse_maps.to_csv(maps)
    assert cli.main(["dynamic", "conventional_8_12", str(tmp_path / "d"), "--maps",
                     str(maps)]) == cli.EXIT_CODES["static"]


def test_cli_optimize_small_budget(tmp_path):
    assert cli.main(["optimize", "proposed_8_14", str(tmp_path), "--population", "4",
                     "--generations", "1", "--seed", "5"]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["seed"] == 5 and s["evaluations"] == 4
    assert C.load(tmp_path / "optimized.ini").variant == "proposed_8_14"
    assert (tmp_path / "ga_log.csv").read_text().count("\n") == 2


def test_cli_compare_needs_both_machines(tmp_path):
    code = cli.main(["compare", "proposed_8_14", str(tmp_path), "--against", "proposed_8_14"])
    assert code == cli.EXIT_CODES["config"]


def test_cli_compare_is_deterministic(tmp_path):
    args = ["--resolution", "coarse", "--angles", "16", "--currents", "3,15",
            "--static-only", "--no-field-plots"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["compare", "proposed_8_14", str(a)] + args) == 0
    assert cli.main(["compare", "proposed_8_14", str(b)] + args) == 0
    names = sorted(p.name for p in a.iterdir())
    assert "static_torque.csv" in names and "summary.json" in names
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors
    rows = (a / "static_torque.csv").read_text().splitlines()
    assert len(rows) == 3
