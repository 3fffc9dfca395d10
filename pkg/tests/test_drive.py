import dataclasses

import numpy as np
import pytest

from tpsrm import _kernels
from tpsrm import drive as D
from tpsrm.config import MachineConfig
from tpsrm.drive import ChcConfig, Mode, step_controller
from tpsrm.maps import CharMaps, MapError
from tpsrm.materials import LossModel


@pytest.fixture(scope="module")
def machine():
    return MachineConfig.default("proposed_8_14")


@pytest.fixture(scope="module")
def trace(coarse_maps, machine):
    return D.simulate(coarse_maps, machine.loss, machine.drive, geom=machine.geometry)


def test_controller_examples():
    cfg = ChcConfig(i_ref=15.0, band_delta=0.4)
    assert step_controller(14.7, Mode.IDLE, cfg, True) == Mode.MAGNETIZE
    assert step_controller(15.3, Mode.MAGNETIZE, cfg, True) == Mode.DEMAGNETIZE
    assert step_controller(15.0, Mode.DEMAGNETIZE, cfg, True) == Mode.DEMAGNETIZE
    assert step_controller(15.0, Mode.MAGNETIZE, cfg, True) == Mode.MAGNETIZE
    assert step_controller(15.0, Mode.IDLE, cfg, True) == Mode.MAGNETIZE
    assert step_controller(3.0, Mode.MAGNETIZE, cfg, False) == Mode.DEMAGNETIZE
    assert step_controller(0.0, Mode.DEMAGNETIZE, cfg, False) == Mode.IDLE


def test_conduction_window():
    cfg = ChcConfig(turn_on_angle_elec_deg=10.0, conduction_span_elec_deg=150.0)
    assert cfg.in_conduction(10.0) and cfg.in_conduction(159.9)
    assert not cfg.in_conduction(160.0) and not cfg.in_conduction(5.0)
    assert cfg.in_conduction(370.0)


def test_bad_controller_settings():
    with pytest.raises(ValueError):
        ChcConfig(band_delta=0.0)
    with pytest.raises(ValueError):
        ChcConfig(dt=0.0)
    with pytest.raises(ValueError):
        ChcConfig(conduction_span_elec_deg=400.0)


def test_zero_dc_link_gives_no_current(coarse_maps, machine):
    tr = D.simulate(coarse_maps, machine.loss, dataclasses.replace(machine.drive, dc_link_v=0.0),
                    periods=1, n_rotor_teeth=14)
    assert not np.any(tr.i) and not np.any(tr.total_torque)


def test_maps_without_headroom_rejected(coarse_maps, machine):
    short = CharMaps(coarse_maps.currents[:-1], coarse_maps.angles, coarse_maps.psi[:-1],
                     coarse_maps.torque[:-1], dict(coarse_maps.metadata))
    with pytest.raises(MapError, match="controller needs"):
        D.simulate(short, machine.loss, machine.drive, n_rotor_teeth=14)


def test_current_leaving_the_map_is_reported(coarse_maps, machine):
    # a coarse step at high voltage overshoots the 16.5 A headroom row
    cfg = dataclasses.replace(machine.drive, dt=2e-5, dc_link_v=600.0)
    with pytest.raises(D.DriveError, match="left the map range"):
        D.simulate(coarse_maps, machine.loss, cfg, n_rotor_teeth=14)


def test_ripple_of_constant_torque_is_zero(trace, machine):
    flat = dataclasses.replace(trace, torque=np.full_like(trace.torque, 2.5))
    m = D.metrics(flat, machine.loss)
    assert m.ripple_pct == 0.0 and m.mean_torque_nm == pytest.approx(5.0)


def test_metric_arithmetic(trace, machine):
    m = D.metrics(trace, machine.loss, core_loss_w=5.0)
    assert m.output_power_w == pytest.approx(m.mean_torque_nm * 2 * np.pi * 600 / 60, rel=1e-12)
    assert m.input_power_w == pytest.approx(m.output_power_w + m.copper_loss_w + 5.0, rel=1e-12)
    assert m.efficiency_pct == pytest.approx(100 * m.output_power_w / m.input_power_w, rel=1e-12)
    assert m.torque_per_ampere == pytest.approx(m.mean_torque_nm / m.i_rms_a, rel=1e-12)
    assert m.frequency_hz == pytest.approx(140.0)
    # the published record closes the same way
    assert 5.86 * 2 * np.pi * 10 == pytest.approx(368.19, abs=0.1)
    assert 368.19 + 71.19 + 4.82 == pytest.approx(444.2, abs=0.01)
    assert 100 * 368.19 / 444.2 == pytest.approx(82.89, abs=0.005)


def test_current_held_in_band(trace, coarse_maps):
    margin = D.slew_margin(trace, coarse_maps)
    wins = D.conduction_windows(trace)
    assert len(wins) >= 4 and all(w.entered for w in wins)
    for w in wins:
        assert w.worst_excursion_a <= margin
        assert w.switching_events > 10


def test_phases_are_symmetric(trace, machine):
    m = D.metrics(trace, machine.loss)
    sl = trace.period_slice()
    rms = np.sqrt(np.mean(trace.i[sl] ** 2, axis=0))
    assert rms[1] == pytest.approx(rms[0], rel=0.01)
    mean_t = trace.torque[sl].mean(axis=0)
    assert mean_t[1] == pytest.approx(mean_t[0], rel=0.02)
    assert m.mean_torque_nm == pytest.approx(mean_t.sum(), rel=1e-12)


def test_energy_balance_on_coarse_maps(trace, machine):
    assert D.metrics(trace, machine.loss).energy_balance_error <= 0.03


def test_halving_dt_barely_moves_mean_torque(coarse_maps, machine, trace):
    fine = D.simulate(coarse_maps, machine.loss, dataclasses.replace(machine.drive, dt=5e-7),
                      geom=machine.geometry)
    a = D.metrics(trace, machine.loss).mean_torque_nm
    b = D.metrics(fine, machine.loss).mean_torque_nm
    assert abs(a - b) / abs(b) < 0.005


def test_backends_agree(coarse_maps, machine):
    impls = _kernels.backends()
    if len(impls) < 2:
        pytest.skip("compiled backend not built")
    cfg = dataclasses.replace(machine.drive, periods=1)
    runs = [D.simulate(coarse_maps, machine.loss, cfg, n_rotor_teeth=14, backend=b)
            for b in impls.values()]
    assert np.array_equal(runs[0].mode, runs[1].mode)
    assert np.allclose(runs[0].i, runs[1].i, rtol=0, atol=1e-12)


def test_snapshot_grid(trace):
    assert D.default_snapshot_count(3360, 14) == 30
    assert D.default_snapshot_count(3600, 12) == 30
    cur = D.snapshot_currents(trace, np.array([90.0, 270.0]))
    assert cur[0, 0] == pytest.approx(15.0, abs=0.3) and cur[1, 1] == pytest.approx(15.0, abs=0.3)


def test_core_loss_on_coarse_mesh(machine, trace):
    out = D.core_loss(machine.geometry, trace, machine.loss, "coarse", n_snapshots=10)
    assert out["snapshots"] == 10 and out["frequency_hz"] == pytest.approx(140.0)
    assert 1.0 < out["core_loss_w"] < 100.0
    with pytest.raises(D.DriveError):
        D.core_loss(machine.geometry, trace, machine.loss, "coarse", n_snapshots=7)


def test_exports(tmp_path, trace, machine):
    D.write_trace_csv(trace, tmp_path / "t.csv", stride=100)
    D.write_report(D.metrics(trace, machine.loss).as_dict(), tmp_path / "m.txt")
    D.waveform_svg(trace, tmp_path / "w.svg", title="8/14")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].startswith("t_s,") and len(lines) > 100
    assert "efficiency_pct" in (tmp_path / "m.txt").read_text()


def test_default_loss_model_resistance():
    assert LossModel().copper_resistance_per_phase_ohm > 0
