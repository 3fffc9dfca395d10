"""Constant-speed drive simulation: asymmetric bridge, hard-chopping current control.

Each phase obeys ``dpsi/dt = v - R i`` with ``i`` recovered from the static
flux map at the present rotor angle.  Integration is fixed-step RK4 with the
converter voltage held over each step; the controller acts on the sampled
current at the start of a step.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from . import fem as F
from . import mesh as M
from .geometry import MotorGeometry
from .maps import CharMaps, MapError, mech_angle_for
from .materials import LossModel


class DriveError(RuntimeError):
    pass


class Mode(enum.IntEnum):
    IDLE = _kernels.MODE_IDLE
    MAGNETIZE = _kernels.MODE_MAGNETIZE
    DEMAGNETIZE = _kernels.MODE_DEMAGNETIZE


@dataclass(frozen=True)
class ChcConfig:
    i_ref: float = 15.0
    band_delta: float = 0.4
    conduction_span_elec_deg: float = 180.0
    dc_link_v: float = 150.0
    speed_rpm: float = 600.0
    turn_on_angle_elec_deg: float = 0.0
    dt: float = 1e-6
    periods: int = 3

    def __post_init__(self):
        if not self.band_delta > 0:
            raise ValueError("band_delta must be > 0")
        if not 0 < self.conduction_span_elec_deg <= 360:
            raise ValueError("conduction span must lie in (0, 360] electrical degrees")
        if self.dt <= 0 or self.speed_rpm <= 0 or self.dc_link_v < 0 or self.periods < 1:
            raise ValueError("dt, speed and periods must be positive, dc link non-negative")

    @property
    def i_low(self) -> float:
        return self.i_ref - self.band_delta / 2

    @property
    def i_high(self) -> float:
        return self.i_ref + self.band_delta / 2

    def in_conduction(self, theta_elec: float) -> bool:
        return ((theta_elec - self.turn_on_angle_elec_deg) % 360.0) < self.conduction_span_elec_deg


def step_controller(current: float, mode: Mode, cfg: ChcConfig, in_conduction: bool) -> Mode:
    """Hysteresis decision for one phase (the simulation kernel applies the same rule)."""
    if in_conduction:
        if current > cfg.i_high:
            return Mode.DEMAGNETIZE
        if current < cfg.i_low:
            return Mode.MAGNETIZE
        return Mode.MAGNETIZE if mode == Mode.IDLE else Mode(mode)
    return Mode.DEMAGNETIZE if current > 0.0 else Mode.IDLE


@dataclass(frozen=True, eq=False)
class SimTrace:
    t: np.ndarray            # s
    theta: np.ndarray        # electrical degrees of phase A
    v: np.ndarray            # (n, phases) V, applied over [t_k, t_k+1)
    i: np.ndarray            # A
    psi: np.ndarray          # Wb-turn
    torque: np.ndarray       # N m per phase
    mode: np.ndarray
    cfg: ChcConfig
    resistance: float
    n_rotor_teeth: int
    phase_offsets: tuple = (0.0, -180.0)
    phases: tuple = ("A", "B")

    @property
    def total_torque(self) -> np.ndarray:
        return self.torque.sum(axis=1)

    @property
    def period(self) -> float:
        return 60.0 / (self.cfg.speed_rpm * self.n_rotor_teeth)

    @property
    def frequency(self) -> float:
        return 1.0 / self.period

    @property
    def omega_mech(self) -> float:
        return 2 * math.pi * self.cfg.speed_rpm / 60.0

    def period_slice(self, back: int = 0) -> slice:
        """Samples of the ``back``-th last full electrical period."""
        n = int(round(self.period / self.cfg.dt))
        end = len(self.t) - 1 - back * n
        if end - n < 0:
            raise DriveError("trace is shorter than the requested number of periods")
        return slice(end - n, end)

    def phase_theta(self, p: int) -> np.ndarray:
        return self.theta + self.phase_offsets[p]


def simulate(maps: CharMaps, loss: LossModel | None = None, cfg: ChcConfig | None = None,
             periods: int | None = None, n_rotor_teeth: int | None = None,
             geom: MotorGeometry | None = None, backend=None) -> SimTrace:
    """Run the two-phase drive for ``periods`` electrical periods from rest currents."""
    cfg = cfg or ChcConfig()
    loss = loss or LossModel()
    if geom is not None:
        from .maps import check_hash
        check_hash(maps, geom)
        n_rotor_teeth = geom.layout.n_rotor_teeth
    n_r = int(n_rotor_teeth or maps.metadata.get("n_rotor_teeth", 14))
    if cfg.dc_link_v > 0 and maps.i_max < cfg.i_high + cfg.band_delta / 2:
        raise MapError(f"maps reach {maps.i_max} A but the controller needs "
                       f"{cfg.i_high + cfg.band_delta / 2:.2f} A")
    periods = cfg.periods if periods is None else periods
    period = 60.0 / (cfg.speed_rpm * n_r)
    n_steps = int(round(periods * period / cfg.dt))
    omega_e = 360.0 * cfg.speed_rpm * n_r / 60.0
    offsets = (0.0, -180.0)
    impl = backend or _kernels
    status, reached, theta, v, i, psi, tq, mode = impl.chc_simulate(
        np.asarray(maps.currents, float), maps.angle_step, np.asarray(maps.psi, float),
        np.asarray(maps.torque, float), loss.copper_resistance_per_phase_ohm, cfg.dc_link_v,
        cfg.i_low, cfg.i_high, cfg.turn_on_angle_elec_deg, cfg.conduction_span_elec_deg,
        0.0, omega_e, cfg.dt, n_steps, np.array(offsets), maps.i_max)
    if status != _kernels.STATUS_OK:
        k = int(np.argmax(i[reached]))
        raise DriveError(f"phase {'AB'[k]} current {i[reached, k]:.2f} A left the map range "
                         f"(max {maps.i_max} A) at t = {reached * cfg.dt * 1e3:.3f} ms, "
                         f"theta = {theta[reached] % 360:.1f} deg elec")
    t = np.arange(n_steps + 1) * cfg.dt
    return SimTrace(t, theta, v, i, psi, tq, mode, cfg, loss.copper_resistance_per_phase_ohm, n_r)


# ---------------------------------------------------------------------------
# metrics and trace checks


@dataclass(frozen=True)
class DriveMetrics:
    mean_torque_nm: float
    max_torque_nm: float
    min_torque_nm: float
    ripple_pct: float
    i_rms_a: float
    copper_loss_w: float
    core_loss_w: float
    output_power_w: float
    input_power_w: float
    electrical_input_w: float
    efficiency_pct: float
    torque_per_ampere: float
    power_per_ampere: float
    energy_balance_error: float
    switching_frequency_hz: float
    frequency_hz: float

    def as_dict(self) -> dict:
        return asdict(self)


def metrics(trace: SimTrace, loss: LossModel | None = None, core_loss_w: float = 0.0,
            periodic_tol: float = 0.02) -> DriveMetrics:
    """Table-IV style record over the last full electrical period."""
    loss = loss or LossModel()
    sl = trace.period_slice()
    tt = trace.total_torque
    seg = tt[sl]
    t_mean = float(seg.mean())
    try:
        prev = float(tt[trace.period_slice(1)].mean())
    except DriveError:
        prev = None
    if prev is not None and abs(t_mean - prev) > periodic_tol * max(abs(t_mean), 1e-9):
        raise DriveError(f"trace is not periodic: mean torque {prev:.4f} then {t_mean:.4f} N m")
    t_max, t_min = float(seg.max()), float(seg.min())
    i_rms_ph = np.sqrt(np.mean(trace.i[sl] ** 2, axis=0))
    p_cu = float(np.sum(trace.resistance * i_rms_ph ** 2))
    p_out = t_mean * trace.omega_mech
    p_in = p_out + p_cu + core_loss_w
    i_mid = 0.5 * (trace.i[sl.start:sl.stop] + trace.i[sl.start + 1:sl.stop + 1])
    p_elec = float(np.mean(np.sum(trace.v[sl] * i_mid, axis=1)))
    i_rms = float(i_rms_ph[0])
    n_sw = int(np.sum(np.abs(np.diff(trace.mode[sl, 0].astype(int))) > 0))
    return DriveMetrics(
        mean_torque_nm=t_mean, max_torque_nm=t_max, min_torque_nm=t_min,
        ripple_pct=100.0 * (t_max - t_min) / t_mean if t_mean else float("nan"),
        i_rms_a=i_rms, copper_loss_w=p_cu, core_loss_w=float(core_loss_w),
        output_power_w=p_out, input_power_w=p_in, electrical_input_w=p_elec,
        efficiency_pct=100.0 * p_out / p_in if p_in else float("nan"),
        torque_per_ampere=t_mean / i_rms if i_rms else float("nan"),
        power_per_ampere=p_out / i_rms if i_rms else float("nan"),
        energy_balance_error=abs(p_elec + core_loss_w - p_in) / p_in if p_in else 0.0,
        switching_frequency_hz=n_sw / 2 / trace.period,
        frequency_hz=trace.frequency,
    )


def slew_margin(trace: SimTrace, maps: CharMaps) -> float:
    """Largest current change one step can produce: (V_dc + R i + |e|) dt / min dpsi/di."""
    dpsi_di = np.diff(maps.psi, axis=0) / np.diff(maps.currents)[:, None]
    l_min = float(dpsi_di.min())
    dpsi_dth = np.abs(np.diff(maps.psi, axis=1)).max() / math.radians(maps.angle_step)
    omega_e = 2 * math.pi * trace.frequency
    v = trace.cfg.dc_link_v + trace.resistance * maps.i_max + dpsi_dth * omega_e
    return float(v * trace.cfg.dt / l_min)


@dataclass(frozen=True)
class WindowReport:
    phase: str
    start_s: float
    entered: bool
    switching_events: int
    worst_excursion_a: float      # beyond [i_low, i_high], after first entry; <= 0 is inside


def conduction_windows(trace: SimTrace) -> list[WindowReport]:
    """Per-phase analysis of every complete conduction window in the trace."""
    cfg = trace.cfg
    out = []
    for p, name in enumerate(trace.phases):
        th = trace.phase_theta(p)
        cond = ((th - cfg.turn_on_angle_elec_deg) % 360.0) < cfg.conduction_span_elec_deg
        cond[-1] = False
        edges = np.diff(cond.astype(int))
        starts = np.nonzero(edges == 1)[0] + 1
        ends = np.nonzero(edges == -1)[0] + 1
        for s in starts:
            later = ends[ends > s]
            if not len(later):
                continue
            e = later[0]
            i = trace.i[s:e, p]
            mode = trace.mode[s:e, p]
            entry = np.nonzero(i >= cfg.i_low)[0]
            if not len(entry):
                out.append(WindowReport(name, float(trace.t[s]), False, 0, float("nan")))
                continue
            k0 = entry[0]
            after = i[k0:]
            exc = max(float(after.max() - cfg.i_high), float(cfg.i_low - after.min()))
            sw = int(np.sum(np.diff(mode[k0:].astype(int)) != 0))
            out.append(WindowReport(name, float(trace.t[s]), True, sw, exc))
    return out


# ---------------------------------------------------------------------------
# core loss from field snapshots


def default_snapshot_count(band_divisions: int, n_rotor_teeth: int, target: int = 30) -> int:
    steps = band_divisions // n_rotor_teeth
    return max(d for d in range(1, steps + 1) if steps % d == 0 and d <= target)


def snapshot_currents(trace: SimTrace, angles_elec: np.ndarray) -> np.ndarray:
    """Phase currents at the given phase-A angles, read from the last period."""
    sl = trace.period_slice()
    th = np.mod(trace.theta[sl], 360.0)
    order = np.argsort(th)
    out = np.empty((len(angles_elec), trace.i.shape[1]))
    for p in range(trace.i.shape[1]):
        out[:, p] = np.interp(angles_elec, th[order], trace.i[sl][order, p], period=360.0)
    return out


def core_loss(geom: MotorGeometry, trace: SimTrace, loss: LossModel | None = None,
              resolution="reference", n_snapshots: int | None = None,
              materials: F.MaterialSet | None = None, base_mesh: M.Mesh | None = None) -> dict:
    """Steinmetz loss from field solutions spread evenly over one electrical period.

    Each snapshot solves the field with both phase currents taken from the
    trace at that rotor angle; the per-element peak |B| over the snapshots
    feeds the two-term formula at the electrical frequency.
    """
    loss = loss or LossModel()
    base = base_mesh if base_mesh is not None else M.generate_for(geom, resolution)
    n_r = geom.layout.n_rotor_teeth
    if n_snapshots is None:
        n_snapshots = default_snapshot_count(base.band.divisions, n_r)
    if (base.band.divisions // n_r) % n_snapshots:
        raise DriveError(f"{n_snapshots} snapshots do not fall on the band grid")
    angles = np.arange(n_snapshots) * 360.0 / n_snapshots
    cur = snapshot_currents(trace, angles)
    pitch = base.band.pitch_deg
    b_all = []
    iron = vol = None
    for th, (ia, ib) in zip(angles, cur):
        steps = int(round(mech_angle_for(th, n_r) / pitch))
        mesh = M.rotate_band(base, steps)
        model = F.FemModel.for_geometry(mesh, geom, materials)
        exc = F.ExcitationState.of({"A": ia, "B": ib}, geom.turns_per_pole)
        sol = model.solve(exc).require_converged()
        if iron is None:
            iron, vol = F.iron_volumes(model)
        b_all.append(sol.element_B[iron])
    p_c = loss.core_loss_from_snapshots(np.array(b_all), angles, trace.frequency, vol)
    return dict(core_loss_w=p_c, snapshots=n_snapshots, frequency_hz=trace.frequency,
                angles_elec_deg=angles.tolist(), currents_a=cur.tolist())


# ---------------------------------------------------------------------------
# export


def write_trace_csv(trace: SimTrace, path, stride: int = 1) -> None:
    buf = io.StringIO()
    buf.write("t_s,theta_elec_deg,v_A,i_A,psi_A,mode_A,v_B,i_B,psi_B,mode_B,T_total_Nm\n")
    tt = trace.total_torque
    for k in range(0, len(trace.t), stride):
        buf.write(f"{trace.t[k]:.9e},{trace.theta[k] % 360:.6f},"
                  f"{trace.v[k, 0]:.1f},{trace.i[k, 0]:.6f},{trace.psi[k, 0]:.8f},{trace.mode[k, 0]},"
                  f"{trace.v[k, 1]:.1f},{trace.i[k, 1]:.6f},{trace.psi[k, 1]:.8f},{trace.mode[k, 1]},"
                  f"{tt[k]:.6f}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def write_report(values: dict, path) -> None:
    lines = [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in values.items()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def waveform_svg(trace: SimTrace, path, title: str = "") -> None:
    """Voltage, current, flux linkage and torque over the last period."""
    from .plotting import plt, save_svg

    sl = trace.period_slice()
    t_ms = (trace.t[sl] - trace.t[sl][0]) * 1e3
    fig, axes = plt.subplots(4, 1, figsize=(7, 8), sharex=True)
    for p, name in enumerate(trace.phases):
        axes[0].plot(t_ms, trace.v[sl, p], lw=0.5, label=f"phase {name}")
        axes[1].plot(t_ms, trace.i[sl, p], lw=0.7, label=f"phase {name}")
        axes[2].plot(t_ms, trace.psi[sl, p], lw=0.8, label=f"phase {name}")
    axes[3].plot(t_ms, trace.total_torque[sl], lw=0.7, color="k")
    for ax, lab in zip(axes, ("voltage (V)", "current (A)", "flux linkage (Wb)", "torque (N m)")):
        ax.set_ylabel(lab)
        ax.grid(True, lw=0.3)
    axes[0].legend(fontsize=7, loc="upper right")
    axes[-1].set_xlabel("time (ms)")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    save_svg(fig, path)


__all__ = ["ChcConfig", "Mode", "SimTrace", "DriveMetrics", "simulate", "metrics",
           "step_controller", "core_loss", "conduction_windows", "slew_margin"]
