"""Side-by-side comparison of the two machines.

The pipeline per machine is: static maps, drive simulation, field snapshots
for core loss, metrics.  Published values sit next to the computed ones as a
labelled reference column and never enter a computation.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import _kernels
from . import drive as D
from . import fem as F
from . import maps as MP
from . import mesh as M
from .config import MachineConfig
from .geometry import MotorGeometry, build_cross_section, elec_to_mech

PROPOSED, CONVENTIONAL = "proposed_8_14", "conventional_8_12"

# published static results: current -> (mean 8/14, mean 8/12, peak 8/14, peak 8/12)
PUBLISHED_STATIC = {
    3.0: (0.682, 0.394, 0.938, 0.505),
    6.0: (2.435, 1.335, 3.423, 1.849),
    9.0: (4.295, 2.357, 6.163, 3.448),
    12.0: (5.945, 3.257, 8.641, 4.940),
    15.0: (7.388, 3.993, 10.808, 6.189),
}
# published increase columns, kept only to be checked against the formula
PUBLISHED_STATIC_INCREASE = {
    3.0: (73.09, 85.74), 6.0: (82.39, 85.12), 9.0: (82.22, 78.74),
    12.0: (82.52, 74.91), 15.0: (85.02, 74.63),
}
# published dynamic record: field -> (8/14, 8/12)
PUBLISHED_DYNAMIC = {
    "motor_volume_ml": (129.96, 129.96),
    "speed_rpm": (600.0, 600.0),
    "i_rms_a": (9.36, 9.98),
    "mean_torque_nm": (5.86, 3.76),
    "ripple_pct": (150.65, 161.37),
    "iron_weight_kg": (1.905, 1.820),
    "output_power_w": (368.19, 236.24),
    "copper_loss_w": (71.19, 50.80),
    "core_loss_w": (4.82, 13.45),
    "input_power_w": (444.2, 300.49),
    "torque_per_ampere": (0.626, 0.376),
    "power_per_ampere": (39.37, 23.67),
    "torque_density_nm_per_l": (45.09, 20.93),
    "efficiency_pct": (82.89, 78.62),
}
DYNAMIC_ROWS = tuple(PUBLISHED_DYNAMIC)
TABLE_CURRENTS = (3.0, 6.0, 9.0, 12.0, 15.0)
SHARED_DIMENSIONS = ("stator_outer_diameter_mm", "stack_length_mm", "airgap_mm", "shaft_diameter_mm")


class StageError(RuntimeError):
    """A pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def percent_increase(a: float, b: float) -> float:
    return (a - b) / b * 100.0


def iron_weight_kg(geom: MotorGeometry, density_kg_m3: float = 7650.0) -> float:
    area_mm2 = build_cross_section(geom).iron_area()
    return area_mm2 * geom.stack_length_mm * 1e-9 * density_kg_m3


def check_equal_volume(a: MotorGeometry, b: MotorGeometry, allow_mismatch: bool = False) -> None:
    diff = [k for k in SHARED_DIMENSIONS if not math.isclose(getattr(a, k), getattr(b, k),
                                                             rel_tol=0, abs_tol=1e-9)]
    if diff and not allow_mismatch:
        raise StageError("config", "machines differ in " + ", ".join(diff)
                         + " (equal-volume comparison required)")


@dataclass(frozen=True)
class RunOptions:
    resolution: str = "reference"
    currents: tuple = MP.DEFAULT_CURRENTS + (MP.HEADROOM_CURRENT,)
    n_angles: int = MP.DEFAULT_ANGLES
    dynamic: bool = True
    core_loss: bool = True
    n_snapshots: int | None = None
    maps_dir: str | None = None       # reuse maps found here when their hash matches
    workers: int = 1
    allow_volume_mismatch: bool = False
    field_plots: bool = True


@dataclass(frozen=True)
class StaticRow:
    current: float
    mean_torque: float
    peak_torque: float
    torque_density: float


@dataclass
class VariantResult:
    variant: str
    config_hash: str
    static: list
    dynamic: dict = field(default_factory=dict)
    mesh: dict = field(default_factory=dict)
    maps: MP.CharMaps | None = None
    trace: D.SimTrace | None = None


@dataclass
class ComparisonReport:
    results: dict                       # variant -> VariantResult
    provenance: dict

    def static_rows(self) -> list[dict]:
        a = {r.current: r for r in self.results[PROPOSED].static}
        b = {r.current: r for r in self.results[CONVENTIONAL].static}
        rows = []
        for i in sorted(set(a) & set(b)):
            if i == 0:
                continue
            row = dict(current_a=i,
                       mean_8_14=a[i].mean_torque, mean_8_12=b[i].mean_torque,
                       peak_8_14=a[i].peak_torque, peak_8_12=b[i].peak_torque,
                       mean_increase_pct=percent_increase(a[i].mean_torque, b[i].mean_torque),
                       peak_increase_pct=percent_increase(a[i].peak_torque, b[i].peak_torque),
                       density_8_14=a[i].torque_density, density_8_12=b[i].torque_density)
            ref = PUBLISHED_STATIC.get(i)
            if ref:
                row.update(published_mean_8_14=ref[0], published_mean_8_12=ref[1],
                           published_peak_8_14=ref[2], published_peak_8_12=ref[3],
                           published_mean_increase_pct=percent_increase(ref[0], ref[1]),
                           published_peak_increase_pct=percent_increase(ref[2], ref[3]))
            rows.append(row)
        return rows

    def dynamic_rows(self) -> list[dict]:
        a, b = self.results[PROPOSED].dynamic, self.results[CONVENTIONAL].dynamic
        if not a or not b:
            return []
        rows = []
        for k in DYNAMIC_ROWS:
            pa, pb = PUBLISHED_DYNAMIC[k]
            rows.append(dict(quantity=k, value_8_14=a[k], value_8_12=b[k],
                             increase_pct=percent_increase(a[k], b[k]),
                             published_8_14=pa, published_8_12=pb,
                             published_increase_pct=percent_increase(pa, pb)))
        return rows

    def summary(self) -> dict:
        return dict(static=self.static_rows(), dynamic=self.dynamic_rows(),
                    extra={v: {k: r.dynamic[k] for k in r.dynamic if k not in DYNAMIC_ROWS}
                           for v, r in self.results.items()},
                    provenance=self.provenance)

    def write(self, outdir) -> list[Path]:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "static_torque.csv"]
        _write_rows(self.static_rows(), written[0])
        if self.dynamic_rows():
            written.append(out / "dynamic_performance.csv")
            _write_rows(self.dynamic_rows(), written[-1])
        written.append(out / "summary.json")
        written[-1].write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        maps = {_label(v): r.maps for v, r in self.results.items() if r.maps is not None}
        if len(maps) == 2:
            shown = [i for i in TABLE_CURRENTS
                     if all(np.isclose(m.currents, i, rtol=0, atol=1e-9).any() for m in maps.values())]
            written.append(out / "torque_profiles.svg")
            MP.profile_svg(maps, written[-1], currents=shown)
            written.append(out / "torque_vs_current.svg")
            MP.mean_peak_svg(maps, written[-1], currents=shown)
            written.append(out / "torque_density.svg")
            density_svg(self, written[-1])
        for v, r in self.results.items():
            if r.trace is not None:
                written.append(out / f"waveforms_{v}.svg")
                D.waveform_svg(r.trace, written[-1], title=_label(v))
        return written


def _label(variant: str) -> str:
    return {PROPOSED: "8/14", CONVENTIONAL: "8/12"}.get(variant, variant)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_rows(rows: list[dict], path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    buf = io.StringIO()
    keys = list(rows[0])
    buf.write(",".join(keys) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r.get(k, "")) for k in keys) + "\n")
    Path(path).write_text(buf.getvalue())


def density_svg(report: ComparisonReport, path) -> None:
    """Static torque density against current for both machines."""
    from .plotting import plt, save_svg

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for v, r in report.results.items():
        rows = [s for s in r.static if s.current > 0]
        ax.plot([s.current for s in rows], [s.torque_density for s in rows], "o-", label=_label(v))
    ax.set_xlabel("phase current (A)")
    ax.set_ylabel("mean torque density (N m / L)")
    ax.grid(True, lw=0.3)
    ax.legend()
    save_svg(fig, path)


# ---------------------------------------------------------------------------
# pipeline


def static_stage(cfg: MachineConfig, opts: RunOptions, log=None) -> MP.CharMaps:
    geom = cfg.geometry
    cached = Path(opts.maps_dir) / f"{geom.variant}.csv" if opts.maps_dir else None
    if cached is not None and cached.exists():
        try:
            mp = MP.CharMaps.from_csv(cached, geom)
            if (set(map(float, opts.currents)) <= set(mp.currents.tolist())
                    and len(mp.angles) == opts.n_angles
                    and mp.metadata.get("resolution") == opts.resolution):
                return mp
        except MP.MapError:
            pass
    mp = MP.build_maps(geom, opts.resolution, opts.currents, opts.n_angles, cfg.materials(),
                       log=log)
    if cached is not None:
        cached.parent.mkdir(parents=True, exist_ok=True)
        mp.to_csv(cached)
    return mp


def dynamic_stage(cfg: MachineConfig, mp: MP.CharMaps, opts: RunOptions):
    geom = cfg.geometry
    trace = D.simulate(mp, cfg.loss, cfg.drive, geom=geom)
    p_c = 0.0
    cl = {}
    if opts.core_loss:
        cl = D.core_loss(geom, trace, cfg.loss, opts.resolution, opts.n_snapshots,
                         cfg.materials())
        p_c = cl["core_loss_w"]
    m = D.metrics(trace, cfg.loss, p_c)
    vol = geom.motor_volume_l()
    windows = D.conduction_windows(trace)
    record = dict(
        motor_volume_ml=vol * 1e3,
        speed_rpm=cfg.drive.speed_rpm,
        i_rms_a=m.i_rms_a,
        mean_torque_nm=m.mean_torque_nm,
        ripple_pct=m.ripple_pct,
        iron_weight_kg=iron_weight_kg(geom, cfg.loss.iron_density_kg_m3),
        output_power_w=m.output_power_w,
        copper_loss_w=m.copper_loss_w,
        core_loss_w=m.core_loss_w,
        input_power_w=m.input_power_w,
        torque_per_ampere=m.torque_per_ampere,
        power_per_ampere=m.power_per_ampere,
        torque_density_nm_per_l=MP.torque_density(m.mean_torque_nm, vol),
        efficiency_pct=m.efficiency_pct,
        electrical_input_w=m.electrical_input_w,
        energy_balance_error=m.energy_balance_error,
        switching_frequency_hz=m.switching_frequency_hz,
        electrical_frequency_hz=m.frequency_hz,
        phase_resistance_ohm=cfg.loss.copper_resistance_per_phase_ohm,
        core_loss_snapshots=cl.get("snapshots", 0),
        min_switching_events=min((w.switching_events for w in windows if w.entered), default=0),
        worst_band_excursion_a=max((w.worst_excursion_a for w in windows if w.entered),
                                   default=float("nan")),
        slew_margin_a=D.slew_margin(trace, mp),
    )
    return record, trace


def field_plots(cfg: MachineConfig, outdir, resolution="reference", current: float = 15.0) -> list:
    """Flux density maps at unaligned, half-aligned and aligned rotor positions."""
    geom = cfg.geometry
    base = M.generate_for(geom, resolution)
    n_r = geom.layout.n_rotor_teeth
    out = []
    for name, th in (("unaligned", 0.0), ("half_aligned", 90.0), ("aligned", 180.0)):
        steps = int(round(MP.mech_angle_for(th, n_r) / base.band.pitch_deg))
        model = F.FemModel.for_geometry(M.rotate_band(base, steps), geom, cfg.materials())
        sol = model.solve(F.ExcitationState.single("A", current, geom.turns_per_pole))
        sol.require_converged()
        path = Path(outdir) / f"flux_density_{geom.variant}_{name}.svg"
        F.field_svg(sol, path, title=f"{_label(geom.variant)}, {name}, {current:g} A")
        out.append(path)
    return out


def run_variant(cfg: MachineConfig, opts: RunOptions, outdir=None, log=None) -> VariantResult:
    geom = cfg.geometry
    try:
        mp = static_stage(cfg, opts, log)
    except Exception as exc:
        raise StageError(f"static:{geom.variant}", str(exc)) from exc
    vol = geom.motor_volume_l()
    static = [StaticRow(float(i), mp.mean_torque(i), mp.peak_torque(i),
                        MP.torque_density(mp.mean_torque(i), vol)) for i in mp.currents]
    res = VariantResult(geom.variant, geom.config_hash(), static, maps=mp,
                        mesh={k: mp.metadata.get(k) for k in
                              ("resolution", "band_divisions", "n_nodes", "n_triangles")})
    if opts.dynamic:
        try:
            res.dynamic, res.trace = dynamic_stage(cfg, mp, opts)
        except Exception as exc:
            raise StageError(f"dynamic:{geom.variant}", str(exc)) from exc
    if opts.field_plots and outdir is not None:
        try:
            field_plots(cfg, outdir, opts.resolution)
        except Exception as exc:
            raise StageError(f"fields:{geom.variant}", str(exc)) from exc
    return res


def _run_variant_job(args):
    return run_variant(*args)


def provenance(cfgs, opts: RunOptions) -> dict:
    import matplotlib
    import scipy
    import triangle

    return dict(
        package_version=__version__,
        python=platform.python_version(),
        numpy=np.__version__, scipy=scipy.__version__, matplotlib=matplotlib.__version__,
        triangle=getattr(triangle, "__version__", "unknown"),
        kernel_backend=_kernels.BACKEND,
        config_hashes={c.variant: c.geometry.config_hash() for c in cfgs},
        phase_resistance_ohm={c.variant: c.loss.copper_resistance_per_phase_ohm for c in cfgs},
        options={k: (list(v) if isinstance(v, tuple) else v)
                 for k, v in dataclasses.asdict(opts).items() if k not in ("maps_dir", "workers")},
        drive={c.variant: dataclasses.asdict(c.drive) for c in cfgs},
    )


def compare(cfg_8_14: MachineConfig, cfg_8_12: MachineConfig, opts: RunOptions | None = None,
            outdir=None, log=None) -> ComparisonReport:
    """Run both machines and assemble the comparison; writes files when ``outdir`` is set."""
    opts = opts or RunOptions()
    if cfg_8_14.variant != PROPOSED or cfg_8_12.variant != CONVENTIONAL:
        raise StageError("config", f"expected {PROPOSED} and {CONVENTIONAL} configs, got "
                                   f"{cfg_8_14.variant} and {cfg_8_12.variant}")
    check_equal_volume(cfg_8_14.geometry, cfg_8_12.geometry, opts.allow_volume_mismatch)
    if outdir is not None:
        Path(outdir).mkdir(parents=True, exist_ok=True)
    cfgs = (cfg_8_14, cfg_8_12)
    if opts.workers > 1:
        with ProcessPoolExecutor(2) as ex:
            found = list(ex.map(_run_variant_job, [(c, opts, outdir, None) for c in cfgs]))
    else:
        found = [run_variant(c, opts, outdir, log) for c in cfgs]
    report = ComparisonReport({r.variant: r for r in found}, provenance(cfgs, opts))
    if outdir is not None:
        try:
            report.write(outdir)
        except (OSError, ValueError) as exc:
            raise StageError("report", str(exc)) from None
    return report


__all__ = [
    "PUBLISHED_STATIC", "PUBLISHED_STATIC_INCREASE", "PUBLISHED_DYNAMIC", "StageError", "percent_increase",
    "iron_weight_kg", "check_equal_volume", "RunOptions", "StaticRow", "VariantResult",
    "ComparisonReport", "compare", "run_variant", "static_stage", "dynamic_stage", "field_plots",
    "elec_to_mech",
]
