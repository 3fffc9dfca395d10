"""Command line entry point: ``tpsrm <stage> CONFIG OUTDIR [options]``.

``CONFIG`` is an INI file or the name of a packaged default
(``proposed_8_14`` / ``conventional_8_12``).  Every stage writes plain CSV,
SVG or text files plus ``summary.json`` into ``OUTDIR``.  Failures print the
stage tag and exit with that stage's code.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import config as C

EXIT_CODES = {"config": 3, "geometry": 4, "mesh": 5, "static": 6, "dynamic": 7,
              "optimize": 8, "compare": 9}

log = logging.getLogger("tpsrm")


class StageFailure(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _load(ref: str, args) -> C.MachineConfig:
    try:
        cfg = C.packaged(ref) if ref in ("proposed_8_14", "conventional_8_12") else C.load(ref)
    except (C.ConfigError, OSError, ValueError) as exc:
        raise StageFailure("config", str(exc)) from None
    study = cfg.study
    over = {}
    if args.resolution is not None:
        over["resolution"] = args.resolution
    if args.angles is not None:
        over["n_angles"] = args.angles
    if args.currents is not None:
        over["currents"] = args.currents
    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        over["workers"] = args.workers
    return dataclasses.replace(cfg, study=dataclasses.replace(study, **over))


def _currents(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad current list {text!r}") from None
    if not vals or min(vals) < 0:
        raise argparse.ArgumentTypeError("currents must be non-negative")
    return vals


def _summary(outdir: Path, data: dict) -> None:
    (outdir / "summary.json").write_text(json.dumps(data, indent=2, sort_keys=True, default=float)
                                         + "\n")


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# stages


def cmd_geometry(args) -> None:
    from .geometry import GeometryError, build_cross_section, check_geometry, cross_section_svg
    from .report import iron_weight_kg

    cfg = _load(args.config, args)
    out = _outdir(args.outdir)
    g = cfg.geometry
    try:
        check_geometry(g, check_bounds=args.check_bounds)
        cs = build_cross_section(g, args.rotor_angle)
    except GeometryError as exc:
        raise StageFailure("geometry", str(exc)) from None
    (out / "cross_section.svg").write_text(cross_section_svg(cs))
    C.save(cfg, out / "geometry.ini")
    lay = g.layout
    _summary(out, dict(
        variant=g.variant, config_hash=g.config_hash(),
        n_rotor_teeth=lay.n_rotor_teeth, n_stator_teeth=lay.n_stator_teeth,
        rotor_pole_pitch_deg=lay.rotor_pole_pitch_deg,
        ccore_tooth_span_deg=lay.ccore_tooth_span_deg, inter_core_span_deg=lay.inter_core_span_deg,
        rotor_angle_deg=args.rotor_angle, coil_regions=cs.count("coil"),
        iron_area_mm2=cs.iron_area(), iron_weight_kg=iron_weight_kg(g, cfg.loss.iron_density_kg_m3),
        motor_volume_ml=g.motor_volume_l() * 1e3))


def cmd_mesh(args) -> None:
    from . import mesh as M

    cfg = _load(args.config, args)
    out = _outdir(args.outdir)
    try:
        mesh = M.generate_for(cfg.geometry, cfg.study.resolution, args.rotor_angle)
        M.check_mesh(mesh)
    except Exception as exc:
        raise StageFailure("mesh", str(exc)) from None
    M.write_mesh(mesh, out / "mesh.txt")
    _summary(out, dict(variant=cfg.variant, resolution=cfg.study.resolution,
                       rotor_angle_deg=mesh.rotor_angle_deg, n_nodes=mesh.n_nodes,
                       n_triangles=mesh.n_triangles, band_divisions=mesh.band.divisions,
                       band_pitch_deg=mesh.band.pitch_deg,
                       min_angle_deg=float(M.min_angles_deg(mesh.nodes, mesh.triangles).min())))


def cmd_static(args) -> None:
    from . import maps as MP
    from .report import RunOptions, field_plots, static_stage

    cfg = _load(args.config, args)
    out = _outdir(args.outdir)
    s = cfg.study
    opts = RunOptions(resolution=s.resolution, currents=s.currents, n_angles=s.n_angles)
    try:
        mp = static_stage(cfg, opts, log=log.info)
        mp.to_csv(out / "maps.csv")
        MP.profile_svg({cfg.variant: mp}, out / "torque_profile.svg")
        MP.mean_peak_svg({cfg.variant: mp}, out / "torque_vs_current.svg",
                         currents=[c for c in mp.currents if c > 0])
        if args.field_plots:
            field_plots(cfg, out, s.resolution)
    except Exception as exc:
        raise StageFailure("static", str(exc)) from None
    vol = cfg.geometry.motor_volume_l()
    rows = [dict(current_a=float(i), mean_torque_nm=mp.mean_torque(i),
                 peak_torque_nm=mp.peak_torque(i),
                 torque_density_nm_per_l=MP.torque_density(mp.mean_torque(i), vol))
            for i in mp.currents if i > 0]
    lines = ["current_a,mean_torque_nm,peak_torque_nm,torque_density_nm_per_l"]
    lines += [",".join(repr(v) for v in r.values()) for r in rows]
    (out / "mean_peak.csv").write_text("\n".join(lines) + "\n")
    _summary(out, dict(variant=cfg.variant, metadata=mp.metadata, rows=rows))


def cmd_dynamic(args) -> None:
    from . import drive as D
    from . import maps as MP
    from .report import RunOptions, dynamic_stage, static_stage

    cfg = _load(args.config, args)
    out = _outdir(args.outdir)
    s = cfg.study
    opts = RunOptions(resolution=s.resolution, currents=s.currents, n_angles=s.n_angles,
                      core_loss=not args.no_core_loss)
    try:
        if args.maps:
            mp = MP.CharMaps.from_csv(args.maps, cfg.geometry)
        else:
            mp = static_stage(cfg, opts, log=log.info)
    except Exception as exc:
        raise StageFailure("static", str(exc)) from None
    try:
        record, trace = dynamic_stage(cfg, mp, opts)
        D.write_trace_csv(trace, out / "trace.csv", stride=args.stride)
        D.write_report(record, out / "metrics.txt")
        D.waveform_svg(trace, out / "waveforms.svg", title=cfg.variant)
    except Exception as exc:
        raise StageFailure("dynamic", str(exc)) from None
    _summary(out, dict(variant=cfg.variant, metrics=record))


def cmd_optimize(args) -> None:
    from . import optimizer as O

    cfg = _load(args.config, args)
    out = _outdir(args.outdir)
    ga = O.GaConfig(population_size=args.population, generations=args.generations,
                    rng_seed=cfg.study.seed, n_angles=args.angles or 16,
                    resolution=args.resolution or "coarse", workers=cfg.study.workers)
    try:
        res = O.run_ga(ga, cfg.variant, log=log.info)
    except Exception as exc:
        raise StageFailure("optimize", str(exc)) from None
    res.write_log(out / "ga_log.csv")
    best = cfg.with_design(res.best.as_array())
    C.save(best, out / "optimized.ini")
    data = dict(variant=cfg.variant, seed=cfg.study.seed, best_fitness_nm=res.best_fitness,
                best_design=dataclasses.asdict(res.best), history=res.history,
                evaluations=res.evaluations, ga=dataclasses.asdict(ga))
    if args.final_check:
        try:
            data["final_mean_torque_nm"] = O.stroke_mean_torque(
                best.geometry, ga.current, cfg.study.n_angles, "reference")
        except Exception as exc:
            raise StageFailure("optimize", f"final re-evaluation failed: {exc}") from None
    _summary(out, data)


def cmd_compare(args) -> None:
    from .report import RunOptions, StageError, compare

    first = _load(args.config, args)
    other = _load(args.against, args)
    cfgs = {c.variant: c for c in (first, other)}
    if len(cfgs) != 2:
        raise StageFailure("config", "compare needs one 8/14 and one 8/12 configuration")
    s = first.study
    opts = RunOptions(resolution=s.resolution, currents=s.currents, n_angles=s.n_angles,
                      dynamic=not args.static_only, core_loss=not args.no_core_loss,
                      maps_dir=args.maps_dir, workers=s.workers,
                      allow_volume_mismatch=args.allow_volume_mismatch,
                      field_plots=not args.no_field_plots)
    try:
        compare(cfgs["proposed_8_14"], cfgs["conventional_8_12"], opts, args.outdir,
                log=log.info)
    except StageError as exc:
        raise StageFailure("compare", str(exc)) from None


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tpsrm", description="Two-phase SRM design toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def stage(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="INI file or packaged variant name")
        sp.add_argument("outdir")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--resolution", choices=("coarse", "reference", "fine"))
        sp.add_argument("--angles", type=int, help="angles per stroke")
        sp.add_argument("--currents", type=_currents, help="comma separated currents in A")
        sp.add_argument("--workers", type=int)
        sp.set_defaults(func=func)
        return sp

    sp = stage("geometry", cmd_geometry, "validate and draw the cross-section")
    sp.add_argument("--rotor-angle", type=float, default=0.0, help="mechanical degrees")
    sp.add_argument("--check-bounds", action="store_true")
    sp = stage("mesh", cmd_mesh, "generate and export the mesh")
    sp.add_argument("--rotor-angle", type=float, default=0.0)
    sp = stage("static", cmd_static, "flux-linkage and torque maps")
    sp.add_argument("--field-plots", action="store_true")
    sp = stage("dynamic", cmd_dynamic, "drive simulation and losses")
    sp.add_argument("--maps", help="prebuilt maps CSV")
    sp.add_argument("--no-core-loss", action="store_true")
    sp.add_argument("--stride", type=int, default=10, help="trace CSV row stride")
    sp = stage("optimize", cmd_optimize, "genetic optimization of the free dimensions")
    sp.add_argument("--population", type=int, default=24)
    sp.add_argument("--generations", type=int, default=40)
    sp.add_argument("--final-check", action="store_true",
                    help="re-evaluate the winner on the reference mesh")
    sp = stage("compare", cmd_compare, "full two-machine comparison")
    sp.add_argument("--against", default="conventional_8_12",
                    help="configuration of the second machine")
    sp.add_argument("--maps-dir", help="cache directory for maps")
    sp.add_argument("--static-only", action="store_true")
    sp.add_argument("--no-core-loss", action="store_true")
    sp.add_argument("--no-field-plots", action="store_true")
    sp.add_argument("--allow-volume-mismatch", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except StageFailure as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.stage, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
